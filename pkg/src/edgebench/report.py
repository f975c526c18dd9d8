"""Tables, radar comparison and SVG plots for benchmark summaries.

Radar geometry: three axes 120 degrees apart (CPU delta, latency, peak
memory). Each device's raw means are divided by the per-axis maximum over
the compared devices, so the most expensive device touches the rim; the
triangle area ``sqrt(3)/4 * (v1*v2 + v2*v3 + v3*v1)`` then orders devices,
smaller being cheaper.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import escape

from .errors import MissingMetric
from .harness import Phase, PhaseWindow
from .metrics import CPU_DELTA, LATENCY, MEM_PEAK, SUMMARY_METRICS, MetricsSummary, Stat
from .sampler import SampleLog

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

RADAR_AXES = (CPU_DELTA, LATENCY, MEM_PEAK)
AXIS_LABELS = {CPU_DELTA: "CPU delta (%)", LATENCY: "Latency (s)", MEM_PEAK: "Peak memory (MB)"}
CSV_COLUMNS = ["device", "metric", "mean", "std", "min", "max", "n_runs"]
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


@dataclass(frozen=True)
class DeviceProfile:
    label: str
    soc: str
    cores: int
    clock_ghz: float
    memory_gb: float
    notes: str = ""

    def __post_init__(self):
        if self.cores < 1:
            raise ValueError("cores must be >= 1")
        if not (self.clock_ghz > 0 and self.memory_gb > 0):
            raise ValueError("clock and memory must be positive")


def load_devices(path=None) -> list[DeviceProfile]:
    """Device registry; the bundled one lists the two reference boards."""
    if path is None:
        text = resources.files("edgebench").joinpath("data/devices.toml").read_text()
    else:
        with open(path) as f:
            text = f.read()
    doc = tomllib.loads(text)
    return [DeviceProfile(**d) for d in doc.get("device", [])]


@dataclass
class RadarData:
    axes: tuple[str, str, str] = RADAR_AXES
    devices: list[str] = field(default_factory=list)
    values: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    areas: dict[str, float] = field(default_factory=dict)
    clamped: dict[str, bool] = field(default_factory=dict)


def radar_area(v: Sequence[float]) -> float:
    a, b, c = v
    return math.sqrt(3) / 4 * (a * b + b * c + c * a)


def normalize_radar(summaries: Sequence[MetricsSummary]) -> RadarData:
    if not summaries:
        raise ValueError("need at least one summary")
    raw = {}
    clamped = {}
    for s in summaries:
        row = []
        for axis in RADAR_AXES:
            if axis not in s.metrics:
                raise MissingMetric(f"{s.device_label}: no {axis} in summary")
            row.append(s.metrics[axis].mean)
        # a negative CPU delta is plotted at 0; tables keep the signed value
        clamped[s.device_label] = row[0] < 0
        row[0] = max(row[0], 0.0)
        raw[s.device_label] = row
    maxima = [max(r[i] for r in raw.values()) for i in range(3)]
    radar = RadarData(devices=[s.device_label for s in summaries], clamped=clamped)
    for label, row in raw.items():
        v = tuple(row[i] / maxima[i] if maxima[i] > 0 else 0.0 for i in range(3))
        radar.values[label] = v
        radar.areas[label] = radar_area(v)
    return radar


# ---------------------------------------------------------------- tabular

def _rows(summaries: Iterable[MetricsSummary]):
    for s in sorted(summaries, key=lambda s: s.device_label):
        for name in sorted(s.metrics):
            yield s, name, s.metrics[name]


def _num(x: float) -> str:
    return format(x, ".17g")


def emit_csv(summaries: Iterable[MetricsSummary]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s, name, st in _rows(summaries):
        w.writerow([s.device_label, name, _num(st.mean), _num(st.std), _num(st.min),
                    _num(st.max), s.n_runs])
    return buf.getvalue().encode()


def parse_csv(data: bytes) -> list[MetricsSummary]:
    out: dict[str, MetricsSummary] = {}
    for row in csv.DictReader(io.StringIO(data.decode())):
        label = row["device"]
        n_runs = int(row["n_runs"])
        s = out.setdefault(label, MetricsSummary(label, n_runs))
        s.metrics[row["metric"]] = Stat(float(row["mean"]), float(row["std"]),
                                        float(row["min"]), float(row["max"]), n_runs)
    return list(out.values())


def summary_to_dict(s: MetricsSummary) -> dict:
    return {
        "device_label": s.device_label,
        "n_runs": s.n_runs,
        "metrics": {name: {"mean": st.mean, "std": st.std, "min": st.min, "max": st.max,
                           "n": st.n}
                    for name, st in sorted(s.metrics.items())},
        "excluded_runs": [{"run_index": i, "reason": r} for i, r in s.excluded_runs],
    }


def summary_from_dict(d: dict) -> MetricsSummary:
    s = MetricsSummary(d["device_label"], d["n_runs"])
    for name, m in d["metrics"].items():
        s.metrics[name] = Stat(m["mean"], m["std"], m["min"], m["max"], m.get("n", d["n_runs"]))
    s.excluded_runs = [(e["run_index"], e["reason"]) for e in d.get("excluded_runs", [])]
    return s


def emit_json(summaries: Iterable[MetricsSummary]) -> bytes:
    doc = [summary_to_dict(s) for s in sorted(summaries, key=lambda s: s.device_label)]
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()


def load_json(data: bytes) -> list[MetricsSummary]:
    doc = json.loads(data)
    if isinstance(doc, dict):
        doc = [doc]
    return [summary_from_dict(d) for d in doc]


def _display(name: str, st: Stat) -> tuple[float, float]:
    if name == MEM_PEAK:
        return st.mean / 1e6, st.std / 1e6
    return st.mean, st.std


def emit_table(summaries: Sequence[MetricsSummary]) -> str:
    """Plain-text mean +/- std table, one column per device (memory in MB)."""
    devices = sorted(summaries, key=lambda s: s.device_label)
    header = ["metric"] + [s.device_label for s in devices]
    rows = [header]
    for name in SUMMARY_METRICS:
        row = [AXIS_LABELS[name]]
        for s in devices:
            if name in s.metrics:
                mean, std = _display(name, s.metrics[name])
                row.append(f"{mean:.2f} ± {std:.2f}")
            else:
                row.append("n/a")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
                     for r in rows) + "\n"


# ---------------------------------------------------------------- SVG

def _svg(width: int, height: int, body: list[str]) -> bytes:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">')
    return ("\n".join([head, *body, "</svg>"]) + "\n").encode()


def _f(x: float) -> str:
    return f"{x:.2f}"


def emit_radar_svg(radar: RadarData, size: int = 420) -> bytes:
    cx, cy, r = size / 2, size / 2 + 10, size * 0.34
    angles = [-math.pi / 2 + k * 2 * math.pi / 3 for k in range(3)]

    def at(k, v):
        return cx + r * v * math.cos(angles[k]), cy + r * v * math.sin(angles[k])

    body = [f'<rect width="{size}" height="{size + 60}" fill="white"/>']
    for level in (0.25, 0.5, 0.75, 1.0):
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (at(k, level) for k in range(3)))
        body.append(f'<polyline class="grid" points="{pts} {pts.split()[0]}" fill="none" '
                    f'stroke="#cccccc"/>')
    for k, axis in enumerate(radar.axes):
        x, y = at(k, 1.0)
        lx, ly = at(k, 1.12)
        body.append(f'<line x1="{_f(cx)}" y1="{_f(cy)}" x2="{_f(x)}" y2="{_f(y)}" stroke="#999999"/>')
        body.append(f'<text x="{_f(lx)}" y="{_f(ly)}" text-anchor="middle">'
                    f'{escape(AXIS_LABELS.get(axis, axis))}</text>')
    for i, label in enumerate(radar.devices):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (at(k, v) for k, v in enumerate(radar.values[label])))
        body.append(f'<polygon points="{pts}" fill="{color}" fill-opacity="0.25" '
                    f'stroke="{color}" stroke-width="2"><title>{escape(label)}</title></polygon>')
        note = " (cpu clamped)" if radar.clamped.get(label) else ""
        ly = size + 20 + 16 * i
        body.append(f'<rect x="10" y="{ly - 10}" width="12" height="12" fill="{color}"/>')
        body.append(f'<text class="legend" x="28" y="{ly}">{escape(label)}: area '
                    f'{radar.areas[label]:.3f}{note}</text>')
    return _svg(size, size + 20 + 16 * max(1, len(radar.devices)) + 10, body)


PHASE_FILL = {Phase.PRE_PAD: "#e8e8e8", Phase.ACTIVE: "#fde2c4", Phase.POST_PAD: "#dce9f5"}


def emit_cpu_timeseries_svg(log: SampleLog, windows: Sequence[PhaseWindow] = (),
                            width: int = 720, height: int = 300) -> bytes:
    """CPU% over time with the padding and active windows shaded."""
    left, right, top, bottom = 50, 15, 15, 35
    pw, ph = width - left - right, height - top - bottom
    body = [f'<rect width="{width}" height="{height}" fill="white"/>']
    points = [(r.t, r.cpu_pct) for r in log.records if r.cpu_pct is not None]
    times = [t for t, _ in points] + [t for w in windows for t in (w.start, w.end)]
    if times:
        t0, t1 = min(times), max(times)
    else:
        t0, t1 = 0, 1
    span = max(t1 - t0, 1)

    def x(t):
        return left + pw * (t - t0) / span

    def y(v):
        return top + ph * (1 - v / 100.0)

    for w in windows:
        body.append(f'<rect class="phase" data-phase="{w.phase.value}" x="{_f(x(w.start))}" '
                    f'y="{top}" width="{_f(x(w.end) - x(w.start))}" height="{ph}" '
                    f'fill="{PHASE_FILL[w.phase]}"><title>{w.phase.value}</title></rect>')
    body.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    body.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    for v in (0, 25, 50, 75, 100):
        body.append(f'<text x="{left - 6}" y="{_f(y(v) + 4)}" text-anchor="end">{v}</text>')
    body.append(f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle">'
                f'time (s, {span / 1e9:.1f} s span)</text>')
    if points:
        pts = " ".join(f"{_f(x(t))},{_f(y(v))}" for t, v in points)
        body.append(f'<polyline class="cpu" points="{pts}" fill="none" stroke="#d62728" '
                    f'stroke-width="1.5"/>')
    else:
        body.append(f'<text class="no-data" x="{left + pw / 2}" y="{top + ph / 2}" '
                    f'text-anchor="middle">no data</text>')
    return _svg(width, height, body)


def emit_series_svg(series: dict[str, Sequence[tuple[float, float]]], y_label: str = "RMS",
                    width: int = 720, height: int = 300,
                    markers: Optional[dict[str, Sequence[tuple[float, float]]]] = None) -> bytes:
    """Line plot of several (x seconds, y) series, e.g. per-channel RMS over time."""
    left, right, top, bottom = 60, 160, 15, 35
    pw, ph = width - left - right, height - top - bottom
    body = [f'<rect width="{width}" height="{height}" fill="white"/>']
    allpts = [p for s in series.values() for p in s]
    body.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    body.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    body.append(f'<text x="14" y="{top + ph / 2}" transform="rotate(-90 14 {top + ph / 2})" '
                f'text-anchor="middle">{escape(y_label)}</text>')
    if not allpts:
        body.append(f'<text class="no-data" x="{left + pw / 2}" y="{top + ph / 2}" '
                    f'text-anchor="middle">no data</text>')
        return _svg(width, height, body)
    x0, x1 = min(p[0] for p in allpts), max(p[0] for p in allpts)
    y0, y1 = min(0.0, min(p[1] for p in allpts)), max(p[1] for p in allpts)
    xs, ys = max(x1 - x0, 1e-9), max(y1 - y0, 1e-9)

    def sx(v):
        return left + pw * (v - x0) / xs

    def sy(v):
        return top + ph * (1 - (v - y0) / ys)

    for v in (y0, (y0 + y1) / 2, y1):
        body.append(f'<text x="{left - 6}" y="{_f(sy(v) + 4)}" text-anchor="end">{v:.3g}</text>')
    for i, (name, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_f(sx(a))},{_f(sy(b))}" for a, b in pts)
        body.append(f'<polyline class="series" points="{coords}" fill="none" stroke="{color}" '
                    f'stroke-width="1.5"><title>{escape(name)}</title></polyline>')
        body.append(f'<text x="{left + pw + 10}" y="{top + 14 + 16 * i}" fill="{color}">'
                    f'{escape(name)}</text>')
        for a, b in (markers or {}).get(name, ()):
            body.append(f'<circle class="event" cx="{_f(sx(a))}" cy="{_f(sy(b))}" r="4" '
                        f'fill="none" stroke="black"/>')
    return _svg(width, height, body)
