"""Per-channel RMS of TDMS sensor streams and trailing z-score anomaly alerts.

The detector flags an RMS point when it lies at least ``z_threshold``
trailing standard deviations away from the trailing mean of up to
``trailing_window`` earlier points. Flagged points are kept out of the
baseline so one spike cannot drag the expectation for the points after it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from collections import deque
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import tdms
from .errors import EmptySeries, NoNumericChannels

STATE_VERSION = 1


@dataclass(frozen=True)
class RmsPoint:
    channel_id: str
    window_start: datetime
    window_len: int
    rms: float


@dataclass(frozen=True)
class DetectorConfig:
    trailing_window: int = 96
    z_threshold: float = 3.0
    min_history: int = 20
    absolute_floor: Optional[float] = None

    def __post_init__(self):
        if self.min_history < 2:
            raise ValueError("min_history must be >= 2")
        if self.trailing_window < self.min_history:
            raise ValueError("trailing_window must be >= min_history")
        if not self.z_threshold > 0:
            raise ValueError("z_threshold must be > 0")
        if self.absolute_floor is not None and self.absolute_floor < 0:
            raise ValueError("absolute_floor must be >= 0")


@dataclass(frozen=True)
class AnomalyEvent:
    channel_id: str
    at: datetime
    observed: float
    expected: float
    score: float
    direction: str  # "higher" | "lower"
    index: int = -1  # position in the detected sequence


def rms(samples) -> float:
    """Root mean square, computed on max-scaled values to avoid overflow."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise EmptySeries("rms of an empty series")
    peak = float(np.max(np.abs(x)))
    if peak == 0.0 or not math.isfinite(peak):
        return peak
    scaled = x / peak
    return min(peak, peak * math.sqrt(math.fsum(scaled * scaled) / x.size))


def windowed_rms(series, window_len: int, channel_id: str, t0: datetime,
                 dt: float) -> list[RmsPoint]:
    """RMS over consecutive non-overlapping windows.

    A trailing partial window is kept and recognisable by its shorter
    ``window_len``.
    """
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise EmptySeries(f"{channel_id}: empty series")
    points = []
    for k, start in enumerate(range(0, x.size, window_len)):
        chunk = x[start:start + window_len]
        points.append(RmsPoint(channel_id, t0 + timedelta(seconds=k * window_len * dt),
                               len(chunk), rms(chunk)))
    return points


class ChannelDetector:
    """Trailing-baseline z-score detector for a single channel.

    The baseline is a ring of the most recent unflagged points.
    """

    def __init__(self, channel_id: str, cfg: DetectorConfig,
                 history: Iterable[RmsPoint] = ()):
        self.channel_id = channel_id
        self.cfg = cfg
        self.baseline: deque[RmsPoint] = deque(history, maxlen=cfg.trailing_window)

    def expected(self) -> Optional[tuple[float, float]]:
        """(trailing mean, trailing sample std) or None with too little history."""
        if len(self.baseline) < self.cfg.min_history:
            return None
        b = np.fromiter((p.rms for p in self.baseline), dtype=np.float64)
        mean = math.fsum(b) / b.size
        std = math.sqrt(math.fsum((b - mean) ** 2) / (b.size - 1))
        return mean, std

    def update(self, point: RmsPoint, index: int = -1) -> Optional[AnomalyEvent]:
        event = None
        stats = self.expected()
        if stats is not None:
            mean, std = stats
            diff = point.rms - mean
            if std > 0:
                score = diff / std
                floor = self.cfg.absolute_floor
                if abs(score) >= self.cfg.z_threshold and (floor is None or abs(diff) >= floor):
                    event = AnomalyEvent(self.channel_id, point.window_start, point.rms, mean,
                                         score, "higher" if diff > 0 else "lower", index)
        if event is None:
            self.baseline.append(point)
        return event


def detect(points: Sequence[RmsPoint], cfg: DetectorConfig = DetectorConfig(),
           detector: Optional[ChannelDetector] = None) -> list[AnomalyEvent]:
    """Run the detector over one channel's time-ordered points."""
    if not points:
        return []
    if detector is None:
        detector = ChannelDetector(points[0].channel_id, cfg)
    events = []
    for i, p in enumerate(points):
        ev = detector.update(p, i)
        if ev is not None:
            events.append(ev)
    return events


# ---------------------------------------------------------------- state file

def load_state(path, cfg: DetectorConfig) -> dict[str, ChannelDetector]:
    """Detectors restored from a state file; empty when the file does not exist."""
    path = Path(path)
    if not path.exists():
        return {}
    doc = json.loads(path.read_text())
    if doc.get("version") != STATE_VERSION:
        raise ValueError(f"{path}: unsupported detector state version {doc.get('version')!r}")
    return {cid: ChannelDetector(cid, cfg, (_point_from_dict(e) for e in ring))
            for cid, ring in doc["channels"].items()}


def save_state(path, detectors: dict[str, ChannelDetector]) -> None:
    """Write every channel's baseline ring, replacing the file atomically."""
    path = Path(path)
    doc = {"version": STATE_VERSION,
           "channels": {cid: [_point_dict(p) for p in det.baseline]
                        for cid, det in sorted(detectors.items())}}
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------- reports

@dataclass
class RmsReport:
    source: str
    checksum: str
    points: dict[str, list[RmsPoint]] = field(default_factory=dict)
    events: list[AnomalyEvent] = field(default_factory=list)

    def points_csv(self, header: bool = True) -> str:
        return points_to_csv([p for pts in self.points.values() for p in pts], header)

    def events_csv(self, header: bool = True) -> str:
        return events_to_csv(self.events, header)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "checksum": self.checksum,
            "points": {cid: [_point_dict(p) for p in pts] for cid, pts in self.points.items()},
            "events": [_event_dict(e) for e in self.events],
        }


def _point_dict(p: RmsPoint) -> dict:
    return {"channel_id": p.channel_id, "window_start": p.window_start.isoformat(),
            "window_len": p.window_len, "rms": p.rms}


def _point_from_dict(d: dict) -> RmsPoint:
    return RmsPoint(d["channel_id"], datetime.fromisoformat(d["window_start"]),
                    int(d["window_len"]), float(d["rms"]))


def _event_dict(e: AnomalyEvent) -> dict:
    d = asdict(e)
    d["at"] = e.at.isoformat()
    del d["index"]
    return d


POINT_COLUMNS = ["channel_id", "window_start_iso8601", "window_len", "rms"]
EVENT_COLUMNS = ["channel_id", "at", "observed", "expected", "score", "direction"]


def points_to_csv(points: Iterable[RmsPoint], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(POINT_COLUMNS)
    for p in points:
        w.writerow([p.channel_id, p.window_start.isoformat(), p.window_len, repr(p.rms)])
    return buf.getvalue()


def points_from_csv(text: str) -> list[RmsPoint]:
    rows = csv.DictReader(io.StringIO(text))
    return [RmsPoint(r["channel_id"], datetime.fromisoformat(r["window_start_iso8601"]),
                     int(r["window_len"]), float(r["rms"])) for r in rows]


def events_to_csv(events: Iterable[AnomalyEvent], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(EVENT_COLUMNS)
    for e in events:
        w.writerow([e.channel_id, e.at.isoformat(), repr(e.observed), repr(e.expected),
                    repr(e.score), e.direction])
    return buf.getvalue()


def _channel_timing(file: tdms.TdmsFile, group: str, channel: str,
                    fallback_start: datetime) -> tuple[datetime, float]:
    # NI waveform properties give the acquisition start and sample spacing
    props = file.group(group).channel(channel).properties
    start = props.get("wf_start_time")
    inc = props.get("wf_increment")
    t0 = fallback_start
    if start is not None and start.dtype == tdms.DataType.TIMESTAMP:
        t0 = start.value.to_datetime()
    dt = float(inc.value) if inc is not None and inc.dtype in tdms.NUMERIC else 1.0
    return t0, dt


def file_points(tdms_path, window_len: int) -> RmsReport:
    """Windowed RMS of every numeric channel, keyed ``group/channel``."""
    data = Path(tdms_path).read_bytes()
    model = tdms.parse(data)
    channels = tdms.numeric_channels(model)
    if not channels:
        raise NoNumericChannels(f"{tdms_path}: no numeric channels")
    mtime = datetime.fromtimestamp(os.stat(tdms_path).st_mtime, tz=timezone.utc)
    report = RmsReport(str(tdms_path), hashlib.sha256(data).hexdigest())
    for group, channel in channels:
        series = tdms.channel_data(model, group, channel)
        if series.size == 0:
            continue
        cid = f"{group}/{channel}"
        t0, dt = _channel_timing(model, group, channel, mtime)
        report.points[cid] = windowed_rms(series, window_len, cid, t0, dt)
    return report


def process_file(tdms_path, window_len: int, cfg: DetectorConfig = DetectorConfig(),
                 state_path=None) -> RmsReport:
    """RMS every numeric channel of a TDMS file and run the detector on each.

    With ``state_path`` the per-channel baselines are loaded before and
    saved after, so detection continues across consecutive files.
    """
    report = file_points(tdms_path, window_len)
    report.events = detect_points([p for pts in report.points.values() for p in pts],
                                  cfg, state_path)
    return report


def detect_points(points: Iterable[RmsPoint], cfg: DetectorConfig = DetectorConfig(),
                  state_path=None) -> list[AnomalyEvent]:
    """Detect over a mixed-channel point stream, grouping by channel id."""
    by_channel: dict[str, list[RmsPoint]] = {}
    for p in points:
        by_channel.setdefault(p.channel_id, []).append(p)
    detectors = load_state(state_path, cfg) if state_path else {}
    events = []
    for cid, pts in by_channel.items():
        det = detectors.setdefault(cid, ChannelDetector(cid, cfg))
        events.extend(detect(pts, cfg, det))
    if state_path:
        save_state(state_path, detectors)
    return events
