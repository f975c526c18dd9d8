import math
import xml.etree.ElementTree as ET

import pytest
from hypothesis import assume, given, strategies as st

from edgebench.errors import MissingMetric
from edgebench.harness import Phase, PhaseWindow
from edgebench.metrics import CPU_DELTA, LATENCY, MEM_PEAK, MetricsSummary, Stat
from edgebench.report import (CSV_COLUMNS, DeviceProfile, emit_cpu_timeseries_svg, emit_csv,
                              emit_json, emit_radar_svg, emit_series_svg, emit_table,
                              load_devices, load_json, normalize_radar, parse_csv, radar_area)
from edgebench.sampler import SampleLog, SampleRecord

from helpers import SEC

NS = {"svg": "http://www.w3.org/2000/svg"}
MB = 1e6


def summary(label, cpu, lat, mem, std=(0.0, 0.0, 0.0), n=10):
    return MetricsSummary(label, n, {
        CPU_DELTA: Stat(cpu, std[0], cpu - std[0], cpu + std[0], n),
        LATENCY: Stat(lat, std[1], lat - std[1], lat + std[1], n),
        MEM_PEAK: Stat(mem, std[2], mem - std[2], mem + std[2], n),
    })


def rpi():
    return summary("Raspberry Pi 4", 29.96, 67.73, 548.44 * MB, (1.1, 0.4, 3e6))


def bb():
    return summary("BeagleBone AI-64", 53.02, 67.56, 691.43 * MB, (2.2, 0.3, 5e6))


def parse_svg(data):
    return ET.fromstring(data)


# ---------------------------------------------------------------- radar

def test_single_device_self_normalizes():
    r = normalize_radar([summary("a", 10.0, 2.0, 5e8)])
    assert r.values["a"] == (1.0, 1.0, 1.0)
    assert r.areas["a"] == pytest.approx(3 * math.sqrt(3) / 4)


def test_reference_pair_values():
    r = normalize_radar([rpi(), bb()])
    v_rpi, v_bb = r.values["Raspberry Pi 4"], r.values["BeagleBone AI-64"]
    assert v_rpi == pytest.approx((29.96 / 53.02, 1.0, 548.44 / 691.43))
    assert v_rpi == pytest.approx((0.565, 1.0, 0.793), abs=5e-4)
    assert v_bb == pytest.approx((1.0, 0.9975, 1.0), abs=5e-5)
    assert r.areas["Raspberry Pi 4"] == pytest.approx(0.782, abs=1e-3)
    assert r.areas["BeagleBone AI-64"] == pytest.approx(1.297, abs=1e-3)
    assert r.areas["Raspberry Pi 4"] < r.areas["BeagleBone AI-64"]


def test_all_zero_metrics():
    r = normalize_radar([summary("a", 0.0, 0.0, 0.0), summary("b", 0.0, 0.0, 0.0)])
    assert r.values["a"] == (0.0, 0.0, 0.0) and r.areas["a"] == 0.0


def test_negative_cpu_clamped_for_plot_only():
    a, b = summary("a", -3.0, 1.0, 1.0), summary("b", 10.0, 1.0, 1.0)
    r = normalize_radar([a, b])
    assert r.values["a"][0] == 0.0 and r.clamped["a"] and not r.clamped["b"]
    assert a[CPU_DELTA].mean == -3.0
    assert "-3.00" in emit_table([a, b])


def test_missing_metric():
    s = summary("a", 1.0, 1.0, 1.0)
    del s.metrics[LATENCY]
    with pytest.raises(MissingMetric):
        normalize_radar([s])


def test_radar_area_examples():
    assert radar_area((1, 1, 1)) == pytest.approx(1.2990381, abs=1e-7)
    assert radar_area((0, 0, 0)) == 0.0


unit = st.floats(0, 1)


@given(unit, unit, unit, st.integers(0, 2), st.floats(0, 1))
def test_area_monotone(a, b, c, i, bump):
    v = [a, b, c]
    w = list(v)
    w[i] = min(1.0, v[i] + bump)
    assert radar_area(w) >= radar_area(v)
    others = [v[k] for k in range(3) if k != i]
    # strictness is observable once the change in area exceeds rounding (area <= 1.3)
    if w[i] - v[i] > 1e-6 and any(o > 1e-6 for o in others):
        assert radar_area(w) > radar_area(v)


positive = st.floats(0.01, 1e4)


@given(st.lists(st.tuples(positive, positive, positive), min_size=1, max_size=5),
       st.integers(0, 2), st.floats(0.01, 100))
def test_normalization_scale_invariant(rows, axis, k):
    base = [summary(f"d{i}", *r) for i, r in enumerate(rows)]
    scaled_rows = [tuple(x * k if j == axis else x for j, x in enumerate(r)) for r in rows]
    scaled = [summary(f"d{i}", *r) for i, r in enumerate(scaled_rows)]
    a, b = normalize_radar(base), normalize_radar(scaled)
    for label in a.values:
        assert b.values[label] == pytest.approx(a.values[label], rel=1e-9)


@given(st.tuples(positive, positive, positive), st.tuples(unit, unit, unit),
       st.tuples(positive, positive, positive))
def test_dominated_device_has_smaller_area(a, frac, other):
    b = tuple(x + f * 10 for x, f in zip(a, frac))
    assume(b != a)
    r = normalize_radar([summary("A", *a), summary("B", *b), summary("C", *other)])
    assert r.areas["A"] <= r.areas["B"] + 1e-12


@given(st.lists(st.tuples(st.floats(-50, 100), positive, positive), min_size=1, max_size=4))
def test_radar_invariants(rows):
    r = normalize_radar([summary(f"d{i}", *row) for i, row in enumerate(rows)])
    for k in range(3):
        col = [v[k] for v in r.values.values()]
        assert all(0.0 <= x <= 1.0 for x in col)
        if any(x > 0 for x in col):
            assert max(col) == 1.0
    assert all(a >= 0 for a in r.areas.values())


# ---------------------------------------------------------------- csv / json / table

def test_csv_shape_and_order():
    text = emit_csv([rpi(), bb()]).decode()
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + 6
    assert [l.split(",")[0] for l in lines[1:]] == ["BeagleBone AI-64"] * 3 + ["Raspberry Pi 4"] * 3
    assert emit_csv([summary("x", 1, 2, 3)]).decode().count("\n") == 4


def test_emitters_deterministic():
    assert emit_csv([rpi(), bb()]) == emit_csv([bb(), rpi()])
    assert emit_json([rpi(), bb()]) == emit_json([bb(), rpi()])
    assert emit_radar_svg(normalize_radar([rpi(), bb()])) == emit_radar_svg(
        normalize_radar([rpi(), bb()]))


finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite, finite), min_size=1, max_size=3),
       st.integers(1, 100))
def test_csv_round_trip_full_precision(rows, n):
    sums = [summary(f"d{i}", *r, n=n) for i, r in enumerate(rows)]
    for s in sums:
        for st_ in s.metrics.values():
            assume(all(math.isfinite(x) for x in (st_.min, st_.max)))
    back = {s.device_label: s for s in parse_csv(emit_csv(sums))}
    for s in sums:
        assert back[s.device_label].metrics == s.metrics
        assert back[s.device_label].n_runs == n


def test_json_round_trip():
    s = rpi()
    s.excluded_runs = [(3, "nonzero_exit")]
    [back] = load_json(emit_json([s]))
    assert back.metrics == s.metrics and back.excluded_runs == s.excluded_runs


def test_table_rows():
    table = emit_table([rpi(), bb()])
    assert "29.96 ± 1.10" in table and "53.02 ± 2.20" in table
    assert "67.73" in table and "67.56" in table
    assert "548.44" in table and "691.43" in table


# ---------------------------------------------------------------- svg

def test_radar_svg_two_polygons():
    root = parse_svg(emit_radar_svg(normalize_radar([rpi(), bb()])))
    polys = root.findall(".//svg:polygon", NS)
    assert len(polys) == 2
    legend = [t.text for t in root.findall(".//svg:text[@class='legend']", NS)]
    assert any("Raspberry Pi 4" in t and "0.782" in t for t in legend)


def test_timeseries_empty_log():
    root = parse_svg(emit_cpu_timeseries_svg(SampleLog(SEC)))
    assert root.findall(".//svg:polyline", NS) == []
    assert root.find(".//svg:text[@class='no-data']", NS) is not None
    assert len(root.findall(".//svg:line", NS)) >= 2


def test_timeseries_phase_boundaries():
    recs = [SampleRecord(i * SEC, 10.0 if i < 30 or i >= 90 else 60.0) for i in range(120)]
    windows = [PhaseWindow(Phase.PRE_PAD, 0, 30 * SEC), PhaseWindow(Phase.ACTIVE, 30 * SEC, 90 * SEC),
               PhaseWindow(Phase.POST_PAD, 90 * SEC, 120 * SEC)]
    root = parse_svg(emit_cpu_timeseries_svg(SampleLog(SEC, recs), windows, width=720))
    rects = {r.get("data-phase"): r for r in root.findall(".//svg:rect[@class='phase']", NS)}
    assert set(rects) == {p.value for p in Phase}
    fills = {r.get("fill") for r in rects.values()}
    assert len(fills) == 3
    left, pw, span = 50, 720 - 50 - 15, 120 * SEC  # windows extend the span

    def x(t):
        return left + pw * t / span

    act = rects[Phase.ACTIVE.value]
    assert float(act.get("x")) == pytest.approx(x(30 * SEC), abs=0.01)
    assert float(act.get("x")) + float(act.get("width")) == pytest.approx(x(90 * SEC), abs=0.02)
    assert len(root.findall(".//svg:polyline[@class='cpu']", NS)) == 1


def test_series_svg_with_markers():
    root = parse_svg(emit_series_svg({"g/a": [(0, 1), (1, 2)], "g/<b>": [(0, 3)]},
                                     markers={"g/a": [(1, 2)]}))
    assert len(root.findall(".//svg:polyline", NS)) == 2
    assert len(root.findall(".//svg:circle", NS)) == 1
    assert parse_svg(emit_series_svg({})).find(".//svg:text[@class='no-data']", NS) is not None


# ---------------------------------------------------------------- devices

def test_bundled_registry():
    devs = {d.soc: d for d in load_devices()}
    assert (devs["TDA4VM"].cores, devs["TDA4VM"].clock_ghz, devs["TDA4VM"].memory_gb) == (2, 2.0, 4.0)
    assert (devs["BCM2711"].cores, devs["BCM2711"].clock_ghz, devs["BCM2711"].memory_gb) == (4, 1.5, 4.0)


def test_registry_file_and_invariants(tmp_path):
    p = tmp_path / "d.toml"
    p.write_text('[[device]]\nlabel = "x"\nsoc = "y"\ncores = 8\nclock_ghz = 3.0\nmemory_gb = 16.0\n')
    assert load_devices(p) == [DeviceProfile("x", "y", 8, 3.0, 16.0)]
    with pytest.raises(ValueError):
        DeviceProfile("x", "y", 0, 1.0, 1.0)
    with pytest.raises(ValueError):
        DeviceProfile("x", "y", 1, 0.0, 1.0)
