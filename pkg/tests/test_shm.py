import json
import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgebench import tdms
from edgebench.errors import EmptySeries, NoNumericChannels
from edgebench.shm import (ChannelDetector, DetectorConfig, RmsPoint, detect, detect_points,
                           file_points, load_state, points_from_csv, points_to_csv,
                           process_file, rms, save_state, windowed_rms)
from edgebench.tdms import DataType as D, TdmsChannel, TdmsFile, TdmsGroup, TdmsValue, Timestamp

T0 = datetime(2024, 10, 14, tzinfo=timezone.utc)


def standardized(n, mean, std, freq=0.7):
    """Deterministic series with exactly the given mean and sample std."""
    x = np.sin(np.arange(n) * freq)
    x = (x - x.mean()) / x.std(ddof=1)
    return mean + std * x


def points(values, cid="g/c", start=T0, step=timedelta(hours=1)):
    return [RmsPoint(cid, start + i * step, 100, float(v)) for i, v in enumerate(values)]


# ---------------------------------------------------------------- rms

def test_rms_examples():
    assert rms([7.5] * 10) == 7.5
    assert rms([-2.0] * 3) == 2.0
    assert rms([0.0] * 5) == 0.0
    assert rms([3, -4, 3, -4]) == pytest.approx(math.sqrt(12.5), abs=1e-12)


def test_rms_empty():
    with pytest.raises(EmptySeries):
        rms([])


def test_rms_no_overflow():
    assert rms([1e300, -1e300]) == pytest.approx(1e300, rel=1e-12)
    assert rms([1e-300, 1e-300]) == pytest.approx(1e-300, rel=1e-12)


series = st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200)


@given(series, st.floats(-1e3, 1e3).filter(lambda a: a == 0 or abs(a) > 1e-3))
def test_rms_scale_equivariance(x, a):
    expect = abs(a) * rms(x)
    assert rms([a * v for v in x]) == pytest.approx(expect, rel=1e-12, abs=1e-300)


@given(series, st.randoms(use_true_random=False))
def test_rms_bounds_and_permutation(x, rnd):
    r = rms(x)
    assert 0.0 <= r <= max(abs(v) for v in x)
    y = list(x)
    rnd.shuffle(y)
    assert rms(y) == pytest.approx(r, rel=1e-12)


# ---------------------------------------------------------------- windowing

def test_single_window():
    x = np.random.default_rng(1).normal(size=1000)
    pts = windowed_rms(x, 1000, "g/c", T0, 0.01)
    assert len(pts) == 1 and pts[0].rms == rms(x) and pts[0].window_len == 1000


def test_constant_windows():
    pts = windowed_rms([2.0] * 10, 5, "g/c", T0, 1.0)
    assert [p.rms for p in pts] == [2.0, 2.0]
    assert [p.window_start for p in pts] == [T0, T0 + timedelta(seconds=5)]


def test_partial_trailing_window_kept():
    pts = windowed_rms([1.0] * 12, 5, "g/c", T0, 0.5)
    assert [p.window_len for p in pts] == [5, 5, 2]
    assert pts[2].window_start == T0 + timedelta(seconds=5.0)


def test_windowing_errors():
    with pytest.raises(EmptySeries):
        windowed_rms([], 5, "g/c", T0, 1.0)
    with pytest.raises(ValueError):
        windowed_rms([1.0], 0, "g/c", T0, 1.0)


@given(st.integers(1, 20), st.integers(0, 5), st.lists(st.floats(-1e3, 1e3), min_size=1,
                                                        max_size=60), st.data())
def test_windowing_concatenation(w, k, b, data):
    a = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=w * k, max_size=w * k))
    dt = 0.25
    whole = windowed_rms(a + b, w, "g/c", T0, dt)
    parts = (windowed_rms(a, w, "g/c", T0, dt) if a else []) + windowed_rms(
        b, w, "g/c", T0 + timedelta(seconds=len(a) * dt), dt)
    assert whole == parts


# ---------------------------------------------------------------- detector

def test_constant_stream_has_no_events():
    assert detect(points([5.0] * 200)) == []


def test_figure_shape_alert():
    base = standardized(50, 426.72, 10.0)
    events = detect(points(list(base) + [512.18]))
    assert len(events) == 1
    ev = events[0]
    assert ev.index == 50 and ev.direction == "higher"
    assert ev.expected == pytest.approx(426.72, rel=1e-12)
    assert ev.score == pytest.approx((512.18 - 426.72) / 10.0, rel=1e-9)
    assert ev.observed == 512.18


def test_lower_direction():
    events = detect(points(list(standardized(30, 100.0, 1.0)) + [80.0]))
    assert [e.direction for e in events] == ["lower"]
    assert events[0].score < -3


def test_no_events_before_min_history():
    cfg = DetectorConfig(min_history=20)
    vals = [1.0, 2.0] * 9 + [1000.0]  # 19 points of history, then a spike
    assert detect(points(vals), cfg) == []
    assert len(detect(points([1.0, 2.0] * 10 + [1000.0]), cfg)) == 1


def test_absolute_floor_suppresses_small_deviations():
    vals = list(standardized(30, 1.0, 1e-4)) + [1.01]
    assert len(detect(points(vals))) == 1
    assert detect(points(vals), DetectorConfig(absolute_floor=0.1)) == []


def test_trailing_window_limits_history():
    # only the most recent W points form the baseline
    cfg = DetectorConfig(trailing_window=20, min_history=20)
    det = ChannelDetector("g/c", cfg)
    vals = [float(i % 7) + i / 40 for i in range(45)]
    for p in points(vals):
        assert det.update(p) is None
    assert [p.rms for p in det.baseline] == vals[-20:]
    assert det.expected()[0] == pytest.approx(sum(vals[-20:]) / 20)


def test_contamination_guard():
    base = list(standardized(40, 426.72, 10.0))
    det = ChannelDetector("g/c", DetectorConfig())
    for i, p in enumerate(points(base)):
        assert det.update(p, i) is None
    before = det.expected()[0]
    spike = points([900.0], start=T0 + timedelta(days=5))[0]
    assert det.update(spike) is not None
    after = det.expected()[0]
    assert abs(after - before) <= 0.01 * abs(before)
    assert all(p.rms != 900.0 for p in det.baseline)


@pytest.mark.parametrize("cfg", [dict(min_history=1), dict(trailing_window=10, min_history=20),
                                 dict(z_threshold=0), dict(absolute_floor=-1)])
def test_detector_config_invariants(cfg):
    with pytest.raises(ValueError):
        DetectorConfig(**cfg)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=0, max_size=120),
       st.floats(1e-3, 1e3))
def test_event_indices_scale_invariant(vals, alpha):
    a = detect(points(vals))
    b = detect(points([alpha * v for v in vals]))
    assert [e.index for e in a] == [e.index for e in b]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), max_size=120))
def test_event_invariants(vals):
    cfg = DetectorConfig()
    for e in detect(points(vals), cfg):
        assert e.index >= cfg.min_history
        assert abs(e.score) >= cfg.z_threshold
        assert (e.direction == "higher") == (e.observed > e.expected)


# ---------------------------------------------------------------- state and files

def test_state_round_trip(tmp_path):
    cfg = DetectorConfig()
    det = ChannelDetector("g/c", cfg, points(standardized(25, 3.0, 0.5)))
    path = tmp_path / "state.json"
    save_state(path, {"g/c": det})
    doc = json.loads(path.read_text())
    assert doc["version"] == 1 and len(doc["channels"]["g/c"]) == 25
    back = load_state(path, cfg)
    assert list(back["g/c"].baseline) == list(det.baseline)
    assert load_state(tmp_path / "missing.json", cfg) == {}


def test_state_version_checked(tmp_path):
    path = tmp_path / "state.json"
    path.write_text('{"version": 99, "channels": {}}')
    with pytest.raises(ValueError):
        load_state(path, DetectorConfig())


def test_points_csv_round_trip():
    pts = points([0.1, 1 / 3, 1e-300])
    text = points_to_csv(pts)
    assert text.splitlines()[0] == "channel_id,window_start_iso8601,window_len,rms"
    assert points_from_csv(text) == pts


def bridge_file(path, t, b, start=T0, inc=1.0):
    props = {"wf_start_time": TdmsValue(D.TIMESTAMP, Timestamp.from_datetime(start)),
             "wf_increment": TdmsValue(D.F64, inc)}
    m = TdmsFile({}, [TdmsGroup("bridge", [TdmsChannel("vgp_7_t", D.F64, t, props),
                                           TdmsChannel("vgp_7_b", D.F32, b, props),
                                           TdmsChannel("note", D.STRING, ["x"])])])
    path.write_bytes(tdms.write(m))
    return path


def test_report_keyed_by_channel(tmp_path):
    n = 600
    f = bridge_file(tmp_path / "a.tdms", np.full(n, 426.72), np.ones(n, np.float32))
    rep = process_file(f, 100)
    assert set(rep.points) == {"bridge/vgp_7_t", "bridge/vgp_7_b"}
    assert len(rep.points["bridge/vgp_7_t"]) == 6
    assert rep.points["bridge/vgp_7_t"][1].window_start == T0 + timedelta(seconds=100)
    assert len(rep.checksum) == 64
    assert json.loads(json.dumps(rep.to_dict()))["source"] == str(f)


def test_all_zero_file(tmp_path):
    f = bridge_file(tmp_path / "z.tdms", np.zeros(300), np.zeros(300, np.float32))
    rep = process_file(f, 10)
    assert all(p.rms == 0.0 for pts in rep.points.values() for p in pts)
    assert rep.events == []


def test_no_numeric_channels(tmp_path):
    f = tmp_path / "s.tdms"
    f.write_bytes(tdms.write(TdmsFile({}, [TdmsGroup("g", [TdmsChannel("s", D.STRING, ["a"])])])))
    with pytest.raises(NoNumericChannels):
        file_points(f, 10)


def test_cross_file_state(tmp_path):
    w = 50
    rng = np.random.default_rng(7)
    calm = [426.72 + rng.normal(0, 2, w) for _ in range(30)]
    f1 = bridge_file(tmp_path / "1.tdms", np.concatenate(calm), np.ones(30 * w, np.float32))
    jump = np.concatenate([np.full(w, 512.18)] + calm[:3])
    f2 = bridge_file(tmp_path / "2.tdms", jump, np.ones(4 * w, np.float32),
                     start=T0 + timedelta(seconds=30 * w))
    state = tmp_path / "state.json"
    assert process_file(f1, w, state_path=state).events == []
    events = process_file(f2, w, state_path=state).events
    assert [(e.channel_id, e.direction) for e in events] == [("bridge/vgp_7_t", "higher")]
    assert events[0].at == T0 + timedelta(seconds=30 * w)
    # without state the second file alone has too little history
    assert process_file(f2, w).events == []


def test_detect_points_groups_channels():
    a = points(list(standardized(30, 10.0, 1.0)) + [30.0], cid="g/a")
    b = points([5.0] * 31, cid="g/b")
    mixed = [p for pair in zip(a, b) for p in pair]
    events = detect_points(mixed)
    assert [e.channel_id for e in events] == ["g/a"]
