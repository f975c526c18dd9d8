"""Builders for synthetic run records with known answers."""

from edgebench.harness import OK, ItemMark, Phase, PhaseWindow, RunRecord
from edgebench.sampler import SampleLog, SampleRecord

SEC = 1_000_000_000


def _spread(start, end, values, rss):
    n = len(values)
    out = []
    for i, v in enumerate(values):
        t = start + (2 * i + 1) * (end - start) // (2 * n)
        out.append(SampleRecord(t, v, None if rss is None else rss[i]))
    return out


def make_run(pre, active, post, *, active_ns=None, active_rss=None, run_index=0,
             status=OK, marks=(), interval_ns=SEC, t0=10 * SEC):
    """A RunRecord whose windows hold exactly the given cpu samples.

    Pads last one interval per sample; the Active window lasts ``active_ns``
    (default one interval per sample) and its samples carry ``active_rss``.
    """
    pre_end = t0 + len(pre) * interval_ns
    act_end = pre_end + (active_ns if active_ns is not None else len(active) * interval_ns)
    post_end = act_end + len(post) * interval_ns
    recs = (_spread(t0, pre_end, pre, None) + _spread(pre_end, act_end, active, active_rss)
            + _spread(act_end, post_end, post, None))
    windows = (PhaseWindow(Phase.PRE_PAD, t0, pre_end),
               PhaseWindow(Phase.ACTIVE, pre_end, act_end),
               PhaseWindow(Phase.POST_PAD, act_end, post_end))
    return RunRecord(run_index, windows, SampleLog(interval_ns, recs, (0, 0)), tuple(marks),
                     0 if status == OK else 1, None, None, status)


def fixture_runs(cpu_delta, latency_s, mem_bytes, reps=10, idle=10.0, spread=0.0):
    """Runs replaying a device whose means are the given values.

    Pairs of runs deviate by +/- ``spread`` (scaled per metric) so the mean
    is exact while the standard deviation is not zero.
    """
    runs = []
    for i in range(reps):
        s = spread * (1 if i % 2 == 0 else -1) if i < reps - reps % 2 else 0.0
        act = idle + cpu_delta + s
        n = 12
        runs.append(make_run([idle] * 5, [act] * n, [idle] * 5,
                             active_ns=round((latency_s + s / 100) * SEC),
                             active_rss=[round(mem_bytes + s * 1e6)] * n, run_index=i))
    return runs


def marks_every(run, n_items, item_ns, rss_peaks=None):
    act = run.window(Phase.ACTIVE)
    out = []
    for j in range(n_items):
        s = act.start + j * item_ns
        out.append(ItemMark(j, s, s + item_ns, None if rss_peaks is None else rss_peaks[j]))
    return out


def write_strain_tdms(path, strain, start, increment=1.0):
    """A one-channel ``bridge/vgp_7_t`` file with waveform timing properties."""
    from edgebench import tdms
    from edgebench.tdms import DataType, TdmsChannel, TdmsFile, TdmsGroup, TdmsValue, Timestamp

    props = {"wf_start_time": TdmsValue(DataType.TIMESTAMP, Timestamp.from_datetime(start)),
             "wf_increment": TdmsValue(DataType.F64, increment),
             "unit_string": TdmsValue(DataType.STRING, "ue")}
    model = TdmsFile({"site": TdmsValue(DataType.STRING, "bridge 7")},
                     [TdmsGroup("bridge", [TdmsChannel("vgp_7_t", DataType.F64, strain, props)])])
    path.write_bytes(tdms.write(model))
    return path
