# %% [markdown]
# # From strain gauge files to an alert
#
# The edge pipeline in miniature: a data logger writes TDMS files, the edge
# node reduces every channel to windowed RMS values, a trailing z-score flags
# unusual windows, and a spooler forwards the results with checksums.
#
# Run with `python3 demos/shm_pipeline_walkthrough.py`; outputs go to `demos/out/shm/`.

# %%
import shutil
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from edgebench import tdms
from edgebench.report import emit_series_svg
from edgebench.shm import DetectorConfig, process_file
from edgebench.spool import SinkConfig, Spooler
from edgebench.tdms import DataType, TdmsChannel, TdmsFile, TdmsGroup, TdmsValue, Timestamp

OUT = Path(__file__).parent / "out" / "shm"
shutil.rmtree(OUT, ignore_errors=True)
logger_dir, inbox, sink = OUT / "logger", OUT / "inbox", OUT / "cloud"
for d in (logger_dir, inbox):
    d.mkdir(parents=True)

# %% [markdown]
# ## Synthetic logger output
#
# Two hourly files from one bridge: a top and a bottom gauge sampled at
# 10 Hz. The second file contains a 10-minute stretch where the top gauge
# reads about 85 microstrain high.

# %%
rng = np.random.default_rng(42)
start = datetime(2024, 10, 14, 10, tzinfo=timezone.utc)
fs, n = 10.0, 36_000
paths = []
for hour in range(2):
    t0 = start + timedelta(hours=hour)
    top = 426.72 + 4 * np.sin(np.arange(n) / 900) + rng.normal(0, 2, n)
    if hour == 1:
        top[18_000:24_000] += 85.46
    bottom = 0.5 * np.cos(np.arange(n) / 1100) + rng.normal(0, 0.05, n)
    timing = {"wf_start_time": TdmsValue(DataType.TIMESTAMP, Timestamp.from_datetime(t0)),
              "wf_increment": TdmsValue(DataType.F64, 1 / fs)}
    model = TdmsFile({"site": TdmsValue(DataType.STRING, "bridge 7")}, [
        TdmsGroup("bridge", [TdmsChannel("vgp_7_t", DataType.F64, top, timing),
                             TdmsChannel("vgp_7_b", DataType.F32, bottom.astype(np.float32),
                                         timing)])])
    path = logger_dir / f"bridge_{t0:%Y%m%d_%H%M}.tdms"
    path.write_bytes(tdms.write(model, segment_size=6000))
    paths.append(path)
print("\n".join(tdms.hierarchy(tdms.read(paths[0]))))

# %% [markdown]
# ## RMS and detection
#
# One-minute windows (600 samples). The detector state file carries each
# channel's trailing baseline from the first file into the second.

# %%
state = OUT / "detector_state.json"
cfg = DetectorConfig(trailing_window=96, z_threshold=3.0, min_history=20)
series, markers = {}, {}
for path in paths:
    rep = process_file(path, 600, cfg, state_path=state)
    (inbox / f"{path.stem}_rms.csv").write_text(rep.points_csv())
    (inbox / f"{path.stem}_events.csv").write_text(rep.events_csv())
    for cid, pts in rep.points.items():
        series.setdefault(cid, []).extend(((p.window_start - start).total_seconds() / 60, p.rms)
                                          for p in pts)
    for e in rep.events:
        markers.setdefault(e.channel_id, []).append(((e.at - start).total_seconds() / 60,
                                                     e.observed))
        print(f"{e.channel_id} {e.at:%H:%M}: {e.observed:.2f} is {e.direction} than the "
              f"expected {e.expected:.2f} (z = {e.score:.1f})")

# the first event after the jump is flagged; later windows stay flagged
# because flagged points never enter the baseline
(OUT / "rms.svg").write_bytes(emit_series_svg(
    {"bridge/vgp_7_t": series["bridge/vgp_7_t"]}, "RMS strain (ue)",
    markers={"bridge/vgp_7_t": markers.get("bridge/vgp_7_t", [])}))

# %% [markdown]
# ## Forwarding
#
# The spooler picks up the stable files, journals their SHA-256, copies them
# to the sink as `<name>.<sha8>` and removes the source after the ack.

# %%
spooler = Spooler(inbox, SinkConfig("directory-copy", str(sink)), OUT / "spool.jsonl",
                  stability_interval=0, scan_interval=0.05)
print(spooler.run(until_idle=True))
for obj in sorted(sink.iterdir()):
    print(" ", obj.name)
