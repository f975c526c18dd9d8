# %% [markdown]
# # Benchmarking a workload with idle padding
#
# A short tour of the measurement path: run a synthetic workload a few times
# with idle padding around it, turn each run into CPU delta / latency / peak
# memory, aggregate, and compare devices on a radar chart.
#
# Run with `python3 demos/benchmark_walkthrough.py`; plots go to `demos/out/`.

# %%
import sys
from pathlib import Path

from edgebench.harness import BenchmarkPlan, Phase, WorkloadSpec, run_plan
from edgebench.metrics import aggregate, run_metrics
from edgebench.report import (emit_cpu_timeseries_svg, emit_radar_svg, emit_table,
                              normalize_radar)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# %% [markdown]
# ## A small plan
#
# The `items` workload busy-loops for a fixed time per item and prints
# `EDGEOPS:ITEM:<j>:START|END` markers, so per-item latency comes for free.
# Padding is shortened from the default 30 s to keep the demo quick.

# %%
plan = BenchmarkPlan(
    WorkloadSpec(sys.executable, ["-m", "edgebench.workloads", "items",
                                  "--items", "5", "--item-seconds", "0.4", "--busy"]),
    batch_size=5, repetitions=3, padding_seconds=2.0, sampling_interval=0.1,
    device_label="this machine")
runs = run_plan(plan, OUT)
print(f"{len(runs)} runs written under {OUT / 'runs' / plan.plan_hash()}")

# %%
for r in runs:
    m = run_metrics(r)
    act = r.window(Phase.ACTIVE)
    print(f"run {r.run_index}: active {act.duration_ns / 1e9:.2f} s, "
          f"cpu delta {m.cpu_delta_pct:.1f} pts, peak rss {m.mem_peak_bytes / 1e6:.1f} MB, "
          f"items {[round(x, 2) for x in m.per_item_latency_seconds]}")

# %% [markdown]
# ## The CPU trace
#
# The shaded bands are the padding and active windows; the idle baseline is
# the pooled mean of both pads.

# %%
first = runs[0]
(OUT / "cpu_timeseries.svg").write_bytes(emit_cpu_timeseries_svg(first.samples, first.windows))

# %% [markdown]
# ## Aggregate and compare
#
# Alongside the local summary we replay two reference boards from their
# published means. Normalising each axis by its maximum puts the costlier
# device on the rim; the smaller triangle wins.

# %%
local = aggregate([run_metrics(r) for r in runs], plan.device_label)

from edgebench.metrics import CPU_DELTA, LATENCY, MEM_PEAK, MetricsSummary, Stat  # noqa: E402


def reference(label, cpu, lat, mem_mb):
    return MetricsSummary(label, 10, {CPU_DELTA: Stat(cpu, 0, cpu, cpu, 10),
                                      LATENCY: Stat(lat, 0, lat, lat, 10),
                                      MEM_PEAK: Stat(mem_mb * 1e6, 0, mem_mb * 1e6,
                                                     mem_mb * 1e6, 10)})


boards = [reference("Raspberry Pi 4", 29.96, 67.73, 548.44),
          reference("BeagleBone AI-64", 53.02, 67.56, 691.43)]
print(emit_table(boards + [local]))

radar = normalize_radar(boards)
for label in radar.devices:
    print(f"{label}: v = {tuple(round(v, 3) for v in radar.values[label])}, "
          f"area {radar.areas[label]:.3f}")
(OUT / "radar.svg").write_bytes(emit_radar_svg(radar))
