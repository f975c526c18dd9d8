"""Per-run CPU delta, latency, and memory, and their aggregation over runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (AllRunsExcluded, EmptyWindow, IdleBaselineUnavailable,
                     IncompleteRun, MetricsError, NoMemorySamples)
from .harness import OK, Phase, PhaseWindow, RunRecord
from .sampler import SampleLog

DEFAULT_IDLE_STD_THRESHOLD = 5.0

# metric names in summaries, in reporting order
CPU_DELTA = "cpu_delta_pct"
LATENCY = "latency_seconds"
MEM_PEAK = "mem_peak_bytes"
SUMMARY_METRICS = (CPU_DELTA, LATENCY, MEM_PEAK)


@dataclass(frozen=True)
class RunMetrics:
    run_index: int
    cpu_delta_pct: Optional[float]
    active_cpu_mean_pct: Optional[float]
    idle_cpu_mean_pct: Optional[float]
    latency_seconds: Optional[float]
    mem_peak_bytes: Optional[int]
    mem_mean_bytes: Optional[float]
    per_item_latency_seconds: Optional[tuple[float, ...]] = None
    per_item_peak_bytes: Optional[tuple[Optional[int], ...]] = None
    idle_unstable: bool = False
    excluded: Optional[str] = None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class Stat:
    mean: float
    std: float
    min: float
    max: float
    n: int


@dataclass
class MetricsSummary:
    device_label: str
    n_runs: int
    metrics: dict[str, Stat] = field(default_factory=dict)
    excluded_runs: list[tuple[int, str]] = field(default_factory=list)

    def __getitem__(self, name: str) -> Stat:
        return self.metrics[name]


def _window_values(samples: SampleLog, window: PhaseWindow) -> list[float]:
    return [r.cpu_pct for r in samples.records
            if window.contains(r.t) and r.cpu_pct is not None]


def phase_mean_cpu(samples: SampleLog, window: PhaseWindow) -> float:
    values = _window_values(samples, window)
    if not values:
        raise EmptyWindow(
            f"no cpu samples inside {window.phase.value} window "
            f"({window.duration_ns / 1e9:.3f} s at {samples.interval_ns / 1e9:g} s cadence)")
    return math.fsum(values) / len(values)


def _require(run: RunRecord, phase: Phase) -> PhaseWindow:
    w = run.window(phase)
    if w is None:
        raise IncompleteRun(f"run {run.run_index} has no {phase.value} window")
    return w


def _cpu_breakdown(run: RunRecord, idle_std_threshold: float) -> tuple[float, float, bool]:
    pre, active, post = (_require(run, p) for p in Phase)
    idle = _window_values(run.samples, pre) + _window_values(run.samples, post)
    if pre.duration_ns <= 0 or post.duration_ns <= 0 or not idle:
        raise IdleBaselineUnavailable(
            f"run {run.run_index}: no idle samples (padding too short or zero)")
    idle_mean = math.fsum(idle) / len(idle)
    active_mean = phase_mean_cpu(run.samples, active)
    idle_std = float(np.std(idle, ddof=1)) if len(idle) > 1 else 0.0
    unstable = idle_std > idle_std_threshold or active_mean < idle_mean
    return active_mean, idle_mean, unstable


def cpu_delta(run: RunRecord, idle_std_threshold: float = DEFAULT_IDLE_STD_THRESHOLD
              ) -> tuple[float, bool]:
    """Active-window mean CPU minus the pooled idle-pad mean.

    Returns ``(delta, idle_unstable)``. The delta is not clamped; a negative
    value is reported as-is and flagged unstable.
    """
    active_mean, idle_mean, unstable = _cpu_breakdown(run, idle_std_threshold)
    return active_mean - idle_mean, unstable


def active_latency(run: RunRecord) -> float:
    """Workload wall time in seconds; padding is never included."""
    if not run.completed:
        raise IncompleteRun(f"run {run.run_index} did not complete ({run.status})")
    w = _require(run, Phase.ACTIVE)
    return w.duration_ns / 1e9


def memory_stats(run: RunRecord) -> tuple[int, float, Optional[tuple[Optional[int], ...]]]:
    """(peak, mean, per_item_peaks) of workload RSS over the Active window."""
    active = _require(run, Phase.ACTIVE)
    rss = [r.workload_rss_bytes for r in run.samples.records
           if active.contains(r.t) and r.workload_rss_bytes is not None]
    if not rss:
        raise NoMemorySamples(
            f"run {run.run_index}: no RSS samples in Active window; "
            "use a shorter sampling interval")
    per_item = None
    if run.item_marks:
        per_item = tuple(m.peak_rss_bytes for m in run.item_marks)
    return max(rss), math.fsum(rss) / len(rss), per_item


def run_metrics(run: RunRecord, idle_std_threshold: float = DEFAULT_IDLE_STD_THRESHOLD
                ) -> RunMetrics:
    """All metrics for one run; unavailable ones are None with a note."""
    if not run.completed:
        return RunMetrics(run.run_index, None, None, None, None, None, None,
                          excluded=run.status)
    notes = []
    delta = active_mean = idle_mean = None
    unstable = False
    try:
        active_mean, idle_mean, unstable = _cpu_breakdown(run, idle_std_threshold)
        delta = active_mean - idle_mean
    except MetricsError as exc:
        notes.append(f"{type(exc).__name__}: {exc}")
    latency = active_latency(run)
    peak = mean = per_item_peaks = None
    try:
        peak, mean, per_item_peaks = memory_stats(run)
    except MetricsError as exc:
        notes.append(f"{type(exc).__name__}: {exc}")
    per_item_latency = None
    if run.item_marks:
        per_item_latency = tuple(m.duration_ns / 1e9 for m in run.item_marks)
    excluded = None if run.status == OK else run.status
    return RunMetrics(run.run_index, delta, active_mean, idle_mean, latency, peak, mean,
                      per_item_latency, per_item_peaks, unstable, excluded, tuple(notes))


def _stat(values: list[float]) -> Stat:
    a = np.asarray(values, dtype=np.float64)
    n = a.size
    lo, hi = float(a.min()), float(a.max())
    mean = min(max(math.fsum(a) / n, lo), hi)
    # single run: no spread estimate, reported as 0
    std = math.sqrt(math.fsum((a - mean) ** 2) / (n - 1)) if n > 1 else 0.0
    return Stat(mean, std, lo, hi, int(n))


def aggregate(per_run: list[RunMetrics], device_label: str) -> MetricsSummary:
    """Mean, sample std (n-1), min and max of each metric over included runs.

    Runs whose workload failed are excluded and listed. A metric that no
    included run could provide is absent from the summary.
    """
    included = [m for m in per_run if m.excluded is None]
    excluded = [(m.run_index, m.excluded) for m in per_run if m.excluded is not None]
    if not included:
        raise AllRunsExcluded(f"{device_label}: all {len(per_run)} runs excluded")
    summary = MetricsSummary(device_label, len(included), excluded_runs=excluded)
    for name in SUMMARY_METRICS:
        values = [getattr(m, name) for m in included if getattr(m, name) is not None]
        if values:
            summary.metrics[name] = _stat(values)
    return summary


def summarize(runs: list[RunRecord], device_label: str,
              idle_std_threshold: float = DEFAULT_IDLE_STD_THRESHOLD) -> MetricsSummary:
    return aggregate([run_metrics(r, idle_std_threshold) for r in runs], device_label)
