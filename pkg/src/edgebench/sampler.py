"""CPU-time counters, workload memory, and the fixed-cadence sampling loop.

System CPU is read from the cumulative per-core tick table in ``/proc/stat``;
workload memory is the resident set size of the workload's process tree.
All timestamps are ``time.monotonic_ns()`` values; a single wall-clock
anchor per log exists only for labelling reports.
"""

from __future__ import annotations

import csv
import io
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import psutil

from .errors import CounterSourceUnavailable, NonMonotonicCounters, ProcessGone

log = logging.getLogger(__name__)

PROC_STAT = "/proc/stat"
MIN_INTERVAL_NS = 10_000_000
DEFAULT_INTERVAL_NS = 1_000_000_000

# Record flags.
GAP = "gap"      # a read failed; cpu_pct and/or rss missing
STALL = "stall"  # spacing to the previous record exceeded 2x the interval


@dataclass(frozen=True)
class CoreTicks:
    busy_ticks: int
    total_ticks: int


@dataclass(frozen=True)
class CpuCounters:
    per_core: tuple[CoreTicks, ...]
    aggregate: CoreTicks
    captured_at: int


@dataclass(frozen=True)
class SampleRecord:
    t: int
    cpu_pct: Optional[float]
    workload_rss_bytes: Optional[int] = None
    flag: Optional[str] = None


@dataclass
class SampleLog:
    interval_ns: int
    records: list[SampleRecord] = field(default_factory=list)
    # (wall-clock ns, monotonic ns) taken at the same instant
    wall_clock_anchor: tuple[int, int] = (0, 0)

    def __len__(self):
        return len(self.records)

    def wall_time(self, t: int) -> float:
        """Convert a monotonic timestamp to wall-clock seconds (labels only)."""
        wall_ns, mono_ns = self.wall_clock_anchor
        return (wall_ns + (t - mono_ns)) / 1e9

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_ns", "cpu_pct", "workload_rss_bytes", "flag"])
        for r in self.records:
            w.writerow([
                r.t,
                "" if r.cpu_pct is None else repr(r.cpu_pct),
                "" if r.workload_rss_bytes is None else r.workload_rss_bytes,
                r.flag or "",
            ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, interval_ns: int = DEFAULT_INTERVAL_NS,
                 wall_clock_anchor: tuple[int, int] = (0, 0)) -> "SampleLog":
        records = []
        for row in csv.DictReader(io.StringIO(text)):
            records.append(SampleRecord(
                t=int(row["t_ns"]),
                cpu_pct=float(row["cpu_pct"]) if row["cpu_pct"] else None,
                workload_rss_bytes=int(row["workload_rss_bytes"]) if row["workload_rss_bytes"] else None,
                flag=row.get("flag") or None,
            ))
        return cls(interval_ns=interval_ns, records=records,
                   wall_clock_anchor=wall_clock_anchor)


def _parse_stat_line(fields: list[str]) -> CoreTicks:
    # user nice system idle iowait irq softirq steal [guest guest_nice]
    # guest time is already folded into user/nice, so it is not added again.
    values = [int(v) for v in fields[:8]]
    if len(values) < 4:
        raise CounterSourceUnavailable(f"short cpu line: {fields!r}")
    total = sum(values)
    idle = values[3] + (values[4] if len(values) > 4 else 0)
    return CoreTicks(busy_ticks=total - idle, total_ticks=total)


def parse_proc_stat(text: str, captured_at: int) -> CpuCounters:
    per_core = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        name = parts[0]
        if name.startswith("cpu") and name[3:].isdigit():
            try:
                per_core.append(_parse_stat_line(parts[1:]))
            except ValueError as exc:
                raise CounterSourceUnavailable(f"unparseable line {line!r}") from exc
    if not per_core:
        raise CounterSourceUnavailable("no per-core cpu lines found")
    aggregate = CoreTicks(
        busy_ticks=sum(c.busy_ticks for c in per_core),
        total_ticks=sum(c.total_ticks for c in per_core),
    )
    return CpuCounters(tuple(per_core), aggregate, captured_at)


def snapshot_cpu(stat_path: str = PROC_STAT) -> CpuCounters:
    """Read cumulative busy/total ticks for every online core."""
    try:
        with open(stat_path) as f:
            text = f.read()
    except OSError as exc:
        raise CounterSourceUnavailable(f"cannot read {stat_path}: {exc}") from exc
    return parse_proc_stat(text, time.monotonic_ns())


def cpu_percent(prev: CpuCounters, cur: CpuCounters) -> float:
    """System-wide busy percentage between two snapshots, over all cores."""
    pairs = [(prev.aggregate, cur.aggregate)]
    pairs.extend(zip(prev.per_core, cur.per_core))
    for a, b in pairs:
        if b.busy_ticks < a.busy_ticks or b.total_ticks < a.total_ticks:
            raise NonMonotonicCounters(
                f"counter went backwards: {a} -> {b}")
    d_total = cur.aggregate.total_ticks - prev.aggregate.total_ticks
    if d_total == 0:
        return 0.0
    d_busy = cur.aggregate.busy_ticks - prev.aggregate.busy_ticks
    return min(100.0, max(0.0, 100.0 * d_busy / d_total))


def process_tree_rss(root_pid: int) -> int:
    """Sum of RSS over ``root_pid`` and all of its live descendants."""
    try:
        root = psutil.Process(root_pid)
        if root.status() == psutil.STATUS_ZOMBIE:
            raise ProcessGone(f"process {root_pid} is a zombie")
        total = root.memory_info().rss
        children = root.children(recursive=True)
    except psutil.NoSuchProcess as exc:
        raise ProcessGone(f"process {root_pid} exited") from exc
    except psutil.AccessDenied as exc:
        raise ProcessGone(f"process {root_pid} not readable") from exc
    for child in children:
        try:
            total += child.memory_info().rss
        except (psutil.NoSuchProcess, psutil.AccessDenied):
            continue
    return total


class Sampler:
    """Samples system CPU and workload RSS at a fixed cadence until stopped.

    ``workload_pid`` may be reassigned while the loop runs (the harness
    attaches the pid after spawn and detaches it after reaping). The log is
    only handed out once the loop has finished.
    """

    def __init__(self, interval_ns: int = DEFAULT_INTERVAL_NS,
                 workload_pid: Optional[int] = None,
                 stat_path: str = PROC_STAT,
                 rss_reader: Callable[[int], int] = process_tree_rss):
        interval_ns = int(interval_ns)
        if interval_ns < MIN_INTERVAL_NS:
            raise ValueError(
                f"sampling interval {interval_ns} ns is below the "
                f"{MIN_INTERVAL_NS} ns floor")
        self.interval_ns = interval_ns
        self.workload_pid = workload_pid
        self.stat_path = stat_path
        self._rss_reader = rss_reader
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._log: Optional[SampleLog] = None
        self._error: Optional[BaseException] = None
        self.started = threading.Event()
        self.started_at: Optional[int] = None

    def _sample(self, prev: CpuCounters) -> tuple[SampleRecord, CpuCounters]:
        flag = None
        try:
            cur = snapshot_cpu(self.stat_path)
            try:
                pct = cpu_percent(prev, cur)
            except NonMonotonicCounters as exc:
                log.warning("non-monotonic cpu counters: %s", exc)
                pct, flag = None, GAP
        except CounterSourceUnavailable as exc:
            log.warning("cpu snapshot failed: %s", exc)
            cur = CpuCounters(prev.per_core, prev.aggregate, time.monotonic_ns())
            pct, flag = None, GAP
        rss = None
        pid = self.workload_pid
        if pid is not None:
            try:
                rss = self._rss_reader(pid)
            except ProcessGone:
                rss = None
        return SampleRecord(cur.captured_at, pct, rss, flag), cur

    def run(self, stop_signal: Optional[threading.Event] = None) -> SampleLog:
        """Blocking sampling loop; returns the log once ``stop_signal`` is set."""
        stop = stop_signal if stop_signal is not None else self._stop
        interval = self.interval_ns
        anchor = (time.time_ns(), time.monotonic_ns())
        prev = snapshot_cpu(self.stat_path)
        start = prev.captured_at
        self.started_at = start
        self.started.set()
        samples = SampleLog(interval_ns=interval, wall_clock_anchor=anchor)
        k = 1
        last_t = start
        while not stop.is_set():
            wait_ns = start + k * interval - time.monotonic_ns()
            if wait_ns > 0 and stop.wait(wait_ns / 1e9):
                break
            rec, prev = self._sample(prev)
            if rec.t <= last_t:
                continue
            if rec.t - last_t > 2 * interval and rec.flag is None:
                rec = SampleRecord(rec.t, rec.cpu_pct, rec.workload_rss_bytes, STALL)
            samples.records.append(rec)
            last_t = rec.t
            # after a stall, skip the missed ticks instead of bursting
            k = max(k + 1, (rec.t - start) // interval + 1)
        return samples

    def start(self) -> None:
        """Run the loop in a background thread; returns once the first snapshot is taken."""
        if self._thread is not None:
            raise RuntimeError("sampler already started")

        def target():
            try:
                self._log = self.run(self._stop)
            except BaseException as exc:  # handed to stop()
                self._error = exc
                self.started.set()

        self._thread = threading.Thread(target=target, name="edgebench-sampler",
                                        daemon=True)
        self._thread.start()
        self.started.wait()
        if self._error is not None:
            raise self._error

    def stop(self) -> SampleLog:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
        if self._error is not None:
            raise self._error
        assert self._log is not None
        return self._log


def run_sampler(interval_ns: int = DEFAULT_INTERVAL_NS,
                workload_pid: Optional[int] = None,
                stop_signal: Optional[threading.Event] = None) -> SampleLog:
    """Sample until ``stop_signal`` is set and return the ordered log."""
    if stop_signal is None:
        raise ValueError("run_sampler needs a stop_signal to terminate")
    return Sampler(interval_ns, workload_pid).run(stop_signal)
