"""Repeated, idle-padded execution of a workload command.

Each repetition is: optional pre-run hook, an idle pre-pad with the sampler
running, the workload run to completion, an idle post-pad, then the sampler
is stopped. The workload may report per-item boundaries on stdout with the
marker lines ``EDGEOPS:ITEM:<j>:START`` / ``EDGEOPS:ITEM:<j>:END``.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import logging
import os
import re
import subprocess
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .errors import HookFailed, PlanError, WorkloadSpawnFailed
from .sampler import SampleLog, Sampler

log = logging.getLogger(__name__)

MARKER_RE = re.compile(r"EDGEOPS:ITEM:(\d+):(START|END)")

# RunRecord.status values
OK = "ok"
NONZERO_EXIT = "nonzero_exit"
SPAWN_FAILED = "spawn_failed"
HOOK_FAILED = "hook_failed"


@dataclass
class WorkloadSpec:
    command: str
    args: list[str] = field(default_factory=list)
    env: dict[str, str] = field(default_factory=dict)
    working_dir: Optional[str] = None
    input_manifest: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.command:
            raise PlanError("workload command must be non-empty")


@dataclass
class BenchmarkPlan:
    workload: WorkloadSpec
    batch_size: int = 100
    repetitions: int = 10
    padding_seconds: float = 30.0
    sampling_interval: float = 1.0
    pre_run_hook: Optional[str] = None
    device_label: str = "local"

    def __post_init__(self):
        if self.batch_size < 1:
            raise PlanError("batch_size must be >= 1")
        if self.repetitions < 1:
            raise PlanError("repetitions must be >= 1")
        if self.padding_seconds < 0:
            raise PlanError("padding_seconds must be >= 0")
        if not self.sampling_interval > 0:
            raise PlanError("sampling_interval must be > 0")
        manifest = self.workload.input_manifest
        if manifest and len(manifest) != self.batch_size:
            raise PlanError(
                f"input_manifest has {len(manifest)} items, batch_size is {self.batch_size}")

    def to_dict(self) -> dict:
        return asdict(self)

    def plan_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


class Phase(str, enum.Enum):
    PRE_PAD = "PrePad"
    ACTIVE = "Active"
    POST_PAD = "PostPad"


@dataclass(frozen=True)
class PhaseWindow:
    phase: Phase
    start: int
    end: int

    @property
    def duration_ns(self) -> int:
        return self.end - self.start

    def contains(self, t: int) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True)
class ItemMark:
    item_index: int
    start: int
    end: int
    peak_rss_bytes: Optional[int] = None

    @property
    def duration_ns(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class RunRecord:
    run_index: int
    windows: tuple[PhaseWindow, ...]
    samples: SampleLog
    item_marks: tuple[ItemMark, ...] = ()
    workload_exit: Optional[int] = None
    stdout_log: Optional[str] = None
    stderr_log: Optional[str] = None
    status: str = OK
    warnings: tuple[str, ...] = ()

    def window(self, phase: Phase) -> Optional[PhaseWindow]:
        for w in self.windows:
            if w.phase == phase:
                return w
        return None

    @property
    def completed(self) -> bool:
        return self.status in (OK, NONZERO_EXIT) and len(self.windows) == 3

    @property
    def flagged(self) -> bool:
        return self.status != OK


class MarkerParser:
    """Incremental pairing of START/END marker lines.

    Unmatched, duplicated, or out-of-order markers are dropped with a
    warning; any other line is ignored.
    """

    def __init__(self):
        self.marks: list[ItemMark] = []
        self.warnings: list[str] = []
        self._open: Optional[tuple[int, int]] = None
        self._last_index = -1

    def feed(self, line: Union[str, bytes], t: int) -> None:
        if isinstance(line, bytes):
            line = line.decode("utf-8", errors="replace")
        m = MARKER_RE.fullmatch(line.rstrip("\r\n"))
        if m is None:
            return
        j, what = int(m.group(1)), m.group(2)
        if what == "START":
            if self._open is not None:
                self._warn(f"item {self._open[0]}: START without END")
            if j <= self._last_index:
                self._warn(f"item {j}: START out of order (after item {self._last_index})")
                self._open = None
                return
            self._open = (j, t)
        else:
            if self._open is None or self._open[0] != j:
                self._warn(f"item {j}: END without matching START")
                return
            self.marks.append(ItemMark(j, self._open[1], t))
            self._last_index = j
            self._open = None

    def finish(self) -> list[ItemMark]:
        if self._open is not None:
            self._warn(f"item {self._open[0]}: START without END")
            self._open = None
        return list(self.marks)

    def _warn(self, msg: str) -> None:
        log.warning("marker: %s", msg)
        self.warnings.append(msg)


def parse_markers(stream: Iterable[Union[str, bytes]], clock=time.monotonic_ns,
                  warnings: Optional[list[str]] = None) -> list[ItemMark]:
    """Pair marker lines from ``stream``, timestamping each line as it is read."""
    parser = MarkerParser()
    for line in stream:
        parser.feed(line, clock())
    marks = parser.finish()
    if warnings is not None:
        warnings.extend(parser.warnings)
    return marks


def _sleep_until(deadline_ns: int) -> None:
    while True:
        remaining = deadline_ns - time.monotonic_ns()
        if remaining <= 0:
            return
        time.sleep(remaining / 1e9)


def _run_hook(hook: str) -> None:
    try:
        proc = subprocess.run(hook, shell=True, stdin=subprocess.DEVNULL,
                              capture_output=True, text=True)
    except OSError as exc:
        raise HookFailed(f"pre-run hook could not start: {exc}") from exc
    if proc.returncode != 0:
        raise HookFailed(
            f"pre-run hook exited with {proc.returncode}: {proc.stderr.strip()[-500:]}")


def _peak_between(samples: SampleLog, start: int, end: int) -> Optional[int]:
    values = [r.workload_rss_bytes for r in samples.records
              if start <= r.t <= end and r.workload_rss_bytes is not None]
    return max(values) if values else None


def _workload_env(plan: BenchmarkPlan, run_dir: Path) -> dict[str, str]:
    env = dict(os.environ)
    env.update(plan.workload.env)
    env["EDGEBENCH_BATCH_SIZE"] = str(plan.batch_size)
    if plan.workload.input_manifest:
        manifest = run_dir / "manifest.txt"
        manifest.write_text("".join(f"{item}\n" for item in plan.workload.input_manifest))
        env["EDGEBENCH_MANIFEST"] = str(manifest)
    return env


def execute_repetition(plan: BenchmarkPlan, run_index: int,
                       run_dir: Union[str, Path, None] = None) -> RunRecord:
    """Run one padded repetition and return its record.

    Raises HookFailed or WorkloadSpawnFailed with the partial record attached
    as ``exc.record``; a non-zero workload exit is recorded, not raised.
    """
    run_dir = Path(run_dir) if run_dir is not None else Path(tempfile.mkdtemp(prefix="edgebench-run-"))
    run_dir.mkdir(parents=True, exist_ok=True)
    interval_ns = int(round(plan.sampling_interval * 1e9))
    pad_ns = int(round(plan.padding_seconds * 1e9))
    stdout_path = run_dir / "stdout.log"
    stderr_path = run_dir / "stderr.log"

    if plan.pre_run_hook:
        try:
            _run_hook(plan.pre_run_hook)
        except HookFailed as exc:
            exc.record = RunRecord(run_index, (), SampleLog(interval_ns),
                                   status=HOOK_FAILED, warnings=(str(exc),))
            write_run_artifacts(exc.record, run_dir)
            raise

    env = _workload_env(plan, run_dir)
    argv = [plan.workload.command, *plan.workload.args]
    parser = MarkerParser()
    sampler = Sampler(interval_ns)
    sampler.start()
    proc = None
    try:
        pre_start = time.monotonic_ns()
        _sleep_until(pre_start + pad_ns)
        pre_end = time.monotonic_ns()

        with open(stdout_path, "wb") as out, open(stderr_path, "wb") as err:
            act_start = time.monotonic_ns()
            try:
                proc = subprocess.Popen(argv, stdin=subprocess.DEVNULL,
                                        stdout=subprocess.PIPE, stderr=err,
                                        cwd=plan.workload.working_dir, env=env)
            except OSError as exc:
                act_end = time.monotonic_ns()
                samples = sampler.stop()
                windows = (PhaseWindow(Phase.PRE_PAD, pre_start, pre_end),
                           PhaseWindow(Phase.ACTIVE, act_start, act_end))
                record = RunRecord(run_index, windows, samples,
                                   stdout_log=str(stdout_path), stderr_log=str(stderr_path),
                                   status=SPAWN_FAILED, warnings=(str(exc),))
                write_run_artifacts(record, run_dir)
                raise WorkloadSpawnFailed(f"cannot spawn {argv[0]!r}: {exc}", record) from exc
            sampler.workload_pid = proc.pid

            def read_stdout():
                for raw in iter(proc.stdout.readline, b""):
                    t = time.monotonic_ns()
                    out.write(raw)
                    parser.feed(raw, t)
                proc.stdout.close()

            reader = threading.Thread(target=read_stdout, name="edgebench-stdout",
                                      daemon=True)
            reader.start()
            exit_code = proc.wait()
            act_end = time.monotonic_ns()
            sampler.workload_pid = None

            post_start = act_end
            _sleep_until(post_start + pad_ns)
            post_end = time.monotonic_ns()
            reader.join()
        samples = sampler.stop()
    except KeyboardInterrupt:
        # operator abort voids the run
        if proc is not None and proc.poll() is None:
            proc.kill()
            proc.wait()
        sampler.stop()
        raise

    windows = (PhaseWindow(Phase.PRE_PAD, pre_start, pre_end),
               PhaseWindow(Phase.ACTIVE, act_start, act_end),
               PhaseWindow(Phase.POST_PAD, post_start, post_end))
    paired = parser.finish()
    warnings = list(parser.warnings)
    marks = []
    for m in paired:
        if m.item_index >= plan.batch_size:
            warnings.append(f"item {m.item_index}: index beyond batch size {plan.batch_size}")
            continue
        # lines are timestamped on receipt; a trailing END can be read after
        # the exit was observed, but was necessarily written while alive
        start = min(max(m.start, act_start), act_end)
        end = min(max(m.end, start), act_end)
        marks.append(ItemMark(m.item_index, start, end, _peak_between(samples, start, end)))

    status = OK if exit_code == 0 else NONZERO_EXIT
    if status != OK:
        log.warning("run %d: workload exited with status %d", run_index, exit_code)
    record = RunRecord(run_index, windows, samples, tuple(marks), exit_code,
                       str(stdout_path), str(stderr_path), status, tuple(warnings))
    write_run_artifacts(record, run_dir)
    return record


def run_plan(plan: BenchmarkPlan, out_dir: Union[str, Path, None] = None) -> list[RunRecord]:
    """Execute every repetition of ``plan``; always returns exactly R records.

    Artifacts go to ``<out_dir>/runs/<plan-hash>/<run-index>/``.
    """
    if out_dir is None:
        out_dir = tempfile.mkdtemp(prefix="edgebench-")
    root = plan_root(plan, out_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "plan.json").write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n")
    records = []
    for i in range(plan.repetitions):
        log.info("repetition %d/%d", i + 1, plan.repetitions)
        try:
            records.append(execute_repetition(plan, i, root / str(i)))
        except (HookFailed, WorkloadSpawnFailed) as exc:
            log.error("run %d aborted: %s", i, exc)
            records.append(exc.record)
    return records


def plan_root(plan: BenchmarkPlan, out_dir: Union[str, Path]) -> Path:
    return Path(out_dir) / "runs" / plan.plan_hash()


def write_run_artifacts(record: RunRecord, run_dir: Union[str, Path]) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "samples.csv").write_text(record.samples.to_csv())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["item_index", "start_ns", "end_ns", "peak_rss_bytes"])
    for m in record.item_marks:
        w.writerow([m.item_index, m.start, m.end,
                    "" if m.peak_rss_bytes is None else m.peak_rss_bytes])
    (run_dir / "marks.csv").write_text(buf.getvalue())
    meta = {
        "run_index": record.run_index,
        "status": record.status,
        "workload_exit": record.workload_exit,
        "interval_ns": record.samples.interval_ns,
        "wall_clock_anchor": list(record.samples.wall_clock_anchor),
        "windows": [{"phase": w.phase.value, "start": w.start, "end": w.end}
                    for w in record.windows],
        "warnings": list(record.warnings),
    }
    (run_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    for name in ("stdout.log", "stderr.log"):
        (run_dir / name).touch()


def load_run(run_dir: Union[str, Path]) -> RunRecord:
    """Rebuild a RunRecord from the artifacts written by ``write_run_artifacts``."""
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "meta.json").read_text())
    samples = SampleLog.from_csv((run_dir / "samples.csv").read_text(),
                                 interval_ns=meta["interval_ns"],
                                 wall_clock_anchor=tuple(meta["wall_clock_anchor"]))
    marks = []
    marks_path = run_dir / "marks.csv"
    if marks_path.exists():
        for row in csv.DictReader(io.StringIO(marks_path.read_text())):
            marks.append(ItemMark(int(row["item_index"]), int(row["start_ns"]), int(row["end_ns"]),
                                  int(row["peak_rss_bytes"]) if row["peak_rss_bytes"] else None))
    windows = tuple(PhaseWindow(Phase(w["phase"]), w["start"], w["end"]) for w in meta["windows"])
    return RunRecord(meta["run_index"], windows, samples, tuple(marks), meta["workload_exit"],
                     str(run_dir / "stdout.log"), str(run_dir / "stderr.log"),
                     meta["status"], tuple(meta.get("warnings", ())))


def load_runs(plan_dir: Union[str, Path]) -> list[RunRecord]:
    plan_dir = Path(plan_dir)
    dirs = sorted((p for p in plan_dir.iterdir() if p.is_dir() and p.name.isdigit()),
                  key=lambda p: int(p.name))
    return [load_run(d) for d in dirs]

