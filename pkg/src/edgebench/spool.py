"""Store-and-forward delivery of files from an inbox directory to a sink.

Files that land in the inbox (typically deposited by an FTP daemon) are
picked up once stable, checksummed with SHA-256, recorded in an append-only
journal, and forwarded with exponential backoff. Delivery is at-least-once;
sinks deduplicate by checksum, so the sink ends up with one copy per file.
Sources are deleted only after a successful delivery plus a retention
delay; files that exhaust their retries stay in the inbox.

Journal format: line-delimited JSON. The first line is a header
``{"format": "edgebench-spool-journal", "version": 1}``; every later line is
a full snapshot of one entry after a state transition, so replay is "last
record per entry id wins".
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import random
import shutil
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Protocol

from .errors import (ChecksumMismatchAtSink, DirUnreadable, JournalWriteFailed,
                     ReadFailed, SinkUnreachable, SpoolError)

log = logging.getLogger(__name__)

JOURNAL_FORMAT = "edgebench-spool-journal"
JOURNAL_VERSION = 1
DIGEST_HEADER = "X-Content-SHA256"
TEMP_SUFFIXES = (".tmp", ".part", ".partial", ".filepart", "~")


class State(str, enum.Enum):
    PENDING = "Pending"
    IN_FLIGHT = "InFlight"
    ACKED = "Acked"
    FAILED = "Failed"


@dataclass
class SpoolEntry:
    entry_id: str
    source_path: str
    size_bytes: int
    checksum: str
    state: State = State.PENDING
    attempts: int = 0
    first_seen: float = 0.0
    last_attempt: Optional[float] = None
    next_eligible: float = 0.0
    mtime_ns: int = 0
    source_removed: bool = False
    last_error: Optional[str] = None


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 8
    base_backoff: float = 2.0
    multiplier: float = 2.0
    jitter: float = 0.1

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if not self.base_backoff > 0 or not self.multiplier > 0:
            raise ValueError("backoff must be positive")
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter must be in [0, 1)")

    def delay(self, attempts: int, rng: random.Random) -> float:
        """Wait before the next try after ``attempts`` failed tries."""
        base = self.base_backoff * self.multiplier ** (attempts - 1)
        return base * (1 + self.jitter * rng.uniform(-1.0, 1.0))


@dataclass(frozen=True)
class SinkConfig:
    kind: str = "directory-copy"  # or "http-put"
    target: str = ""
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    retain_after_ack: float = 0.0

    def __post_init__(self):
        if self.kind not in ("directory-copy", "http-put"):
            raise ValueError(f"unknown sink kind {self.kind!r}")
        if not self.target:
            raise ValueError("sink target must be set")
        if self.retain_after_ack < 0:
            raise ValueError("retain_after_ack must be >= 0")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def object_name(source_path, checksum: str) -> str:
    return f"{Path(source_path).name}.{checksum[:8]}"


# ---------------------------------------------------------------- sinks

class Sink(Protocol):
    def put(self, source_path: str, checksum: str) -> None: ...


class DirectorySink:
    """Copies into ``<target>/<basename>.<checksum-prefix-8>``, verified by re-checksum."""

    def __init__(self, target):
        self.target = Path(target)

    def put(self, source_path: str, checksum: str) -> None:
        name = object_name(source_path, checksum)
        dest = self.target / name
        tmp = self.target / f".{name}.partial"
        try:
            self.target.mkdir(parents=True, exist_ok=True)
            if dest.exists() and sha256_file(dest) == checksum:
                return  # delivered by an earlier attempt
            shutil.copyfile(source_path, tmp)
            with open(tmp, "rb") as f:
                os.fsync(f.fileno())
            got = sha256_file(tmp)
            if got != checksum:
                tmp.unlink()
                raise ChecksumMismatchAtSink(f"{name}: sink copy has checksum {got}")
            os.replace(tmp, dest)
        except OSError as exc:
            raise SinkUnreachable(f"directory sink {self.target}: {exc}") from exc

    def objects(self) -> list[Path]:
        if not self.target.exists():
            return []
        return sorted(p for p in self.target.iterdir()
                      if p.is_file() and not p.name.startswith("."))


class HttpSink:
    """PUT ``<url>/<object name>`` with the SHA-256 in a header; the server echoes it to ack."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url.rstrip("/")
        self.timeout = timeout

    def put(self, source_path: str, checksum: str) -> None:
        url = f"{self.url}/{urllib.request.quote(object_name(source_path, checksum))}"
        try:
            with open(source_path, "rb") as f:
                body = f.read()
        except OSError as exc:
            raise SinkUnreachable(f"cannot read {source_path}: {exc}") from exc
        req = urllib.request.Request(url, data=body, method="PUT",
                                     headers={DIGEST_HEADER: checksum,
                                              "Content-Type": "application/octet-stream"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                status = resp.status
                echoed = resp.headers.get(DIGEST_HEADER)
        except urllib.error.HTTPError as exc:
            raise SinkUnreachable(f"PUT {url}: HTTP {exc.code}") from exc
        except (urllib.error.URLError, OSError) as exc:
            raise SinkUnreachable(f"PUT {url}: {exc}") from exc
        if not 200 <= status < 300:
            raise SinkUnreachable(f"PUT {url}: HTTP {status}")
        if echoed != checksum:
            raise ChecksumMismatchAtSink(f"PUT {url}: sink acknowledged digest {echoed!r}")


def make_sink(cfg: SinkConfig) -> Sink:
    if cfg.kind == "directory-copy":
        return DirectorySink(cfg.target)
    return HttpSink(cfg.target)


# ---------------------------------------------------------------- journal

def _entry_record(entry: SpoolEntry, event: str, ts: float) -> dict:
    rec = asdict(entry)
    rec["state"] = entry.state.value
    rec["event"] = event
    rec["ts"] = ts
    return rec


class Journal:
    """Append-only, fsynced journal of entry snapshots."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if self.path.exists():
                self._drop_torn_tail()
            if not self.path.exists() or self.path.stat().st_size == 0:
                with open(self.path, "w") as f:
                    f.write(json.dumps({"format": JOURNAL_FORMAT, "version": JOURNAL_VERSION}) + "\n")
                    f.flush()
                    os.fsync(f.fileno())
            else:
                self._check_header()
        except OSError as exc:
            raise JournalWriteFailed(f"cannot initialise journal {self.path}: {exc}") from exc

    def _check_header(self) -> None:
        with open(self.path) as f:
            try:
                header = json.loads(f.readline())
            except json.JSONDecodeError:
                header = {}
        if not isinstance(header, dict) or header.get("format") != JOURNAL_FORMAT or header.get("version") != JOURNAL_VERSION:
            raise SpoolError(f"{self.path}: not a version {JOURNAL_VERSION} spool journal")

    def _drop_torn_tail(self) -> None:
        # a crash mid-append leaves a partial last line; cut it so the next
        # record does not glue onto it
        with open(self.path, "rb+") as f:
            data = f.read()
            if data.endswith(b"\n"):
                return
            keep = data.rfind(b"\n") + 1
            log.warning("%s: truncating torn final record", self.path)
            f.truncate(keep)
            os.fsync(f.fileno())

    def append(self, entry: SpoolEntry, event: str) -> None:
        line = json.dumps(_entry_record(entry, event, time.time()), sort_keys=True) + "\n"
        with self._lock:
            try:
                with open(self.path, "a") as f:
                    f.write(line)
                    f.flush()
                    os.fsync(f.fileno())
            except OSError as exc:
                raise JournalWriteFailed(f"journal {self.path}: {exc}") from exc

    @staticmethod
    def replay(path) -> dict[str, SpoolEntry]:
        """Fold the journal into current entries; in-flight entries come back as Pending."""
        path = Path(path)
        entries: dict[str, SpoolEntry] = {}
        if not path.exists():
            return entries
        with open(path) as f:
            lines = f.read().splitlines()
        for n, line in enumerate(lines[1:], start=2):
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                if n == len(lines):
                    log.warning("%s: ignoring torn final line", path)
                    continue
                raise SpoolError(f"{path}:{n}: corrupt journal record")
            rec.pop("event", None)
            rec.pop("ts", None)
            rec["state"] = State(rec["state"])
            entries[rec["entry_id"]] = SpoolEntry(**rec)
        for eid, e in entries.items():
            if e.state == State.IN_FLIGHT:
                entries[eid] = replace(e, state=State.PENDING, next_eligible=0.0)
        return entries


# ---------------------------------------------------------------- spooler

def _is_temp_name(name: str) -> bool:
    return name.startswith(".") or name.endswith(TEMP_SUFFIXES)


def _entry_id(path: str, checksum: str) -> str:
    return hashlib.sha256(f"{path}\0{checksum}".encode()).hexdigest()[:16]


class Spooler:
    def __init__(self, inbox, sink_config: SinkConfig, journal_path,
                 sink: Optional[Sink] = None, stability_interval: float = 2.0,
                 scan_interval: float = 10.0, workers: int = 1,
                 rng: Optional[random.Random] = None, clock=time.time):
        self.inbox = Path(inbox).resolve()
        journal_path = Path(journal_path).resolve()
        if self.inbox == journal_path.parent or self.inbox in journal_path.parents:
            raise ValueError("the journal must live outside the inbox")
        self.config = sink_config
        self.sink = sink if sink is not None else make_sink(sink_config)
        self.stability_interval = stability_interval
        self.scan_interval = scan_interval
        self.workers = max(1, workers)
        self.rng = rng or random.Random()
        self.clock = clock
        self.journal = Journal(journal_path)
        self.entries = Journal.replay(journal_path)
        for e in self.entries.values():
            if e.state == State.PENDING and e.attempts:
                log.info("resuming %s (%d attempts so far)", e.source_path, e.attempts)
        self._observed: dict[str, tuple[int, int, float]] = {}
        self._lock = threading.Lock()

    # -- pickup

    def _known(self, path: str, size: int, mtime_ns: int) -> bool:
        return any(e.source_path == path and e.size_bytes == size and e.mtime_ns == mtime_ns
                   for e in self.entries.values())

    def scan_inbox(self) -> list[str]:
        """Stable, not-yet-spooled files in the inbox.

        A file is stable once its mtime is at least ``stability_interval``
        old (as for files renamed into place), or once size and mtime were
        unchanged across scans that far apart.
        """
        now = self.clock()
        try:
            listing = list(os.scandir(self.inbox))
        except OSError as exc:
            raise DirUnreadable(f"cannot list {self.inbox}: {exc}") from exc
        candidates, seen = [], set()
        for de in sorted(listing, key=lambda d: d.name):
            if _is_temp_name(de.name):
                continue
            try:
                if not de.is_file(follow_symlinks=False):
                    continue
                st = de.stat(follow_symlinks=False)
            except OSError:
                continue
            path = de.path
            seen.add(path)
            if self._known(path, st.st_size, st.st_mtime_ns):
                continue
            prev = self._observed.get(path)
            if prev is None or prev[:2] != (st.st_size, st.st_mtime_ns):
                self._observed[path] = (st.st_size, st.st_mtime_ns, now)
                prev = self._observed[path]
            settled = now - st.st_mtime_ns / 1e9 >= self.stability_interval
            unchanged = now - prev[2] >= self.stability_interval
            if settled or unchanged:
                candidates.append(path)
        for path in list(self._observed):
            if path not in seen:
                del self._observed[path]
        return candidates

    def enqueue(self, path) -> SpoolEntry:
        path = str(path)
        try:
            st = os.stat(path)
            checksum = sha256_file(path)
        except OSError as exc:
            raise ReadFailed(f"cannot read {path}: {exc}") from exc
        eid = _entry_id(path, checksum)
        with self._lock:
            existing = self.entries.get(eid)
            if existing is not None:
                return existing
            entry = SpoolEntry(eid, path, st.st_size, checksum, State.PENDING,
                               first_seen=self.clock(), mtime_ns=st.st_mtime_ns)
            self.journal.append(entry, "enqueued")
            self.entries[eid] = entry
        self._observed.pop(path, None)
        return entry

    # -- delivery

    def _transition(self, entry: SpoolEntry, event: str, **changes) -> SpoolEntry:
        new = replace(entry, **changes)
        with self._lock:
            self.journal.append(new, event)
            self.entries[new.entry_id] = new
        return new

    def forward(self, entry: SpoolEntry) -> SpoolEntry:
        if entry.state != State.PENDING:
            raise SpoolError(f"{entry.source_path}: cannot forward an entry in state {entry.state.value}")
        now = self.clock()
        entry = self._transition(entry, "attempt", state=State.IN_FLIGHT,
                                 attempts=entry.attempts + 1, last_attempt=now)
        try:
            self.sink.put(entry.source_path, entry.checksum)
        except (SinkUnreachable, ChecksumMismatchAtSink) as exc:
            policy = self.config.retry
            if entry.attempts >= policy.max_attempts:
                log.error("%s: giving up after %d attempts: %s",
                          entry.source_path, entry.attempts, exc)
                return self._transition(entry, "failed", state=State.FAILED, last_error=str(exc))
            wait = policy.delay(entry.attempts, self.rng)
            log.info("%s: attempt %d failed (%s); retry in %.2fs",
                     entry.source_path, entry.attempts, exc, wait)
            return self._transition(entry, "retry", state=State.PENDING,
                                    next_eligible=self.clock() + wait, last_error=str(exc))
        return self._transition(entry, "acked", state=State.ACKED, last_error=None)

    def due(self) -> list[SpoolEntry]:
        now = self.clock()
        return sorted((e for e in self.entries.values()
                       if e.state == State.PENDING and e.next_eligible <= now),
                      key=lambda e: (e.next_eligible, e.first_seen, e.source_path))

    def cleanup(self) -> int:
        """Delete Acked sources whose retention has elapsed; returns how many."""
        now = self.clock()
        removed = 0
        for e in list(self.entries.values()):
            if e.state != State.ACKED or e.source_removed:
                continue
            if now - (e.last_attempt or 0.0) < self.config.retain_after_ack:
                continue
            try:
                st = os.stat(e.source_path)
                # a different file now sits at this path; leave it for pickup
                if (st.st_size, st.st_mtime_ns) == (e.size_bytes, e.mtime_ns):
                    os.unlink(e.source_path)
                    removed += 1
            except FileNotFoundError:
                pass
            self._transition(e, "removed", source_removed=True)
        return removed

    def step(self) -> int:
        """One scan/enqueue/forward/cleanup cycle; returns the amount of work done."""
        work = 0
        for path in self.scan_inbox():
            try:
                self.enqueue(path)
                work += 1
            except ReadFailed as exc:
                log.warning("%s", exc)
        batch = self.due()
        if batch:
            if self.workers == 1:
                for e in batch:
                    self.forward(e)
            else:
                with ThreadPoolExecutor(self.workers) as pool:
                    list(pool.map(self.forward, batch))
            work += len(batch)
        work += self.cleanup()
        return work

    def idle(self) -> bool:
        """Nothing queued, nothing waiting to stabilise or to be cleaned up."""
        if self._observed:
            return False
        for e in self.entries.values():
            if e.state in (State.PENDING, State.IN_FLIGHT):
                return False
            if e.state == State.ACKED and not e.source_removed:
                return False
        return True

    def _next_wakeup(self) -> float:
        now = self.clock()
        wake = self.scan_interval
        for e in self.entries.values():
            if e.state == State.PENDING:
                wake = min(wake, max(0.0, e.next_eligible - now))
            elif e.state == State.ACKED and not e.source_removed:
                wake = min(wake, max(0.0, (e.last_attempt or 0.0) + self.config.retain_after_ack - now))
        if self._observed:
            wake = min(wake, self.stability_interval)
        return wake

    def summary(self) -> dict[str, int]:
        counts = {s.value: 0 for s in State}
        for e in self.entries.values():
            counts[e.state.value] += 1
        counts["removed"] = sum(e.source_removed for e in self.entries.values())
        return counts

    def run(self, stop_signal: Optional[threading.Event] = None,
            until_idle: bool = False) -> dict[str, int]:
        """Loop until ``stop_signal`` is set (or, with ``until_idle``, until quiescent)."""
        stop = stop_signal or threading.Event()
        while not stop.is_set():
            self.step()
            if until_idle and self.idle():
                break
            stop.wait(self._next_wakeup())
        return self.summary()


def run_spooler(inbox, sink: SinkConfig, stop_signal: threading.Event,
                journal_path=None, **kwargs) -> dict[str, int]:
    """Run a spooler over ``inbox`` until ``stop_signal``; returns counts by state."""
    if journal_path is None:
        journal_path = Path(inbox).resolve().parent / f".{Path(inbox).name}.journal"
    return Spooler(inbox, sink, journal_path, **kwargs).run(stop_signal)
