"""``edgebench`` command line.

Every configuration value can be overridden with a flag of the same dotted
name, e.g. ``--plan.padding_seconds 10`` or ``--spool.sink.retry.jitter=0``.

Exit codes: 0 success, 1 measurement or pipeline error, 2 configuration
error, 3 every benchmark run was excluded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import signal
import sys
import threading
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, report, shm, tdms
from .config import SCHEMA, CliConfig, load_config, parse_config
from .errors import AllRunsExcluded, ConfigError, EdgebenchError, InvalidValue
from .harness import Phase, PhaseWindow, plan_root, run_plan
from .metrics import summarize
from .sampler import SampleLog
from .spool import Spooler

log = logging.getLogger("edgebench")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_EXCLUDED = 0, 1, 2, 3

_COLORS = {"DEBUG": "36", "INFO": "32", "WARNING": "33", "ERROR": "31", "CRITICAL": "1;31"}


class _ColorFormatter(logging.Formatter):
    def format(self, record):
        text = super().format(record)
        code = _COLORS.get(record.levelname)
        return f"\033[{code}m{text}\033[0m" if code else text


def _setup_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    fmt = "%(levelname)s %(name)s: %(message)s"
    color = (sys.stderr.isatty() and not os.environ.get("EDGEBENCH_NO_COLOR")
             and not os.environ.get("NO_COLOR"))
    handler.setFormatter(_ColorFormatter(fmt) if color else logging.Formatter(fmt))
    root = logging.getLogger("edgebench")
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
    root.propagate = False


# ---------------------------------------------------------------- overrides

def _is_config_key(name: str) -> bool:
    node = SCHEMA
    for part in name.split("."):
        if not isinstance(node, dict) or part not in node:
            return False
        node = node[part]
    return True


def split_overrides(argv: Sequence[str]) -> tuple[list[str], list[tuple[str, str]]]:
    """Pull ``--dotted.key value`` pairs out of ``argv`` before argparse sees them.

    A flag counts as an override when it names a configuration key or
    contains a dot; unknown dotted names are kept so the strict parser can
    report them.
    """
    rest, overrides = [], []
    it = iter(argv)
    for tok in it:
        if tok.startswith("--") and len(tok) > 2:
            name, eq, value = tok[2:].partition("=")
            if "." in name or _is_config_key(name):
                if not eq:
                    value = next(it, None)
                    if value is None:
                        raise InvalidValue(name, "override flag needs a value")
                overrides.append((name, value))
                continue
        rest.append(tok)
    return rest, overrides


# ---------------------------------------------------------------- subcommands

def _write(path: Optional[str], data: bytes | str) -> None:
    if isinstance(data, str):
        data = data.encode()
    if path in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(data)


def cmd_bench(args, cfg: CliConfig) -> int:
    if cfg.plan is None:
        raise InvalidValue("plan", "bench needs a [plan] section")
    plan = cfg.plan
    out = args.out or cfg.output_dir
    root = plan_root(plan, out)
    log.info("plan %s: %d repetitions, %.0f s padding -> %s",
             plan.plan_hash(), plan.repetitions, plan.padding_seconds, root)
    runs = run_plan(plan, out)
    summary = summarize(runs, plan.device_label)
    for idx, reason in summary.excluded_runs:
        log.warning("run %d excluded: %s", idx, reason)
    (root / "summary.csv").write_bytes(report.emit_csv([summary]))
    (root / "summary.json").write_bytes(report.emit_json([summary]))
    sys.stdout.write(report.emit_table([summary]))
    log.info("summary written to %s", root)
    return EXIT_OK


def _cell(dtype: tdms.DataType, v) -> str:
    if dtype == tdms.DataType.TIMESTAMP:
        return tdms.Timestamp(int(v["seconds"]), int(v["fraction"])).to_datetime().isoformat()
    if dtype in (tdms.DataType.F32, tdms.DataType.F64):
        return repr(float(v))
    if dtype == tdms.DataType.BOOLEAN:
        return str(int(bool(v)))
    return str(v)


def cmd_tdms(args, cfg: CliConfig) -> int:
    model = tdms.read(args.file)
    if args.action == "ls":
        sys.stdout.write("\n".join(tdms.hierarchy(model)) + "\n")
        return EXIT_OK
    ch = model.group(args.group).channel(args.channel)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["index", ch.name])
    for i, v in enumerate(ch.samples):
        w.writerow([i, _cell(ch.dtype, v)])
    return EXIT_OK


def _window_len(args, cfg: CliConfig) -> int:
    if args.window is not None:
        return args.window
    if cfg.rms is not None:
        return cfg.rms.window_len
    raise InvalidValue("rms.window_len", "no RMS window length given (--window or [rms])")


def cmd_rms(args, cfg: CliConfig) -> int:
    window = _window_len(args, cfg)
    chunks = []
    for i, path in enumerate(args.files):
        rep = shm.file_points(path, window)
        log.info("%s: %d channels, sha256 %s", path, len(rep.points), rep.checksum[:12])
        chunks.append(rep.points_csv(header=(i == 0)))
    _write(args.out, "".join(chunks))
    return EXIT_OK


def cmd_detect(args, cfg: CliConfig) -> int:
    det_cfg = cfg.detector or shm.DetectorConfig()
    state = args.state or (cfg.rms.state_file if cfg.rms else None)
    points = []
    for path in args.inputs:
        if Path(path).suffix.lower() == ".tdms":
            rep = shm.file_points(path, _window_len(args, cfg))
            points.extend(p for pts in rep.points.values() for p in pts)
        else:
            points.extend(shm.points_from_csv(Path(path).read_text()))
    events = shm.detect_points(points, det_cfg, state)
    for e in events:
        log.warning("%s at %s: %.6g is %s than the expected %.6g (z=%.2f)",
                    e.channel_id, e.at.isoformat(), e.observed, e.direction, e.expected, e.score)
    _write(args.out, shm.events_to_csv(events))
    return EXIT_OK


def cmd_spool(args, cfg: CliConfig) -> int:
    if cfg.spool is None:
        raise InvalidValue("spool", "spool run needs a [spool] section")
    s = cfg.spool
    spooler = Spooler(s.inbox, s.sink, s.journal, scan_interval=s.scan_interval,
                      stability_interval=s.stability_interval, workers=s.workers)
    stop = threading.Event()
    if threading.current_thread() is threading.main_thread():
        for sig in (signal.SIGINT, signal.SIGTERM):
            signal.signal(sig, lambda *_: stop.set())
    counts = spooler.run(stop, until_idle=args.until_idle)
    sys.stdout.write(json.dumps(counts, sort_keys=True) + "\n")
    return EXIT_OK


def _load_summaries(paths: Sequence[str]):
    out = []
    for p in paths:
        data = Path(p).read_bytes()
        if Path(p).suffix.lower() == ".csv":
            out.extend(report.parse_csv(data))
        else:
            out.extend(report.load_json(data))
    return out


def _timeseries(path: Path, events_path: Optional[str]) -> bytes:
    text = path.read_text()
    header = text.split("\n", 1)[0]
    if header.startswith("t_ns"):
        meta_path = path.with_name("meta.json")
        windows: list[PhaseWindow] = []
        interval = None
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            windows = [PhaseWindow(Phase(w["phase"]), w["start"], w["end"])
                       for w in meta["windows"]]
            interval = meta.get("interval_ns")
        log_ = SampleLog.from_csv(text, **({"interval_ns": interval} if interval else {}))
        return report.emit_cpu_timeseries_svg(log_, windows)
    if header.startswith("channel_id,window_start"):
        points = shm.points_from_csv(text)
        if not points:
            return report.emit_series_svg({})
        t0 = min(p.window_start for p in points)
        series: dict[str, list[tuple[float, float]]] = {}
        for p in points:
            series.setdefault(p.channel_id, []).append(
                ((p.window_start - t0).total_seconds(), p.rms))
        markers: dict[str, list[tuple[float, float]]] = {}
        if events_path:
            with open(events_path, newline="") as f:
                for row in csv.DictReader(f):
                    at = datetime.fromisoformat(row["at"])
                    markers.setdefault(row["channel_id"], []).append(
                        ((at - t0).total_seconds(), float(row["observed"])))
        return report.emit_series_svg(series, "RMS", markers=markers)
    raise InvalidValue("report.timeseries", f"{path}: not a samples or RMS points CSV")


def cmd_report(args, cfg: CliConfig) -> int:
    if args.action == "timeseries":
        _write(args.out, _timeseries(Path(args.inputs[0]), args.events))
        return EXIT_OK
    summaries = _load_summaries(args.inputs)
    if args.action == "table":
        _write(args.out, report.emit_table(summaries))
    else:
        radar = report.normalize_radar(summaries)
        for label in radar.devices:
            log.info("%s: normalized %s area %.3f", label,
                     ", ".join(f"{v:.3f}" for v in radar.values[label]), radar.areas[label])
        _write(args.out, report.emit_radar_svg(radar))
    return EXIT_OK


def cmd_devices(args, cfg: CliConfig) -> int:
    for d in report.load_devices(args.registry):
        sys.stdout.write(f"{d.label}\t{d.soc}\t{d.cores} cores\t{d.clock_ghz:g} GHz\t"
                         f"{d.memory_gb:g} GB\t{d.notes}\n")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    # shared options are accepted before or after the subcommand; SUPPRESS keeps
    # a subparser from overwriting a value given at the top level
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", "-c", help="TOML configuration file")
    common.add_argument("--log-level", help="override EDGEBENCH_LOG and log_level")

    p = argparse.ArgumentParser(prog="edgebench", parents=[common],
                                description="Edge-device benchmarking and SHM data tools.")
    p.add_argument("--version", action="version", version=f"edgebench {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", parents=[common], help="run a benchmark plan")
    b.add_argument("--out", help="output directory (default: output_dir)")
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("tdms", parents=[common], help="inspect TDMS files")
    tsub = t.add_subparsers(dest="action", required=True)
    ls = tsub.add_parser("ls", parents=[common], help="list groups and channels")
    ls.add_argument("file")
    dump = tsub.add_parser("dump", parents=[common], help="channel samples as CSV")
    dump.add_argument("file")
    dump.add_argument("group")
    dump.add_argument("channel")
    t.set_defaults(func=cmd_tdms)

    r = sub.add_parser("rms", parents=[common], help="windowed RMS of TDMS channels")
    r.add_argument("files", nargs="+", metavar="FILE")
    r.add_argument("--window", type=int, help="samples per window (default: rms.window_len)")
    r.add_argument("--out", help="points CSV (default: stdout)")
    r.set_defaults(func=cmd_rms)

    d = sub.add_parser("detect", parents=[common], help="z-score anomalies over RMS points")
    d.add_argument("inputs", nargs="+", metavar="INPUT", help="points CSV or TDMS file")
    d.add_argument("--window", type=int, help="RMS window for TDMS inputs")
    d.add_argument("--state", help="detector state file (default: rms.state_file)")
    d.add_argument("--out", help="events CSV (default: stdout)")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("spool", parents=[common], help="store-and-forward uploads")
    ssub = s.add_subparsers(dest="action", required=True)
    run = ssub.add_parser("run", parents=[common], help="forward inbox files to the sink")
    run.add_argument("--until-idle", action="store_true",
                     help="exit once the inbox is drained instead of running forever")
    s.set_defaults(func=cmd_spool)

    rp = sub.add_parser("report", parents=[common], help="tables and plots")
    rsub = rp.add_subparsers(dest="action", required=True)
    for name, helptext in (("table", "mean +/- std table"), ("radar", "radar SVG"),
                           ("timeseries", "CPU or RMS time series SVG")):
        a = rsub.add_parser(name, parents=[common], help=helptext)
        a.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="FILE")
        a.add_argument("--out", help="output file (default: stdout)")
        if name == "timeseries":
            a.add_argument("--events", help="events CSV to mark on an RMS plot")
    rp.set_defaults(func=cmd_report)

    dv = sub.add_parser("devices", parents=[common], help="device registry")
    dsub = dv.add_subparsers(dest="action", required=True)
    dl = dsub.add_parser("ls", parents=[common], help="list known devices")
    dl.add_argument("--registry", help="devices TOML (default: bundled)")
    dv.set_defaults(func=cmd_devices)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_logging(os.environ.get("EDGEBENCH_LOG", "INFO"))
    try:
        argv, overrides = split_overrides(argv)
        args = build_parser().parse_args(argv)
        args.config = getattr(args, "config", None)
        args.log_level = getattr(args, "log_level", None)
        if args.config:
            cfg = load_config(args.config, overrides)
        else:
            cfg = parse_config(b"", overrides)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read configuration: %s", exc)
        return EXIT_CONFIG

    level = args.log_level or os.environ.get("EDGEBENCH_LOG") or cfg.log_level
    _setup_logging(level)
    try:
        return args.func(args, cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except AllRunsExcluded as exc:
        log.error("%s", exc)
        return EXIT_EXCLUDED
    except BrokenPipeError:
        # reader went away (e.g. `| head`); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except (EdgebenchError, OSError, ValueError, KeyError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
