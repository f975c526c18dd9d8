"""Strict TOML configuration shared by all subcommands.

Unknown keys are rejected: a misspelt ``padding_seconds`` would otherwise
silently fall back to its default and invalidate every CPU delta.

Example::

    output_dir = "out"
    log_level = "INFO"

    [plan]
    repetitions = 10
    padding_seconds = 30
    device_label = "Raspberry Pi 4"

    [plan.workload]
    command = "python3"
    args = ["inference.py"]

    [rms]
    window_len = 1000

    [detector]
    z_threshold = 3.0

    [spool]
    inbox = "/srv/ftp/incoming"
    journal = "/var/lib/edgebench/spool.journal"

    [spool.sink]
    kind = "directory-copy"
    target = "/mnt/upload"
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import ConfigSyntaxError, InvalidValue, PlanError, UnknownKey
from .harness import BenchmarkPlan, WorkloadSpec
from .shm import DetectorConfig
from .spool import RetryPolicy, SinkConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _str(v):
    return isinstance(v, str)


def _int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _str_list(v):
    return isinstance(v, list) and all(isinstance(x, str) for x in v)


def _str_map(v):
    return isinstance(v, dict) and all(isinstance(x, str) for x in v.values())


# key -> (predicate, description) or a nested schema dict
SCHEMA: dict[str, Any] = {
    "output_dir": (_str, "a path string"),
    "log_level": (lambda v: _str(v) and v.upper() in LOG_LEVELS, f"one of {LOG_LEVELS}"),
    "plan": {
        "workload": {
            "command": (_str, "a string"),
            "args": (_str_list, "a list of strings"),
            "env": (_str_map, "a table of strings"),
            "working_dir": (_str, "a path string"),
            "input_manifest": (_str_list, "a list of strings"),
        },
        "batch_size": (_int, "an integer"),
        "repetitions": (_int, "an integer"),
        "padding_seconds": (_num, "a number of seconds"),
        "sampling_interval": (_num, "a number of seconds"),
        "pre_run_hook": (_str, "a command string"),
        "device_label": (_str, "a string"),
    },
    "rms": {
        "window_len": (_int, "an integer"),
        "state_file": (_str, "a path string"),
    },
    "detector": {
        "trailing_window": (_int, "an integer"),
        "z_threshold": (_num, "a number"),
        "min_history": (_int, "an integer"),
        "absolute_floor": (_num, "a number"),
    },
    "spool": {
        "inbox": (_str, "a path string"),
        "journal": (_str, "a path string"),
        "scan_interval": (_num, "a number of seconds"),
        "stability_interval": (_num, "a number of seconds"),
        "workers": (_int, "an integer"),
        "sink": {
            "kind": (lambda v: v in ("directory-copy", "http-put"),
                     "'directory-copy' or 'http-put'"),
            "target": (_str, "a path or URL"),
            "retain_after_ack": (_num, "a number of seconds"),
            "retry": {
                "max_attempts": (_int, "an integer"),
                "base_backoff": (_num, "a number of seconds"),
                "multiplier": (_num, "a number"),
                "jitter": (_num, "a number"),
            },
        },
    },
}


@dataclass
class RmsConfig:
    window_len: int
    state_file: Optional[str] = None


@dataclass
class SpoolConfig:
    inbox: str
    journal: str
    sink: SinkConfig
    scan_interval: float = 10.0
    stability_interval: float = 2.0
    workers: int = 1


@dataclass
class CliConfig:
    plan: Optional[BenchmarkPlan] = None
    rms: Optional[RmsConfig] = None
    detector: Optional[DetectorConfig] = None
    spool: Optional[SpoolConfig] = None
    output_dir: str = "."
    log_level: str = "INFO"
    raw: dict = field(default_factory=dict, repr=False)


def _validate(table: dict, schema: dict, prefix: str = "") -> None:
    for key, value in table.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise UnknownKey(path)
        rule = schema[key]
        if isinstance(rule, dict):
            if not isinstance(value, dict):
                raise InvalidValue(path, "expected a table")
            _validate(value, rule, path + ".")
        else:
            check, desc = rule
            if not check(value):
                raise InvalidValue(path, f"expected {desc}, got {value!r}")


def _require(table: dict, key: str, section: str):
    if key not in table:
        raise InvalidValue(f"{section}.{key}", "required key is missing")
    return table[key]


def _build(raw: dict) -> CliConfig:
    cfg = CliConfig(raw=raw)
    cfg.output_dir = raw.get("output_dir", ".")
    cfg.log_level = raw.get("log_level", "INFO").upper()

    if "plan" in raw:
        p = dict(raw["plan"])
        w = dict(_require(p, "workload", "plan"))
        _require(w, "command", "plan.workload")
        try:
            workload = WorkloadSpec(**w)
            p["workload"] = workload
            for k in ("padding_seconds", "sampling_interval"):
                if k in p:
                    p[k] = float(p[k])
            cfg.plan = BenchmarkPlan(**p)
        except PlanError as exc:
            raise InvalidValue("plan", str(exc)) from exc

    if "rms" in raw:
        r = raw["rms"]
        window = _require(r, "window_len", "rms")
        if window < 1:
            raise InvalidValue("rms.window_len", "must be >= 1")
        cfg.rms = RmsConfig(window, r.get("state_file"))

    if "detector" in raw:
        try:
            cfg.detector = DetectorConfig(**raw["detector"])
        except ValueError as exc:
            raise InvalidValue("detector", str(exc)) from exc

    if "spool" in raw:
        s = dict(raw["spool"])
        sink = dict(_require(s, "sink", "spool"))
        _require(sink, "target", "spool.sink")
        try:
            retry = RetryPolicy(**sink.pop("retry", {}))
            s["sink"] = SinkConfig(retry=retry, **sink)
        except ValueError as exc:
            raise InvalidValue("spool.sink", str(exc)) from exc
        _require(s, "inbox", "spool")
        _require(s, "journal", "spool")
        cfg.spool = SpoolConfig(**s)
    return cfg


_POSITION = re.compile(r"line (\d+), column (\d+)")


def _parse_literal(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Set dotted keys (``plan.padding_seconds``) to TOML literals or bare strings."""
    for dotted, text in overrides:
        parts = dotted.split(".")
        node = raw
        for part in parts[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise InvalidValue(dotted, f"{part} is not a table")
            node = nxt
        node[parts[-1]] = _parse_literal(text) if isinstance(text, str) else text
    return raw


def parse_config(data: bytes | str, overrides=()) -> CliConfig:
    """Strictly parse a configuration document, applying dotted-key overrides."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigSyntaxError(f"configuration is not UTF-8: {exc}") from exc
    try:
        raw = tomllib.loads(data)
    except tomllib.TOMLDecodeError as exc:
        m = _POSITION.search(str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ConfigSyntaxError(f"syntax error: {exc}", line, col) from exc
    apply_overrides(raw, overrides)
    _validate(raw, SCHEMA)
    return _build(raw)


def load_config(path, overrides=()) -> CliConfig:
    with open(path, "rb") as f:
        return parse_config(f.read(), overrides)


def load_plan(path) -> BenchmarkPlan:
    """A plan file is a configuration whose ``[plan]`` section is required."""
    cfg = load_config(path)
    if cfg.plan is None:
        raise InvalidValue("plan", "plan file has no [plan] section")
    return cfg.plan
