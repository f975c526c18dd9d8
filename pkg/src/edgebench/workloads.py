"""Synthetic workloads with known resource profiles.

Run as ``python -m edgebench.workloads <kind> [options]``. They exist to
validate the harness end to end: ``spin`` burns one core, ``alloc`` touches
a known amount of memory, ``sleep`` is idle for a known time, and ``items``
emits the per-item marker protocol.
"""

import argparse
import sys
import time

PAGE = 4096
MIB = 1 << 20


def mark(j, what):
    sys.stdout.write(f"EDGEOPS:ITEM:{j}:{what}\n")
    sys.stdout.flush()


def spin(seconds):
    end = time.monotonic() + seconds
    x = 0
    while time.monotonic() < end:
        for _ in range(10_000):
            x += 1
    return x


def touch(n_bytes):
    buf = bytearray(n_bytes)
    # write one byte per page so every page becomes resident
    buf[::PAGE] = b"\x01" * len(range(0, n_bytes, PAGE))
    return buf


def main(argv=None):
    p = argparse.ArgumentParser(prog="python -m edgebench.workloads")
    sub = p.add_subparsers(dest="kind", required=True)

    s = sub.add_parser("spin", help="busy-loop a single thread")
    s.add_argument("--seconds", type=float, default=20.0)

    s = sub.add_parser("sleep", help="sleep without using CPU")
    s.add_argument("--seconds", type=float, default=5.0)

    s = sub.add_parser("alloc", help="touch N MiB per item and hold it")
    s.add_argument("--mib", type=int, default=256)
    s.add_argument("--items", type=int, default=1)
    s.add_argument("--hold", type=float, default=2.0)

    s = sub.add_parser("items", help="emit markers around fixed-length items")
    s.add_argument("--items", type=int, default=10)
    s.add_argument("--item-seconds", type=float, default=0.1)
    s.add_argument("--busy", action="store_true", help="spin instead of sleep")
    s.add_argument("--chatter", action="store_true",
                   help="interleave non-marker log lines")

    s = sub.add_parser("exit", help="exit immediately with a status code")
    s.add_argument("--code", type=int, default=0)

    args = p.parse_args(argv)

    if args.kind == "spin":
        spin(args.seconds)
    elif args.kind == "sleep":
        time.sleep(args.seconds)
    elif args.kind == "alloc":
        for j in range(args.items):
            mark(j, "START")
            buf = touch(args.mib * MIB)
            time.sleep(args.hold)
            del buf
            mark(j, "END")
    elif args.kind == "items":
        for j in range(args.items):
            if args.chatter:
                print(f"loading item {j}", flush=True)
            mark(j, "START")
            if args.busy:
                spin(args.item_seconds)
            else:
                time.sleep(args.item_seconds)
            mark(j, "END")
            if args.chatter:
                print(f"item {j} done", flush=True)
    elif args.kind == "exit":
        return args.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
