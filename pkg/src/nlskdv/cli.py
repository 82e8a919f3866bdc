"""Command-line front end.

    nlskdv <command> [--config PATH] [--set key=value ...] [--out DIR] [--seed N]
    nlskdv sweep --config PATH --axis key --values v1,v2,... [--command CMD]
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import COMMANDS, ConfigParseError, ConfigValidationError, build_config, get_path, load_file, parse_value
from .control import GramianIllConditioned, LocalControlDivergence, TransferTimeout
from .dynamics import BlowUpError, PicardDivergence
from .io import to_jsonable, write_atomic, write_json
from .scenarios import run_scenario

OUTPUT_ROOT_ENV = "NLSKDV_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_BLOWUP = 4
EXIT_CG = 5
EXIT_PICARD = 6
EXIT_LOCAL_CONTROL = 7
EXIT_TRANSFER = 8

FAILURES = (
    (ConfigParseError, EXIT_PARSE, "config-parse"),
    (ConfigValidationError, EXIT_VALIDATION, "validation"),
    (BlowUpError, EXIT_BLOWUP, "blow-up"),
    (GramianIllConditioned, EXIT_CG, "cg-divergence"),
    (PicardDivergence, EXIT_PICARD, "picard-non-contraction"),
    (LocalControlDivergence, EXIT_LOCAL_CONTROL, "local-control-divergence"),
    (TransferTimeout, EXIT_TRANSFER, "transfer-timeout"),
)

logger = logging.getLogger("nlskdv")


def classify(exc: BaseException):
    for cls, code, tag in FAILURES:
        if isinstance(exc, cls):
            return code, tag
    return EXIT_FAILURE, "error"


def default_out(command: str) -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "nlskdv-output")) / command


def load_config(path, overrides, command, seed):
    data = load_file(path) if path else {}
    return build_config(data, overrides or (), command=command, seed=seed)


def write_meta(out: Path, started: float, status: str) -> None:
    write_json(out / "meta.json", {"started": started, "finished": time.time(), "elapsed": time.time() - started, "status": status})


def run_command(args) -> int:
    started = time.time()
    try:
        cfg = load_config(args.config, args.set, args.command, args.seed)
    except (ConfigParseError, ConfigValidationError) as exc:
        code, tag = classify(exc)
        print(f"nlskdv: {tag}: {exc}", file=sys.stderr)
        return code
    out = Path(args.out) if args.out else default_out(cfg.command)
    try:
        report = run_scenario(cfg, out)
    except Exception as exc:  # every guard trip maps to a named exit code
        code, tag = classify(exc)
        print(f"nlskdv: {tag}: {exc}", file=sys.stderr)
        if out.exists():
            write_meta(out, started, tag)
        return code
    write_json(out / "report.json", report)
    write_meta(out, started, "ok")
    print(f"nlskdv: {cfg.command} finished; report in {out / 'report.json'}")
    return EXIT_OK


def sweep(base_data: dict, overrides, axis: str, values, command: str | None, seed, out: Path, workers: int = 4):
    """Run one scenario per axis value on worker threads; returns CSV rows."""
    base = build_config(base_data, overrides, command=command, seed=seed)
    get_path(base.values, axis)
    out.mkdir(parents=True, exist_ok=True)

    def one(item):
        i, val = item
        row = {"index": i, axis: val}
        run_dir = out / f"run_{i:03d}"
        try:
            cfg = build_config(base_data, list(overrides) + [f"{axis}={val!r}" if isinstance(val, str) else f"{axis}={val}"],
                               command=command, seed=seed)
            report = run_scenario(cfg, run_dir)
            write_json(run_dir / "report.json", report)
            row["status"] = "ok"
            for k, v in report.get("summary", {}).items():
                if isinstance(v, (int, float, bool)) or v is None:
                    row[k] = v
        except Exception as exc:
            row["status"] = classify(exc)[1]
            row["message"] = str(exc).replace("\n", " ")
        return row

    items = list(enumerate(values))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(one, items))
    keys = ["index", axis, "status"]
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    head, tail = keys[:3], sorted(keys[3:])
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=head + tail, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: to_jsonable(v) for k, v in r.items()})
    write_atomic(out / "sweep.csv", buf.getvalue())
    return rows


def parse_values(text: str):
    if text.strip() == "":
        return []
    return [parse_value(v.strip()) for v in text.split(",")]


def run_sweep(args) -> int:
    try:
        data = load_file(args.config) if args.config else {}
        values = parse_values(args.values)
        out = Path(args.out) if args.out else default_out("sweep")
        rows = sweep(data, args.set or (), args.axis, values, args.sweep_command, args.seed, out, args.workers)
    except (ConfigParseError, ConfigValidationError) as exc:
        code, tag = classify(exc)
        print(f"nlskdv: {tag}: {exc}", file=sys.stderr)
        return code
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"nlskdv: sweep of {len(rows)} runs finished ({failed} failed); table in {out / 'sweep.csv'}")
    return EXIT_OK


def add_common(p):
    p.add_argument("--config", help="TOML or JSON scenario file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (repeatable)")
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_ENV}/<command>)")
    p.add_argument("--seed", type=int, help="seed for every random draw")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlskdv", description="Schrödinger-KdV simulation and control experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        add_common(p)
        p.set_defaults(func=run_command)
    p = sub.add_parser("sweep", help="run a scenario over values of one config field")
    add_common(p)
    p.add_argument("--axis", required=True, help="dotted config key, e.g. actuator.half_width")
    p.add_argument("--values", required=True, help="comma-separated values (may be empty)")
    p.add_argument("--command", dest="sweep_command", choices=COMMANDS, help="scenario to run (default: from config)")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=run_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "sweep":
        args.command = None
        return run_sweep(args)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
