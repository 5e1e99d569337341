"""Command line: ``validate | well | simulate | decay | sweep``.

Exit codes: 0 success, 2 validation failure, 3 runtime instability.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import output, runner
from .config import ConfigError, load_config
from .dynamics import CFLError, InstabilityError
from .geometry import GeometryError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNSTABLE = 3

COMMANDS = ("validate", "well", "simulate", "decay", "sweep")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="structacoustics",
                                 description="Coupled wave-plate simulations and potential-well diagnostics.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted config assignment, value parsed as JSON; repeatable")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _summary(command: str, rep: dict) -> str:
    if command == "validate":
        return "ok" if rep["ok"] else "invalid"
    if command == "well":
        w = rep["well"]
        return (f"s*={w['s_star']:.7g} Lambda(s*)={w['lambda_at_sstar']:.7g} "
                f"d_est={w['d_est']} initial={rep['initial']['label']}")
    if command == "simulate":
        r = rep["run"]
        return f"rows={r['rows']} max|residual|={r['max_abs_residual']:.3e}"
    if command == "decay":
        f = rep["decay"]["fit"]
        if f["branch"] == "exponential":
            return f"branch=exponential rate={f['rate']} R2={f['r2']}"
        return f"branch=algebraic b={f['exponent_b']} slope={f['loglog_slope']}"
    return json.dumps({k: v for k, v in rep.items() if k != "runs"})


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out: Path = args.out
    try:
        cfg = load_config(args.config, args.override, args.seed)
        if args.command == "validate":
            rep = runner.command_validate(cfg)
            out.mkdir(parents=True, exist_ok=True)
            output.write_report(rep, out / "validate.json")
            if not rep["ok"]:
                for msg in rep["params"]["errors"]:
                    print(f"error: {msg}", file=sys.stderr)
                if not rep["geometry"]["ok"]:
                    print(f"error: {rep['geometry']['error']}", file=sys.stderr)
                return EXIT_INVALID
            for msg in rep["params"]["warnings"]:
                print(f"warning: {msg}", file=sys.stderr)
        elif args.command == "well":
            rep = runner.command_well(cfg)
            out.mkdir(parents=True, exist_ok=True)
            output.write_report(rep, out / cfg["outputs"]["report"])
        elif args.command == "simulate":
            res = runner.command_simulate(cfg, out)
            rep = res.report
            if res.aborted:
                print(f"error: {rep['instability']['message']} "
                      f"(last good t={rep['instability']['last_good_time']:.6g})", file=sys.stderr)
                return EXIT_UNSTABLE
        elif args.command == "decay":
            rep = runner.command_decay(cfg, out)
            if rep["decay"].get("short_run"):
                print(f"warning: {rep['decay']['stabilization_check']['notice']}", file=sys.stderr)
        else:
            rep = runner.command_sweep(cfg, out)
    except (ConfigError, runner.ValidationFailure, GeometryError, CFLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InstabilityError as exc:
        print(f"error: {exc} (last good t={exc.last_good_time:.6g})", file=sys.stderr)
        return EXIT_UNSTABLE
    print(f"{args.command}: {_summary(args.command, rep)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
