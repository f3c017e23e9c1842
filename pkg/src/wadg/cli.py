"""``wadg <experiment>`` command-line driver.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
(singular mass matrix or blow-up), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .harness import (EXPERIMENTS, ConfigError, HarnessIOError, config_from_mapping,
                      format_sci, parse_config_file, run_experiment,
                      run_solve, write_csv)
from .solver import BlowUpError
from .weighted import CorrectionDegenerateError, SingularMassMatrixError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wadg", description="Weighted and weight-adjusted DG experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--n", dest="N", help="degree N or range N1..N2")
    p.add_argument("--mesh", dest="meshes", help="comma-separated cells per side")
    p.add_argument("--field", help="smoothsine | cone:a=1e-3 | layered | const:v=1 | expxy")
    p.add_argument("--quad-degree", dest="quad_degree", help="degree D or range D1..D2")
    p.add_argument("--mode", choices=("standard", "wadg", "wadg-cons"))
    p.add_argument("--tfinal", type=float)
    p.add_argument("--cfl", type=float)
    p.add_argument("--out", help="CSV output path (default: print to stdout)")
    p.add_argument("--dump-dir", help="solve: directory for pressure snapshots")
    return p


def _summary(table) -> str:
    lines = []
    for key in table.groups():
        grp = dict(zip(table.group_keys, key))
        tag = " ".join(f"{k}={v}" for k, v in grp.items())
        for r in table.select(**grp):
            vals = " ".join(f"{c}={format_sci(r.values.get(c))}" for c in table.columns)
            lines.append(f"{tag} cells={r.cells} h={format_sci(r.h)} {vals}")
        rate_cols = table.rate_columns if table.rate_columns is not None else table.columns
        if len(table.select(**grp)) >= 2 and rate_cols:
            rates = []
            for c in rate_cols:
                lsq, last = table.rates(c, **grp)
                rates.append(f"{c}: lsq={lsq:.4f} last={last:.4f}")
            lines.append(f"{tag} rates " + "; ".join(rates))
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = parse_config_file(args.config) if args.config else {}
        for key in ("N", "meshes", "field", "quad_degree", "mode", "tfinal", "cfl", "out"):
            v = getattr(args, key)
            if v is not None:
                raw[key] = v
        cfg = config_from_mapping(args.experiment, raw)
    except ConfigError as exc:
        print(f"wadg: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HarnessIOError as exc:
        print(f"wadg: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        if cfg.experiment == "solve":
            table = run_solve(cfg, dump_dir=args.dump_dir)
        else:
            table = run_experiment(cfg)
    except ConfigError as exc:
        print(f"wadg: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularMassMatrixError, BlowUpError, CorrectionDegenerateError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"wadg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"wadg: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"wadg: {exc}", file=sys.stderr)
        return EXIT_IO

    print(_summary(table))
    if cfg.out:
        try:
            write_csv(table, cfg.out)
        except HarnessIOError as exc:
            print(f"wadg: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"wrote {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
