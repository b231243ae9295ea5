"""Command-line entry point: ``pathbandit run|sweep|ope``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction

from .core import ConfigError, SpecError
from .harness import (BUILD_ID, SWEEP_AXES, ExperimentConfig, load_config, run_experiment,
                      run_ope, run_sweep)
from .ope import ingest_logged


def _parse_values(raw: str) -> list:
    values = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            continue
        v = float(Fraction(tok))
        values.append(int(v) if v.is_integer() and "/" not in tok and "." not in tok else v)
    if not values:
        raise argparse.ArgumentTypeError("empty value list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathbandit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=BUILD_ID)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="closed-loop simulation experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int, default=1)

    sweep = sub.add_parser("sweep", help="one experiment per value of alpha2, N or D")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sweep.add_argument("--values", required=True, type=_parse_values,
                       help="comma list; fractions such as 1/6 are accepted")
    sweep.add_argument("--out")
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--threads", type=int, default=1)

    ope = sub.add_parser("ope", help="replay evaluation on a logged CSV")
    ope.add_argument("--config", required=True)
    ope.add_argument("--data", required=True)
    ope.add_argument("--out")
    ope.add_argument("--seed", type=int)
    ope.add_argument("--threads", type=int, default=1)
    return parser


def _config(args, doc) -> ExperimentConfig:
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["out"] = args.out
    return ExperimentConfig.from_dict(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        doc = load_config(args.config)
        if args.command == "ope":
            dataset = ingest_logged(args.data)
            # replay needs no simulator; a placeholder keeps the config schema whole
            doc = {**doc, "choices": list(dataset.spec.choices),
                   "simulator": {"order": 1, "scale": 1.0}}
        config = _config(args, dict(doc))
    except (ConfigError, SpecError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "run":
            result = run_experiment(config, threads=args.threads)
            for row in result.summary:
                if row[1] == "avg_regret":
                    print(f"{row[0]:>12} avg_regret {row[4]:.4f} +/- {row[5]:.4f}")
        elif args.command == "sweep":
            result = run_sweep(config, args.axis, args.values, threads=args.threads)
            for row in result.rows:
                if row[3] == "avg_regret":
                    print(f"{row[0]:>12} {row[1]}={row[2]:<8g} {row[4]:.4f} +/- {row[5]:.4f}")
        else:
            ope_doc = doc.get("ope", {})
            rows = run_ope(config, dataset, int(ope_doc.get("steps", 1000)),
                           int(ope_doc.get("repetitions", 10)), threads=args.threads)
            for row in rows:
                print(",".join(str(v) for v in row))
    except (ConfigError, SpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
