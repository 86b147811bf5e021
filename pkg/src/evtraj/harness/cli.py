"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .. import metrics
from ..predictor import checkpoint
from ..predictor.checkpoint import CheckpointError
from ..predictor.train import TrainingError, train
from ..synthgen import DatasetError, generate, read_dataset, write_dataset
from . import config as cfgmod
from .config import ConfigError
from .density import density_uncertainty_check
from .evaluate import EvaluationError, evaluate, write_outputs
from .experiment import importance_sampling_experiment, write_result

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("evtraj")


def _records(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    return read_dataset(path)


def _model(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return checkpoint.load(path)[0]


def cmd_generate(args) -> int:
    gen = cfgmod.generator_config(cfgmod.load(args.config))
    records = generate(gen)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_dataset(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    tc = cfgmod.train_config(cfgmod.load(args.config))
    records = _records(args.data)
    result = train(records, tc)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    checkpoint.save(result.params, args.out, extra={
        "train_config": tc.to_dict(), "best_epoch": result.best_epoch,
        "stopped_early": result.stopped_early, "history": result.history,
    })
    print(f"best epoch {result.best_epoch}; checkpoint written to {args.out}")
    return EXIT_OK


def _eval_cfg(args):
    kv = cfgmod.load(getattr(args, "config", None))
    if getattr(args, "rauc_error", None):
        kv["rauc_error"] = args.rauc_error
    return cfgmod.eval_config(kv)


def cmd_evaluate(args) -> int:
    ec = _eval_cfg(args)
    ev = evaluate(_model(args.model), _records(args.data), ec)
    report, curve = write_outputs(ev, args.out, ec.rauc_error)
    print(json.dumps(ev.report.to_dict(), indent=2, sort_keys=True))
    print(f"wrote {report} and {curve}")
    return EXIT_OK


def cmd_reject_curve(args) -> int:
    ec = _eval_cfg(args)
    ev = evaluate(_model(args.model), _records(args.data), ec)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    metrics.write_rejection_curve(args.out, ev.rauc_errors(ec.rauc_error), ev.uncertainty)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_importance_sampling(args) -> int:
    kv = cfgmod.load(args.config)
    exp = cfgmod.experiment_config(kv)
    if not exp.dataset:
        raise ConfigError("importance sampling config needs a 'dataset' key")
    data = Path(exp.dataset)
    if not data.is_absolute():
        data = Path(args.config).parent / data
    result = importance_sampling_experiment(_records(data), exp)
    paths = write_result(result, args.out)
    print(result.table(), end="")
    print(f"wrote {paths['json']} and {paths['table']}")
    return EXIT_OK


def cmd_density_check(args) -> int:
    kv = cfgmod.load(getattr(args, "config", None))
    ec = cfgmod.eval_config(kv)
    res = density_uncertainty_check(_model(args.model), _records(args.data), ec.eval_split,
                                    ec.uncertainty_component)
    print(res.format_table(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evtraj", description="Evidential trajectory prediction toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate", help="write a synthetic JSON-lines dataset")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("train", help="train a predictor and save a checkpoint")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="write metrics.json and rejection_curve.csv")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--rauc-error", choices=("minade", "wade"))
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("reject-curve", help="write the rejection curve as CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--rauc-error", choices=("minade", "wade"))
    s.set_defaults(func=cmd_reject_curve)

    s = sub.add_parser("importance-sampling", help="run the data selection experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_importance_sampling)

    s = sub.add_parser("density-check", help="rank correlation of maneuver frequency and uncertainty")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_density_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, CheckpointError, EvaluationError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
