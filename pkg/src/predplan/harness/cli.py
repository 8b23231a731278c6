"""Command line: collect, train-predictor, train-policy, eval, report.

Exit codes: 0 success, 2 configuration error, 3 I/O or parse error,
4 contract violation.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, ContractError, ParseError
from .config import load_config
from .dataset import collect_dataset
from .pipeline import run_eval, run_train_policy, run_train_predictor
from .reporting import report

log = logging.getLogger("predplan")


def _collect(args):
    cfg = load_config(args.config)
    paths = collect_dataset(args.town, args.episodes, args.seed, args.out, cfg.collect)
    for cls, p in paths.items():
        print(f"{cls}: {p}")


def _train_predictor(args):
    res = run_train_predictor(args.data, load_config(args.config), args.out)
    print(f"checkpoint: {res['checkpoint']}")
    print(f"validation mse {res['val_mse']:.4f} (constant velocity {res['cv_mse']:.4f})")


def _train_policy(args):
    res = run_train_policy(load_config(args.config), args.predictor, args.out, use_prediction=not args.no_prediction)
    print(f"checkpoints: {len(res.checkpoints)}, evaluation rounds: {len(res.log_rows)}")


def _eval(args):
    res = run_eval(load_config(args.config), args.policy, args.predictor, args.preset, args.out, use_prediction=not args.no_prediction)
    agg = res.aggregate
    print(
        f"{res.preset.name}: {agg['episodes']} episodes, success {agg['success_mean']:.3f}, "
        f"driving score {agg['driving_score_mean']:.3f}"
    )


def _report(args):
    summary, _ = report(args.inputs, args.out)
    print(f"summary: {summary}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="predplan", description="Prediction-aware driving policies in a 2-D traffic simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("collect", help="record agent trajectories driven by the autopilot")
    c.add_argument("--town", required=True)
    c.add_argument("--episodes", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.add_argument("--config")
    c.set_defaults(func=_collect)

    t = sub.add_parser("train-predictor", help="train the trajectory predictor")
    t.add_argument("--data", required=True, help="dataset directory, records file, or synthetic:N")
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.set_defaults(func=_train_predictor)

    tp = sub.add_parser("train-policy", help="train a driving policy with PPO")
    tp.add_argument("--config")
    tp.add_argument("--predictor")
    tp.add_argument("--out", required=True)
    tp.add_argument("--no-prediction", action="store_true", help="train without the prediction channels")
    tp.set_defaults(func=_train_policy)

    e = sub.add_parser("eval", help="run a benchmark preset")
    e.add_argument("--policy", required=True, help="policy checkpoint or 'autopilot'")
    e.add_argument("--predictor")
    e.add_argument("--preset", required=True)
    e.add_argument("--config")
    e.add_argument("--out", required=True)
    e.add_argument("--no-prediction", action="store_true")
    e.set_defaults(func=_eval)

    r = sub.add_parser("report", help="summarize per-episode metrics files")
    r.add_argument("--in", dest="inputs", nargs="+", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except (OSError, ParseError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3
    except ContractError as e:
        print(f"contract violation: {e}", file=sys.stderr)
        return 4
    return 0
