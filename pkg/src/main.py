from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from src.bench.experiment import build_true_model, run_experiment
from src.bench.report import emit_records, emit_table, table_format_for
from src.core.config import ConfigError, CorrectionConfig, load_experiments
from src.core.errors import NumericalError
from src.core.log_setup import setup_logging
from src.core.rng import STREAM_TRAIN
from src.correction.plm import fit_post_dantzig
from src.datamodel.dataset_io import read_dataset_csv, write_dataset_csv
from src.datamodel.generator import simulate_dataset
from src.datamodel.models import SubmodelSplit
from src.selection.dantzig import DEFAULT_LAMBDA_M, DEFAULT_VARSIGMA, DantzigFit, fit_dantzig
from src.selection.screening import sis_screen

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _write_text(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def _write_yaml(path: str, payload: dict) -> None:
    _write_text(path, yaml.safe_dump(payload, sort_keys=False))


def _pick_experiment(path: str, experiment_id: str | None):
    experiments = load_experiments(path)
    if experiment_id is None:
        return experiments[0]
    for cfg in experiments:
        if cfg.id == experiment_id:
            return cfg
    raise ConfigError(f"{path}: no experiment with id {experiment_id!r}")


def _dantzig_payload(dfit: DantzigFit) -> dict:
    nonzero = np.flatnonzero(dfit.beta_tilde)
    return {
        "lambda_p": dfit.lambda_p,
        "sigma": dfit.sigma,
        "varsigma": dfit.varsigma,
        "active": [j + 1 for j in dfit.active],
        "theta_tilde_S": dfit.theta_tilde_S.tolist(),
        "beta_tilde_nonzero": {int(j) + 1: float(dfit.beta_tilde[j]) for j in nonzero},
        "max_slack": dfit.max_slack,
    }


def _fit(args: argparse.Namespace, X: np.ndarray, Y: np.ndarray) -> DantzigFit:
    return fit_dantzig(
        X, Y, args.sigma,
        lambda_p=args.lambda_p,
        m=args.lambda_gaussian or DEFAULT_LAMBDA_M,
        varsigma=args.varsigma,
        seed=args.seed,
        center=args.center,
    )


def cmd_simulate(args: argparse.Namespace) -> None:
    cfg = _pick_experiment(args.config, args.experiment)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    model, spec = build_true_model(cfg)
    dataset = simulate_dataset(model, args.n or cfg.n, cfg.seed, STREAM_TRAIN)
    write_dataset_csv(dataset, args.out)
    logger.info(
        "Wrote %s: n=%d p=%d sigma_eps=%.4g R^2=%.4f coefficient seed=%d",
        args.out, dataset.n, dataset.p, model.sigma_eps, model.r2, spec.seed,
    )


def cmd_screen(args: argparse.Namespace) -> None:
    dataset = read_dataset_csv(args.data)
    result = sis_screen(dataset.X, dataset.Y, args.keep)
    lines = ["index,score"] + [f"{j + 1},{result.scores[j]:.10g}" for j in result.kept]
    _write_text(args.out, "\n".join(lines) + "\n")
    logger.info("Kept %d of %d covariates", len(result.kept), dataset.p)


def cmd_fit_dantzig(args: argparse.Namespace) -> None:
    dataset = read_dataset_csv(args.data)
    dfit = _fit(args, dataset.X, dataset.Y)
    _write_yaml(args.out, _dantzig_payload(dfit))
    logger.info("Selected %d covariates with lambda_p=%.4g", len(dfit.active), dfit.lambda_p)


def cmd_fit_post_dantzig(args: argparse.Namespace) -> None:
    dataset = read_dataset_csv(args.data)
    X, kept = dataset.X, None
    if args.keep is not None:
        kept = sis_screen(dataset.X, dataset.Y, args.keep).kept
        X = dataset.X[:, list(kept)]
    dfit = _fit(args, X, dataset.Y)
    if kept is not None:
        dfit = dfit.embed(kept, dataset.p)
    split = SubmodelSplit.from_selected(dfit.active, dataset.p)
    correction = CorrectionConfig(bandwidth_scale=args.bandwidth_scale, standardize_v=args.standardize_v)
    fit = fit_post_dantzig(dataset, split, dfit, args.d, correction=correction)
    payload = {"dantzig": _dantzig_payload(dfit), "post_dantzig": fit.report()}
    if kept is not None:
        payload["screened"] = [j + 1 for j in kept]
    _write_yaml(args.out, payload)
    logger.info("theta_hat on %d covariates written to %s", fit.q, args.out)


def cmd_bench(args: argparse.Namespace) -> None:
    experiments = load_experiments(args.config)
    reports = [run_experiment(cfg, reps=args.reps, parallel=args.parallel) for cfg in experiments]
    _write_text(args.out, emit_table(reports, table_format_for(args.out)))
    if args.records:
        _write_text(args.records, emit_records(reports))
    logger.info("Wrote %d table row(s) to %s", len(reports), args.out)


def _add_lambda_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--lambda", dest="lambda_p", type=float, default=None,
                       help="Fixed shrinkage parameter lambda_p")
    group.add_argument("--lambda-gaussian", type=int, default=None, metavar="M",
                       help=f"Gaussian-supremum rule over M draws (default {DEFAULT_LAMBDA_M})")
    parser.add_argument("--varsigma", type=float, default=DEFAULT_VARSIGMA,
                        help="Selection threshold multiplier")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the lambda_p draws")
    parser.add_argument("--center", action="store_true",
                        help="Select on column-centred X and centred Y")


def _parse_args() -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(
        prog="post-dantzig",
        description="Adaptive post-Dantzig estimation for non-sparse high-dimensional linear models",
    )
    parser.add_argument("--debug", action="store_true",
                        help="Enable debug mode (verbose logging)")
    parser.add_argument("--trace", action="store_true",
                        help="Enable trace mode (writes trace file to debug/)")
    parser.add_argument("--verbose", action="store_true",
                        help="With --trace, also send trace output to terminal")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Draw a training set from an experiment design")
    p.add_argument("--config", required=True, help="Experiment YAML file")
    p.add_argument("--out", required=True, help="Dataset CSV to write")
    p.add_argument("--seed", type=int, default=None, help="Override the master seed")
    p.add_argument("--experiment", default=None, help="Experiment id (default: first)")
    p.add_argument("--n", type=int, default=None, help="Override the sample size")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("screen", help="Sure independence screening")
    p.add_argument("--data", required=True, help="Dataset CSV")
    p.add_argument("--keep", type=int, required=True, help="Number of covariates kept")
    p.add_argument("--out", required=True, help="CSV of kept indices and scores")
    p.set_defaults(handler=cmd_screen)

    p = sub.add_parser("fit-dantzig", help="Dantzig selector and least-squares refit")
    p.add_argument("--data", required=True, help="Dataset CSV")
    p.add_argument("--sigma", type=float, required=True, help="Noise level")
    _add_lambda_flags(p)
    p.add_argument("--out", required=True, help="YAML report to write")
    p.set_defaults(handler=cmd_fit_dantzig)

    p = sub.add_parser("fit-post-dantzig", help="Bias-corrected sub-model fit")
    p.add_argument("--data", required=True, help="Dataset CSV")
    p.add_argument("--sigma", type=float, required=True, help="Noise level")
    p.add_argument("--d", type=int, default=1, help="U columns appended to Z (default 1)")
    p.add_argument("--bandwidth-scale", type=float, default=None, help="Bandwidth rule scale")
    p.add_argument("--standardize-v", action="store_true",
                   help="Per-coordinate bandwidth h * sd_j instead of one bandwidth")
    p.add_argument("--keep", type=int, default=None, help="Screen to this many covariates first")
    _add_lambda_flags(p)
    p.add_argument("--out", required=True, help="YAML report to write")
    p.set_defaults(handler=cmd_fit_post_dantzig)

    p = sub.add_parser("bench", help="Run Monte Carlo experiments")
    p.add_argument("--config", required=True, help="Experiment YAML file")
    p.add_argument("--out", required=True, help="Table file (.csv or .md)")
    p.add_argument("--reps", type=int, default=None, help="Override repetitions per experiment")
    p.add_argument("--parallel", type=int, default=1, help="Worker processes")
    p.add_argument("--records", default=None, help="Also write per-repetition records to this CSV")
    p.set_defaults(handler=cmd_bench)
    return parser.parse_args()


def main() -> int:
    """Entry point for the post-dantzig command line."""
    args = _parse_args()
    log = setup_logging(debug=args.debug, trace=args.trace, verbose=args.verbose, command=args.command)
    try:
        args.handler(args)
    except (ConfigError, ValueError) as exc:
        log.error("Invalid input: %s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        log.error("Numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
