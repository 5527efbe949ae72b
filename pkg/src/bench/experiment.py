"""Monte Carlo harness: repeated simulate / select / correct / predict runs.

Each repetition derives its own seed from the master seed and its index,
so the serial and the parallel runs produce the same records.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from src.core.config import ExperimentConfig
from src.core.errors import BenchError, NumericalError
from src.core.log_setup import TRACE, effective_console_level, worker_logging
from src.core.rng import STREAM_BETA, STREAM_HOLDOUT, STREAM_LAMBDA, STREAM_TRAIN, derive_seed, make_rng
from src.correction.plm import PlmFit, fit_post_dantzig, predict_full, predict_ols, predict_submodel
from src.datamodel.generator import TrueModel, draw_sample, make_beta, shifted_mean, simulate_dataset
from src.datamodel.models import BetaType, CoefficientSpec, Dataset, SubmodelSplit
from src.selection.dantzig import DantzigFit, fit_dantzig, select_lambda_gaussian
from src.selection.screening import sis_screen

logger = logging.getLogger(__name__)

# Abort an experiment when more than this share of repetitions fail
MAX_FAILURE_SHARE = 0.2

METRICS = ("mse_hat", "mse_S", "pe_full", "pe_sub", "pe_ols")


@dataclass
class RepRecord:
    """Outcome of one repetition; metrics are NaN when ``failure`` is set."""

    rep: int
    mse_hat: float = math.nan
    mse_S: float = math.nan
    pe_full: float = math.nan
    pe_sub: float = math.nan
    pe_ols: float = math.nan
    selected: tuple[int, ...] = ()
    lambda_p: float = math.nan
    alpha_source: str | None = None
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    @property
    def sub_beats_ols(self) -> bool:
        return self.ok and self.pe_sub < self.pe_ols


@dataclass
class ExperimentReport:
    """Per-repetition records of one experiment and their aggregates."""

    config_id: str
    reps: int
    records: list[RepRecord] = field(default_factory=list)
    coef_seed: int = 0
    d_keep: int | None = None
    bandwidth_rule: str = ""

    @property
    def successes(self) -> list[RepRecord]:
        return [r for r in self.records if r.ok]

    @property
    def failures(self) -> int:
        return sum(1 for r in self.records if not r.ok)

    @property
    def tau(self) -> int:
        """Repetitions where the corrected sub-model predictor beats least squares."""
        return sum(1 for r in self.records if r.sub_beats_ols)

    def mean(self, metric: str) -> float:
        values = [getattr(r, metric) for r in self.successes]
        return float(np.mean(values)) if values else math.nan

    def std(self, metric: str) -> float:
        values = [getattr(r, metric) for r in self.successes]
        if not values:
            return math.nan
        return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0

    def aggregates(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for metric in METRICS:
            out[metric] = self.mean(metric)
            out[f"{metric}_std"] = self.std(metric)
        return out

    def header(self) -> dict:
        return {
            "id": self.config_id,
            "reps": self.reps,
            "failures": self.failures,
            "coef_seed": self.coef_seed,
            "d_keep": self.d_keep,
            "bandwidth_rule": self.bandwidth_rule,
        }


def mse_against_truth(theta_est: np.ndarray, beta_true: np.ndarray, selected) -> float:
    """Mean squared error over the selected coordinates of two p-vectors."""
    selected = sorted(set(int(j) for j in selected))
    if not selected:
        raise ValueError("selection is empty")
    theta_est = np.asarray(theta_est, dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    if theta_est.shape != beta_true.shape:
        raise ValueError(f"shapes differ: {theta_est.shape} vs {beta_true.shape}")
    diff = theta_est[selected] - beta_true[selected]
    return float(np.mean(diff ** 2))


def coefficient_spec(config: ExperimentConfig) -> CoefficientSpec:
    """Coefficient design of an experiment, with its (possibly derived) seed."""
    coef = config.coefficients
    seed = coef.seed if coef.seed is not None else derive_seed(config.seed, STREAM_BETA)
    tails = {"tail_low": coef.tail_low, "tail_high": coef.tail_high}
    if config.beta_type == BetaType.CUSTOM.value:
        return CoefficientSpec(beta_I=coef.beta_I, I=coef.I, seed=seed, **tails)
    return CoefficientSpec.preset(config.beta_type, seed=seed, **tails)


def build_true_model(config: ExperimentConfig) -> tuple[TrueModel, CoefficientSpec]:
    """Draw beta once and fix the noise level for the configured design."""
    spec = coefficient_spec(config)
    beta = make_beta(spec, config.p)
    mu = shifted_mean(config.p, spec.I) if config.mean_rule == "shifted" else np.zeros(config.p)
    if config.sigma_eps is not None:
        model = TrueModel(beta=beta, rho_corr=config.rho_corr, mu=mu, sigma_eps=config.sigma_eps)
    else:
        model = TrueModel.for_r2(beta, config.rho_corr, mu, config.target_r2)
    logger.debug("%s: sigma_eps=%.6g r2=%.4f", config.id, model.sigma_eps, model.r2)
    return model, spec


def _failed(rep: int, exc: Exception, **known) -> RepRecord:
    tag = f"{type(exc).__name__}: {exc}"
    logger.warning("rep %d failed: %s", rep, tag)
    return RepRecord(rep=rep, failure=tag, **known)


@dataclass(frozen=True, eq=False)
class RepetitionFit:
    """Selection and correction fitted on one training sample."""

    dfit: DantzigFit
    split: SubmodelSplit
    plm: PlmFit
    lambda_p: float


def fit_repetition(config: ExperimentConfig, train: Dataset, sigma: float, rep_seed: int) -> RepetitionFit:
    """Screen (optionally), select and correct on one training sample.

    Raises:
        NumericalError: From any stage of the pipeline.
    """
    X_fit, kept = train.X, None
    if config.use_sis:
        kept = sis_screen(train.X, train.Y, config.effective_d_keep).kept
        X_fit = train.X[:, list(kept)]
    if config.lambda_mode == "fixed":
        lambda_p = float(config.lambda_value)
    else:
        X_lambda = X_fit - X_fit.mean(axis=0) if config.center_selection else X_fit
        lambda_p = select_lambda_gaussian(X_lambda, config.lambda_m, derive_seed(rep_seed, STREAM_LAMBDA))
    dfit = fit_dantzig(
        X_fit, train.Y, sigma,
        lambda_p=lambda_p, varsigma=config.varsigma, center=config.center_selection,
    )
    if kept is not None:
        dfit = dfit.embed(kept, config.p)
    split = SubmodelSplit.from_selected(dfit.active, config.p)
    plm = fit_post_dantzig(train, split, dfit, config.d_instr, correction=config.correction)
    return RepetitionFit(dfit=dfit, split=split, plm=plm, lambda_p=lambda_p)


def run_repetition(config: ExperimentConfig, model: TrueModel, rep: int) -> RepRecord:
    """Simulate, select, correct and score one repetition.

    Numerical failures are returned as a failed record, never raised.
    """
    start = time.perf_counter()
    rep_seed = derive_seed(config.seed, rep)
    train = simulate_dataset(model, config.n, rep_seed, STREAM_TRAIN)
    X_hold, Y_hold = draw_sample(model, config.holdout_n, make_rng(rep_seed, STREAM_HOLDOUT))

    try:
        fitted = fit_repetition(config, train, model.sigma_eps, rep_seed)
    except NumericalError as exc:
        record = _failed(rep, exc)
    else:
        dfit, plm = fitted.dfit, fitted.plm
        Z_hold, V_hold = plm.instruments_for(X_hold)
        pe_full = float(np.mean((Y_hold - predict_full(plm, Z_hold, V_hold)) ** 2))
        pe_sub = float(np.mean((Y_hold - predict_submodel(plm, Z_hold)) ** 2))
        pe_ols = float(np.mean((Y_hold - predict_ols(dfit.theta_tilde_S, Z_hold)) ** 2))
        record = RepRecord(
            rep=rep,
            mse_hat=mse_against_truth(plm.full_theta(), model.beta, dfit.active),
            mse_S=mse_against_truth(dfit.full_theta(config.p), model.beta, dfit.active),
            pe_full=pe_full,
            pe_sub=pe_sub,
            pe_ols=pe_ols,
            selected=dfit.active,
            lambda_p=fitted.lambda_p,
            alpha_source=plm.alpha_source,
        )
    logger.log(TRACE, "rep %d finished in %.3fs", rep, time.perf_counter() - start)
    return record


def _run_job(job: tuple[ExperimentConfig, TrueModel, int]) -> RepRecord:
    return run_repetition(*job)


def run_experiment(
    config: ExperimentConfig,
    *,
    reps: int | None = None,
    parallel: int = 1,
) -> ExperimentReport:
    """Run every repetition of one experiment and collect the report.

    Args:
        config: Validated experiment configuration.
        reps: Override of ``config.reps``.
        parallel: Worker processes; 1 runs in-process.

    Raises:
        BenchError: If more than 20% of the repetitions fail.
    """
    reps = config.reps if reps is None else reps
    if reps < 1:
        raise ValueError("reps must be >= 1")
    model, spec = build_true_model(config)
    logger.info("Experiment %s: n=%d p=%d reps=%d", config.id, config.n, config.p, reps)

    jobs = [(config, model, r) for r in range(reps)]
    if parallel > 1:
        with ProcessPoolExecutor(
            max_workers=parallel, initializer=worker_logging, initargs=(effective_console_level(),)
        ) as pool:
            # map yields records in repetition order
            records = list(pool.map(_run_job, jobs))
    else:
        records = [_run_job(job) for job in jobs]

    corr = config.correction
    if corr.bandwidth is not None:
        rule = f"fixed h={corr.bandwidth}"
    else:
        rule = f"scale*n^(-1/(2(k+d+1))), k=2, d={config.d_instr}"
        if corr.bandwidth_scale is not None:
            rule += f", scale={corr.bandwidth_scale}"
        elif not corr.standardize_v:
            rule += ", scale=geometric mean of sd(V)"
    if corr.standardize_v:
        rule += ", per-coordinate h*sd_j"
    report = ExperimentReport(
        config_id=config.id,
        reps=reps,
        records=records,
        coef_seed=spec.seed,
        d_keep=config.effective_d_keep if config.use_sis else None,
        bandwidth_rule=rule,
    )
    if report.failures > MAX_FAILURE_SHARE * reps:
        tags = sorted({r.failure for r in records if not r.ok})
        raise BenchError(
            f"{config.id}: {report.failures}/{reps} repetitions failed; first causes: {tags[:3]}"
        )
    logger.info("Experiment %s done: tau=%d/%d failures=%d", config.id, report.tau, reps, report.failures)
    return report
