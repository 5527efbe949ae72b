from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

logger = logging.getLogger(__name__)

BETA_TYPES = ("I", "II", "III", "custom")
LAMBDA_MODES = ("gaussian", "fixed")
MEAN_RULES = ("shifted", "zero")
U_STAR_MODES = ("residual", "first")
A_METHODS = ("eigen", "row")
ALPHA_SOURCES = ("dantzig", "residual")


class ConfigError(Exception):
    """Raised when configuration loading or validation fails."""

    pass


@dataclass
class CoefficientsConfig:
    """Coefficient design: explicit significant block or a named preset."""

    beta_I: list[float] | None = None
    I: list[int] | None = None
    tail_low: float = -0.5
    tail_high: float = 0.15
    seed: int | None = None


@dataclass
class CorrectionConfig:
    """Instrument construction and kernel settings for the bias correction."""

    u_star_mode: str = "residual"
    a_method: str = "eigen"
    whiten: bool = True
    c_ridge: float | None = None
    bandwidth: float | None = None
    bandwidth_scale: float | None = None
    standardize_v: bool = False
    leave_one_out: bool = False
    alpha_source: str = "dantzig"


@dataclass
class ExperimentConfig:
    """One Monte Carlo design: data model, selection, correction, repetitions."""

    n: int
    p: int
    beta_type: str = "I"
    rho_corr: float = 0.1
    target_r2: float | None = None
    sigma_eps: float | None = None
    S: int | None = None
    reps: int = 200
    lambda_mode: str = "gaussian"
    lambda_m: int = 10
    lambda_value: float | None = None
    varsigma: float = 1e-4
    center_selection: bool = True
    use_sis: bool = False
    d_keep: int | None = None
    d_instr: int = 1
    seed: int = 0
    holdout_n: int = 200
    mean_rule: str = "shifted"
    id: str = "experiment"
    coefficients: CoefficientsConfig = field(default_factory=CoefficientsConfig)
    correction: CorrectionConfig = field(default_factory=CorrectionConfig)

    @property
    def effective_d_keep(self) -> int:
        """Number of columns kept by screening (defaults to n - 1)."""
        return self.d_keep if self.d_keep is not None else self.n - 1


_SCALAR_KEYS = {f.name for f in fields(ExperimentConfig)} - {"coefficients", "correction"}


def _build_section(cls, raw: dict | None, section: str):
    raw = raw or {}
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {unknown}")
    return cls(**raw)


def validate_experiment(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check an ExperimentConfig and return it unchanged.

    Raises:
        ConfigError: On any inconsistent or out-of-range field.
    """
    name = cfg.id
    if cfg.n < 2:
        raise ConfigError(f"{name}: n must be >= 2")
    if cfg.p < 1:
        raise ConfigError(f"{name}: p must be >= 1")
    if cfg.beta_type not in BETA_TYPES:
        raise ConfigError(f"{name}: beta_type must be one of {BETA_TYPES}, got {cfg.beta_type!r}")
    if (cfg.target_r2 is None) == (cfg.sigma_eps is None):
        raise ConfigError(f"{name}: exactly one of target_r2 / sigma_eps must be set")
    if cfg.target_r2 is not None and not 0.0 < cfg.target_r2 <= 1.0:
        raise ConfigError(f"{name}: target_r2 must lie in (0, 1]")
    if cfg.sigma_eps is not None and cfg.sigma_eps < 0:
        raise ConfigError(f"{name}: sigma_eps must be >= 0")
    if not -1.0 < cfg.rho_corr < 1.0:
        raise ConfigError(f"{name}: rho_corr must lie in (-1, 1)")
    if cfg.reps < 1:
        raise ConfigError(f"{name}: reps must be >= 1")
    if cfg.holdout_n < 1:
        raise ConfigError(f"{name}: holdout_n must be >= 1")
    if cfg.d_instr < 1:
        raise ConfigError(f"{name}: d_instr must be >= 1")
    if cfg.varsigma < 0:
        raise ConfigError(f"{name}: varsigma must be >= 0")
    if cfg.lambda_mode not in LAMBDA_MODES:
        raise ConfigError(f"{name}: lambda_mode must be one of {LAMBDA_MODES}")
    if cfg.lambda_mode == "fixed" and (cfg.lambda_value is None or cfg.lambda_value < 0):
        raise ConfigError(f"{name}: lambda_mode 'fixed' needs lambda_value >= 0")
    if cfg.lambda_mode == "gaussian" and cfg.lambda_m < 1:
        raise ConfigError(f"{name}: lambda_m must be >= 1")
    if cfg.use_sis and cfg.effective_d_keep < 1:
        raise ConfigError(f"{name}: d_keep must be >= 1")
    if cfg.mean_rule not in MEAN_RULES:
        raise ConfigError(f"{name}: mean_rule must be one of {MEAN_RULES}")

    coef = cfg.coefficients
    if cfg.beta_type == "custom":
        if not coef.beta_I or not coef.I:
            raise ConfigError(f"{name}: beta_type 'custom' needs coefficients.beta_I and coefficients.I")
        if len(coef.beta_I) != len(coef.I):
            raise ConfigError(f"{name}: coefficients.beta_I and coefficients.I differ in length")
        if cfg.S is not None and cfg.S != len(coef.I):
            raise ConfigError(f"{name}: S={cfg.S} but {len(coef.I)} significant coefficients given")
    elif cfg.S is not None and cfg.S != 7:
        raise ConfigError(f"{name}: beta_type {cfg.beta_type} has S = 7")
    if coef.tail_low >= coef.tail_high:
        raise ConfigError(f"{name}: coefficients.tail_low must be < tail_high")

    corr = cfg.correction
    if corr.u_star_mode not in U_STAR_MODES:
        raise ConfigError(f"{name}: correction.u_star_mode must be one of {U_STAR_MODES}")
    if corr.a_method not in A_METHODS:
        raise ConfigError(f"{name}: correction.a_method must be one of {A_METHODS}")
    if corr.a_method == "row" and cfg.d_instr != 1:
        raise ConfigError(f"{name}: correction.a_method 'row' requires d_instr = 1")
    if corr.alpha_source not in ALPHA_SOURCES:
        raise ConfigError(f"{name}: correction.alpha_source must be one of {ALPHA_SOURCES}")
    for key in ("c_ridge", "bandwidth", "bandwidth_scale"):
        value = getattr(corr, key)
        if value is not None and value <= 0:
            raise ConfigError(f"{name}: correction.{key} must be > 0")
    return cfg


def experiment_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate one ExperimentConfig from a parsed YAML mapping."""
    if not isinstance(raw, dict):
        raise ConfigError("each experiment must be a mapping")
    raw = dict(raw)
    coef_raw = dict(raw.pop("coefficients", None) or {})
    corr_raw = raw.pop("correction", None)
    # beta_type may sit with the other coefficient fields
    if "beta_type" in coef_raw:
        raw.setdefault("beta_type", coef_raw.pop("beta_type"))

    unknown = sorted(set(raw) - _SCALAR_KEYS)
    if unknown:
        raise ConfigError(f"unknown experiment keys {unknown}")
    for key in ("n", "p"):
        if key not in raw:
            raise ConfigError(f"{key} is required")
    if "beta_type" in raw:
        raw["beta_type"] = str(raw["beta_type"])
    if "id" in raw:
        raw["id"] = str(raw["id"])

    try:
        cfg = ExperimentConfig(
            **raw,
            coefficients=_build_section(CoefficientsConfig, coef_raw, "coefficients"),
            correction=_build_section(CorrectionConfig, corr_raw, "correction"),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return validate_experiment(cfg)


def load_experiments(path: str) -> list[ExperimentConfig]:
    """Load and validate experiment configurations from a YAML file.

    The file either holds a single experiment mapping or an
    ``experiments`` list, with an optional ``defaults`` mapping merged
    underneath every entry (entry keys win; nested sections are merged
    key by key).

    Args:
        path: Filesystem path to the YAML configuration file.

    Returns:
        The validated experiments in file order.

    Raises:
        ConfigError: If the file does not exist, is not valid YAML or any
            experiment fails validation.
    """
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {path}")

    try:
        with open(config_path) as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"Invalid YAML in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    # `or {}` fallback handles YAML null values for optional sections
    defaults = raw.get("defaults", {}) or {}
    entries = raw.get("experiments")
    if entries is None:
        entries = [{k: v for k, v in raw.items() if k != "defaults"}]
    if not entries:
        raise ConfigError(f"{path}: experiments must not be empty")

    experiments = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}: experiment #{i + 1} must be a mapping")
        merged = {**defaults, **entry}
        for section in ("coefficients", "correction"):
            if section in defaults or section in entry:
                merged[section] = {**(defaults.get(section) or {}), **(entry.get(section) or {})}
        merged.setdefault("id", f"experiment-{i + 1}")
        experiments.append(experiment_from_dict(merged))

    logger.debug("Loaded %d experiments from %s", len(experiments), path)
    return experiments
