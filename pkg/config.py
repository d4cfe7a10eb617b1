# Configuration settings for the semiparametric conformal calibration toolkit

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields

# Application settings
APP_TITLE = "copconf"

# Report and model persistence
REPORT_SCHEMA_VERSION = 1
MODEL_SCHEMA_VERSION = 1
DATABASE_PATH = "data/reports.db"

# Calibration settings
DEFAULT_ALPHA = 0.1
DEFAULT_SCHEMES = ("independent", "corrected")
DEFAULT_NORM = "l1"
SPLIT_FRACTION = 0.5  # Share of the calibration set used for the marginal ECDFs in split schemes
DEFAULT_FRACTIONS = {"train": 0.5, "cal": 0.25, "test": 0.25}

# Copula settings
DEFAULT_COPULA_KIND = "vine"
DEFAULT_FAMILY_SET = ("independence", "gaussian", "gumbel", "clayton", "frank", "tkde")
DEFAULT_MC_SAMPLES = 20000  # Monte-Carlo draws behind the vine CDF
MIN_PAIR_OBSERVATIONS = 10
MIN_TKDE_OBSERVATIONS = 20
MIN_VINE_OBSERVATIONS = 20
TKDE_GRID_SIZE = 161  # Probit-space grid for the kernel h-inverse
TKDE_GRID_LIMIT = 5.0

# Level-curve optimizer settings
OPTIMIZER_MAX_GENERATIONS = 200
OPTIMIZER_SIGMA0 = 0.1
PENALTY_PER_DIMENSION = 100.0
CONSTRAINT_TOLERANCE = 1e-3
REPAIR_STEP = 1e-3
REPAIR_MC_FACTOR = 4
BOX_LOWER = 0.01
BOX_UPPER = 1.0 - 1e-6
GRADIENT_STEP = 0.01

# Underlying model settings
RIDGE_LAMBDA = 1e-3

# Synthetic data settings
DEFAULT_FEATURES = 7
DEFAULT_RELATIVE_NOISE = 0.10

# Parallel execution
JOBS_ENV_VAR = "COPCONF_JOBS"
DEFAULT_JOBS = 1

VALID_SCHEMES = (
    "independent",
    "scalar-l1", "scalar-l2", "scalar-linf",
    "scalar-l1-split", "scalar-l2-split", "scalar-linf-split",
    "empirical-copula",
    "plugin", "corrected",
    "plugin-split", "corrected-split",
)
VALID_COPULA_KINDS = ("vine", "empirical", "independence")
VALID_NORMS = ("l1", "linf")


@dataclass
class RunConfig:
    """Everything a calibrate or sweep run depends on"""
    alpha: float = DEFAULT_ALPHA
    schemes: list = field(default_factory=lambda: list(DEFAULT_SCHEMES))
    family_set: list = field(default_factory=lambda: list(DEFAULT_FAMILY_SET))
    copula_kind: str = DEFAULT_COPULA_KIND
    mc_samples: int = DEFAULT_MC_SAMPLES
    seeds: list = field(default_factory=lambda: [0])
    fractions: dict = field(default_factory=lambda: dict(DEFAULT_FRACTIONS))
    n_cal: int = None  # Absolute sizes override the fractions when given
    n_test: int = None
    split_fraction: float = SPLIT_FRACTION
    norm: str = DEFAULT_NORM
    ridge_lambda: float = RIDGE_LAMBDA
    data_path: str = None
    targets: list = None
    simulate: dict = None  # SyntheticSpec fields when no data file is given
    out_dir: str = "reports"
    db_path: str = None

    def validate(self):
        """Raise ValueError when the config breaks a run invariant"""
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        unknown = [s for s in self.schemes if s not in VALID_SCHEMES]
        if unknown:
            raise ValueError(f"unknown scheme(s): {', '.join(unknown)}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.copula_kind not in VALID_COPULA_KINDS:
            raise ValueError(f"unknown copula kind: {self.copula_kind}")
        if self.norm not in VALID_NORMS:
            raise ValueError(f"unknown norm: {self.norm}")
        if self.mc_samples < 1000:
            raise ValueError("mc_samples must be at least 1000")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must lie in (0, 1)")
        if any(v <= 0 for v in self.fractions.values()) or sum(self.fractions.values()) > 1.0 + 1e-12:
            raise ValueError("fractions must be positive and sum to at most 1")
        if self.data_path is None and self.simulate is None:
            raise ValueError("either a data file or a simulate section is required")
        if self.data_path is not None and not self.targets:
            raise ValueError("target columns are required with a data file")
        return self

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        """Short SHA-256 of the canonical JSON form; identifies the run settings"""
        payload = self.to_dict()
        # Output locations do not change results
        payload.pop("out_dir", None)
        payload.pop("db_path", None)
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def load_run_config(path=None, overrides=None):
    """Build a RunConfig from an optional JSON file, with non-None overrides winning"""
    values = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as handle:
            values.update(json.load(handle))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
    return RunConfig(**values).validate()


def resolve_jobs(flag_value=None):
    """Worker count: the environment variable beats the --jobs flag"""
    env_value = os.environ.get(JOBS_ENV_VAR)
    if env_value:
        try:
            jobs = int(env_value)
        except ValueError:
            raise ValueError(f"{JOBS_ENV_VAR} must be an integer, got {env_value!r}")
    elif flag_value is not None:
        jobs = int(flag_value)
    else:
        jobs = DEFAULT_JOBS
    if jobs == 0:
        raise ValueError("jobs must be non-zero")
    return jobs
