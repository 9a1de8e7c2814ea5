# kcell_lab/models/campaign.py
"""
Campaign configuration (validated with pydantic) and result records
"""

import json
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError as PydanticValidationError
from pydantic import field_validator, model_validator

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import ConfigValidationError, ValidationError
from kcell_lab.core.logging import LoggerManager
from kcell_lab.models.geometry import ConvexBody, body_from_dict

logger = LoggerManager.get_logger(__name__)


class ExperimentKind(str, Enum):
    GAP = "gap"
    RATE = "rate"
    EQUIV = "equiv"
    CONCAVITY = "concavity"
    TAIL = "tail"
    LOWERBOUND = "lowerbound"
    CONTRACTION = "contraction"
    EXTREMALITY = "extremality"
    HULLDEFICIT = "hulldeficit"
    IDENTITIES = "identities"


class WindowOverride(BaseModel):
    kind: str = "ball"
    factor: Optional[float] = None
    radius: Optional[float] = None

    @field_validator("kind")
    @classmethod
    def validate_kind(cls, v):
        if v not in ("ball", "box"):
            raise ValueError("window kind must be 'ball' or 'box'")
        return v

    @field_validator("factor", "radius")
    @classmethod
    def validate_positive(cls, v):
        if v is not None and not v > 0:
            raise ValueError("must be positive")
        return v


class QuadratureOverride(BaseModel):
    scheme: Optional[str] = None
    size: Optional[int] = None

    @field_validator("size")
    @classmethod
    def validate_size(cls, v):
        if v is not None and v < 2:
            raise ValueError("quadrature size must be at least 2")
        return v


class OutputOptions(BaseModel):
    csv: bool = True
    json_summary: bool = Field(default=True, alias="json")
    svg: bool = True

    model_config = {"populate_by_name": True}


class CampaignConfig(BaseModel):
    """One campaign file. Bodies stay as JSON here and are parsed by ``load_campaign``."""

    campaign_id: str = "campaign"
    experiment: ExperimentKind
    body: Dict[str, Any] = Field(default_factory=lambda: {"type": "ball", "center": [0.0, 0.0], "radius": 1.0})
    second_body: Optional[Dict[str, Any]] = None
    d: int = 2
    n_grid: List[float] = Field(default_factory=lambda: [16.0, 32.0, 64.0, 128.0])
    reps: int = 1000
    master_seed: int = 0

    alpha_grid: List[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75])
    x_grid: Optional[List[float]] = None
    tail_b: float = 1.0
    min_tail_count: int = 20
    inner_radius: Optional[float] = None
    mismatched_radius: Optional[float] = None
    inflate: float = 1.0
    oracle_points: int = 1_000_000
    expected_slope: Optional[float] = None
    slope_tolerance: float = 0.1
    slope_range: Optional[Tuple[float, float]] = None
    ratio_band: float = 3.0

    window: WindowOverride = Field(default_factory=WindowOverride)
    quadrature: QuadratureOverride = Field(default_factory=QuadratureOverride)
    outputs: OutputOptions = Field(default_factory=OutputOptions)
    check: bool = False

    @field_validator("campaign_id")
    @classmethod
    def validate_campaign_id(cls, v):
        if not v or any(c in v for c in "/\\:"):
            raise ValueError("campaign_id must be a plain file stem")
        return v

    @field_validator("d")
    @classmethod
    def validate_dimension(cls, v):
        max_d = get_settings().MAX_DIMENSION
        if not 2 <= v <= max_d:
            raise ValueError(f"dimension must lie in [2, {max_d}]")
        return v

    @field_validator("n_grid")
    @classmethod
    def validate_n_grid(cls, v):
        if not v:
            raise ValueError("n_grid must not be empty")
        if any(not n > 0 for n in v):
            raise ValueError("intensities must be positive")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("n_grid must be strictly increasing")
        return v

    @field_validator("reps")
    @classmethod
    def validate_reps(cls, v):
        if v < 2:
            raise ValueError("reps must be at least 2")
        return v

    @field_validator("master_seed")
    @classmethod
    def validate_seed(cls, v):
        if not 0 <= v < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        return v

    @field_validator("alpha_grid")
    @classmethod
    def validate_alpha_grid(cls, v):
        if any(not 0.0 <= a <= 1.0 for a in v):
            raise ValueError("alpha values must lie in [0, 1]")
        return v

    @field_validator("inner_radius", "mismatched_radius")
    @classmethod
    def validate_inner_radius(cls, v):
        if v is not None and not 0.0 < v < 1.0:
            raise ValueError("inner radius must lie in (0, 1)")
        return v

    @model_validator(mode="after")
    def validate_experiment_needs(self):
        if self.experiment in (ExperimentKind.CONCAVITY, ExperimentKind.CONTRACTION) and self.second_body is None:
            raise ValueError(f"experiment '{self.experiment.value}' needs second_body")
        if self.experiment in (ExperimentKind.RATE, ExperimentKind.HULLDEFICIT) and len(self.n_grid) < 4:
            raise ValueError("rate fits need at least 4 grid points")
        return self


@dataclass
class Campaign:
    """A validated config together with its parsed bodies"""
    config: CampaignConfig
    body: ConvexBody
    second_body: Optional[ConvexBody] = None
    source: Optional[Path] = None

    @property
    def campaign_id(self) -> str:
        return self.config.campaign_id


def _pydantic_errors(exc: PydanticValidationError) -> List[Tuple[str, str]]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "config"
        out.append((loc, err.get("msg", "invalid value")))
    return out


def campaign_from_dict(data: Dict[str, Any], source: Optional[Path] = None) -> Campaign:
    """Validate a campaign mapping; every violated field is reported together"""
    if not isinstance(data, dict):
        raise ConfigValidationError([("config", "top level must be a JSON object")])
    errors: List[Tuple[str, str]] = []
    config = None
    try:
        config = CampaignConfig.model_validate(data)
    except PydanticValidationError as e:
        errors.extend(_pydantic_errors(e))

    bodies = {}
    raw_bodies = {"body": data.get("body", {"type": "ball", "center": [0.0, 0.0], "radius": 1.0}),
                  "second_body": data.get("second_body")}
    for key, raw in raw_bodies.items():
        if raw is None:
            continue
        try:
            bodies[key] = body_from_dict(raw, key)
        except ValidationError as e:
            errors.append((e.field or key, e.message))

    if config is not None:
        for key, body in bodies.items():
            if body.dim != config.d:
                errors.append((key, f"body dimension {body.dim} does not match d={config.d}"))
    if errors:
        raise ConfigValidationError(errors)

    if config.d > 3:
        logger.warning(f"Campaign {config.campaign_id}: d={config.d} uses QMC quadrature; "
                       "exact acceptance targets cover d in {2, 3} only")
    return Campaign(config, bodies["body"], bodies.get("second_body"), source)


def load_campaign(path) -> Campaign:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigValidationError([("config", f"file not found: {path}")])
    except json.JSONDecodeError as e:
        raise ConfigValidationError([("config", f"invalid JSON at line {e.lineno}: {e.msg}")])
    return campaign_from_dict(data, path)


# ----------------------------------------------------------------------------
# Result records
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class GapEstimate:
    """One row of a rate experiment: E W(Z_K) - W(K) at intensity n"""
    n: float
    reps: int
    mean_gap: float
    stderr: float
    truncation_count: int
    wall_time: float = 0.0

    @classmethod
    def from_values(cls, n: float, values: np.ndarray, truncation_count: int,
                    wall_time: float = 0.0) -> "GapEstimate":
        values = np.asarray(values, dtype=float)
        reps = values.size
        stderr = float(values.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
        return cls(float(n), int(reps), float(values.mean()), stderr, int(truncation_count), float(wall_time))

    @property
    def truncation_frequency(self) -> float:
        return self.truncation_count / self.reps if self.reps else 0.0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["truncation_frequency"] = self.truncation_frequency
        return data


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_ci_95: Tuple[float, float]
    n_grid: List[float]
    residuals: List[float]

    def contains(self, target: float, tolerance: float) -> bool:
        return abs(self.slope - target) <= tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_ci_95": list(self.slope_ci_95),
            "n_grid": list(self.n_grid),
            "residuals": list(self.residuals),
        }


@dataclass(frozen=True)
class ResultRow:
    """CSV row payload; ``label`` lands in the experiment column"""
    label: str
    n: float
    reps: int
    mean: float
    stderr: float
    trunc_count: int

    @classmethod
    def from_gap(cls, label: str, est: GapEstimate) -> "ResultRow":
        return cls(label, est.n, est.reps, est.mean_gap, est.stderr, est.truncation_count)


@dataclass
class SuiteReport:
    """Outcome of a property suite; ``metrics`` goes to the JSON summary"""
    name: str
    passed: bool
    metrics: Dict[str, Any] = field(default_factory=dict)
    rows: List[ResultRow] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)

    def fail(self, message: str):
        self.passed = False
        self.failures.append(message)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "failures": list(self.failures),
            "metrics": self.metrics,
        }
