# Geometry first; polytope and samples depend on it
from .geometry import (
    Ball,
    ConvexBody,
    Direction,
    HPolytope,
    Hyperplane,
    SupportCombo,
    VPolytope,
    Window,
    WindowKind,
)
from .polytope import UNBOUNDED, CellSource, HRep, KCell, SupportResult
from .quadrature import QuadratureScheme, SphericalQuadrature
from .samples import HyperplaneSample, MarkSet, RngStream
from .campaign import (
    Campaign,
    CampaignConfig,
    ExperimentKind,
    GapEstimate,
    RateFit,
    ResultRow,
    SuiteReport,
)

__all__ = [
    "Ball",
    "ConvexBody",
    "Direction",
    "HPolytope",
    "Hyperplane",
    "SupportCombo",
    "VPolytope",
    "Window",
    "WindowKind",
    "UNBOUNDED",
    "CellSource",
    "HRep",
    "KCell",
    "SupportResult",
    "QuadratureScheme",
    "SphericalQuadrature",
    "HyperplaneSample",
    "MarkSet",
    "RngStream",
    "Campaign",
    "CampaignConfig",
    "ExperimentKind",
    "GapEstimate",
    "RateFit",
    "ResultRow",
    "SuiteReport",
]
