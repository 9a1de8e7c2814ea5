# kcell_lab/models/quadrature.py
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Any

import numpy as np

from kcell_lab.core.exceptions import ValidationError


class QuadratureScheme(Enum):
    EXACT_2D = "exact_2d"
    UNIFORM_ANGLES_2D = "uniform_angles_2d"
    SPHERICAL_DESIGN_3D = "spherical_design_3d"
    QMC = "qmc"


@dataclass(frozen=True, eq=False)
class SphericalQuadrature:
    """Weighted node set approximating the normalized spherical measure sigma"""
    nodes: np.ndarray
    weights: np.ndarray
    scheme: QuadratureScheme
    size_param: int

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[0] != weights.size:
            raise ValidationError("nodes and weights do not match", field="nodes")
        if np.any(weights < 0):
            raise ValidationError("quadrature weights must be nonnegative", field="weights")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValidationError("quadrature weights must sum to 1", field="weights")
        if np.any(np.abs(np.linalg.norm(nodes, axis=1) - 1.0) > 1e-12):
            raise ValidationError("quadrature nodes must be unit vectors", field="nodes")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def exact(self) -> bool:
        """Exact closed forms (perimeter/pi, 2*rho, linearity) are preferred"""
        return self.scheme is QuadratureScheme.EXACT_2D

    @property
    def key(self):
        return (self.scheme.value, self.dim, self.size_param)

    def integrate(self, values: np.ndarray) -> float:
        """sum_i w_i f(u_i)"""
        return float(np.dot(self.weights, values))

    def to_dict(self) -> Dict[str, Any]:
        return {"scheme": self.scheme.value, "dim": self.dim, "nodes": int(self.nodes.shape[0])}
