# kcell_lab/models/polytope.py
"""
Halfspace representations, support-LP results and K-cells
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from kcell_lab.core.exceptions import InfeasibleError, ValidationError
from kcell_lab.models.geometry import ConvexBody, Window, body_label


class _Unbounded:
    """Marker returned by support LPs whose objective is unbounded"""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __bool__(self):
        return False

    def __reduce__(self):
        return (_Unbounded, ())


UNBOUNDED = _Unbounded()


@dataclass(frozen=True)
class SupportResult:
    value: float
    active_guard: bool = False
    argmax: Optional[Tuple[float, ...]] = None


SupportOutcome = Union[SupportResult, _Unbounded]


@dataclass(frozen=True, eq=False)
class HRep:
    """Constraints <x,u_i> <= tau_i; guard rows (box facets) are flagged"""
    normals: np.ndarray
    offsets: np.ndarray
    interior: np.ndarray
    guard_mask: np.ndarray
    boxguard: Optional[Window] = None

    def __post_init__(self):
        normals = np.array(self.normals, dtype=float).reshape(-1, np.size(self.interior))
        offsets = np.array(self.offsets, dtype=float).reshape(-1)
        guard_mask = np.array(self.guard_mask, dtype=bool).reshape(-1)
        interior = np.array(self.interior, dtype=float).reshape(-1)
        if not (normals.shape[0] == offsets.size == guard_mask.size):
            raise ValidationError("HRep arrays have inconsistent lengths", field="normals")
        if normals.shape[0] and np.any(normals @ interior >= offsets):
            raise InfeasibleError("interior point violates an HRep constraint")
        for name, arr in (("normals", normals), ("offsets", offsets),
                          ("interior", interior), ("guard_mask", guard_mask)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def build(cls, normals, offsets, interior, boxguard: Optional[Window] = None) -> "HRep":
        interior = np.asarray(interior, dtype=float)
        d = interior.size
        normals = np.asarray(normals, dtype=float).reshape(-1, d)
        offsets = np.asarray(offsets, dtype=float).reshape(-1)
        mask = np.zeros(offsets.size, dtype=bool)
        if boxguard is not None:
            g_normals, g_offsets = boxguard.guard(d)
            normals = np.vstack([normals, g_normals])
            offsets = np.concatenate([offsets, g_offsets])
            mask = np.concatenate([mask, np.ones(g_offsets.size, dtype=bool)])
        return cls(normals, offsets, interior, mask, boxguard)

    @property
    def dim(self) -> int:
        return self.interior.size

    @property
    def size(self) -> int:
        return self.offsets.size

    @property
    def process_count(self) -> int:
        return int(np.count_nonzero(~self.guard_mask))

    def translated(self, v) -> "HRep":
        """The region shifted by v (guard rows shift with it)"""
        v = np.asarray(v, dtype=float)
        return HRep(self.normals, self.offsets + self.normals @ v, self.interior + v,
                    self.guard_mask, self.boxguard)

    def contains(self, x, tol: float = 1e-9) -> bool:
        return bool(np.all(self.normals @ np.asarray(x, dtype=float) <= self.offsets + tol))


class CellSource(Enum):
    HYPERPLANE_PROCESS = "hyperplane_process"
    MARK_COUPLING = "mark_coupling"
    POLAR_POINTS = "polar_points"


@dataclass(frozen=True, eq=False)
class KCell:
    """Random polytope Z_K in halfspace form"""
    hrep: HRep
    truncated: bool
    source: CellSource
    body_ref: Optional[ConvexBody]
    vertices: Optional[np.ndarray] = None  # counterclockwise cycle, d = 2 only
    support_cache: Optional[Tuple[Any, np.ndarray]] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.hrep.dim

    def cached_supports(self, quad_key) -> Optional[np.ndarray]:
        if self.support_cache is not None and self.support_cache[0] == quad_key:
            return self.support_cache[1]
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dim": self.dim,
            "source": self.source.value,
            "truncated": self.truncated,
            "constraints": self.hrep.size,
            "process_constraints": self.hrep.process_count,
            "body": body_label(self.body_ref) if self.body_ref is not None else None,
            "vertex_count": None if self.vertices is None else int(self.vertices.shape[0]),
        }
