# kcell_lab/models/samples.py
"""
Random streams and sampled configurations (hyperplane samples, mark sets)
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from kcell_lab.core.exceptions import ValidationError
from kcell_lab.models.geometry import ConvexBody, Direction, Hyperplane, Window

MASK64 = 2**64 - 1


@dataclass(frozen=True)
class RngStream:
    """(master_seed, stream_id) fully determines every draw"""
    master_seed: int
    stream_id: int

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) <= MASK64):
                raise ValidationError(f"{name} must be a 64-bit unsigned integer", field=name)

    def generator(self) -> np.random.Generator:
        """Counter-based Philox generator keyed by the pair"""
        seq = np.random.SeedSequence(entropy=int(self.master_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(seq))

    def child(self, tag: int) -> "RngStream":
        """Independent sub-stream, e.g. one per construction within a replication"""
        return RngStream(self.master_seed, (int(self.stream_id) * 1_000_003 + int(tag) + 1) & MASK64)


@dataclass(frozen=True, eq=False)
class HyperplaneSample:
    """Process hyperplanes missing int K and meeting the window.

    normals[i], offsets[i] are oriented so that <x,u_i> <= tau_i contains K;
    labels[i] are uniform thinning marks in [0,1).
    """
    normals: np.ndarray
    offsets: np.ndarray
    labels: np.ndarray
    window: Window
    body_ref: ConvexBody
    intensity: float
    shift: Optional[np.ndarray] = None  # translation applied to center K before sampling

    def __post_init__(self):
        for name in ("normals", "offsets", "labels"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def count(self) -> int:
        return int(self.offsets.size)

    @property
    def hyperplanes(self) -> List[Hyperplane]:
        return [Hyperplane(Direction(u), t) for u, t in zip(self.normals, self.offsets)]


@dataclass(frozen=True, eq=False)
class MarkSet:
    """Finite set of marks (u, t) on S^{d-1} x [0, t_max]"""
    directions: np.ndarray
    heights: np.ndarray
    t_max: float

    def __post_init__(self):
        directions = np.array(self.directions, dtype=float)
        heights = np.array(self.heights, dtype=float).reshape(-1)
        if directions.ndim != 2 or directions.shape[0] != heights.size:
            raise ValidationError("directions and heights do not match", field="directions")
        if heights.size and (heights.min() < 0 or heights.max() > self.t_max):
            raise ValidationError("mark heights must lie in [0, t_max]", field="heights")
        directions.setflags(write=False)
        heights.setflags(write=False)
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "heights", heights)

    @classmethod
    def from_pairs(cls, pairs, t_max: float) -> "MarkSet":
        dirs = np.array([Direction.of(u).coords for u, _ in pairs])
        heights = np.array([t for _, t in pairs], dtype=float)
        return cls(dirs, heights, t_max)

    @property
    def count(self) -> int:
        return int(self.heights.size)

    def to_dict(self) -> Dict[str, Any]:
        return {"count": self.count, "t_max": self.t_max}
