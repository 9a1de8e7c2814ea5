# kcell_lab/models/geometry.py
"""
Geometric value types: directions, hyperplanes, convex bodies, windows.

All types are immutable after construction. Array-valued fields are stored as
read-only numpy arrays so instances can be shared between threads and
processes without copying.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from kcell_lab.core.exceptions import ValidationError

UNIT_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Direction:
    """Unit vector u on the sphere S^{d-1}"""
    coords: np.ndarray

    def __post_init__(self):
        coords = _frozen(self.coords)
        if coords.ndim != 1 or coords.size < 1:
            raise ValidationError("Direction must be a nonempty vector", field="coords")
        if abs(np.linalg.norm(coords) - 1.0) > UNIT_TOL:
            raise ValidationError("Direction must have unit norm", field="coords")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def of(cls, v: Sequence[float]) -> "Direction":
        """Normalize an arbitrary nonzero vector"""
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValidationError("Cannot normalize the zero vector", field="coords")
        return cls(v / norm)

    @property
    def dim(self) -> int:
        return self.coords.size

    def __neg__(self) -> "Direction":
        return Direction(-self.coords)

    def __repr__(self):
        return f"Direction({np.array2string(self.coords, precision=6)})"


def _canonical_sign(u: np.ndarray) -> float:
    for c in u:
        if abs(c) > UNIT_TOL:
            return 1.0 if c > 0 else -1.0
    return 1.0


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """H(u, tau) = {x : <x,u> = tau}, stored with the first nonzero normal coordinate positive.

    (u, tau) and (-u, -tau) describe the same hyperplane and construct equal
    instances. Halfspaces are chosen explicitly with ``halfspace_towards``.
    """
    normal: Direction
    offset: float

    def __post_init__(self):
        normal = self.normal if isinstance(self.normal, Direction) else Direction.of(self.normal)
        s = _canonical_sign(normal.coords)
        object.__setattr__(self, "normal", normal if s > 0 else -normal)
        object.__setattr__(self, "offset", s * float(self.offset) + 0.0)

    @classmethod
    def of(cls, normal: Sequence[float], offset: float) -> "Hyperplane":
        return cls(Direction.of(normal), offset)

    @property
    def dim(self) -> int:
        return self.normal.dim

    def halfspace_towards(self, point: Sequence[float]) -> Tuple[np.ndarray, float]:
        """(u, tau) with <point,u> <= tau, i.e. the closed halfspace containing ``point``"""
        u = self.normal.coords
        if float(np.dot(u, point)) <= self.offset:
            return u, self.offset
        return -u, -self.offset

    def signed_distance(self, point: Sequence[float]) -> float:
        return float(np.dot(self.normal.coords, point)) - self.offset

    def same_as(self, other: "Hyperplane", tol: float = 1e-9) -> bool:
        return (np.allclose(self.normal.coords, other.normal.coords, atol=tol, rtol=0.0)
                and abs(self.offset - other.offset) <= tol)

    def _key(self) -> Tuple:
        return tuple(np.round(self.normal.coords, 12) + 0.0) + (round(self.offset, 12) + 0.0,)

    def __eq__(self, other):
        if not isinstance(other, Hyperplane):
            return NotImplemented
        return self.same_as(other)

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"Hyperplane(u={np.array2string(self.normal.coords, precision=6)}, tau={self.offset:.6g})"


class BodyKind(Enum):
    BALL = "ball"
    VPOLYTOPE = "vpolytope"
    HPOLYTOPE = "hpolytope"
    COMBO = "combo"


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float
    kind: BodyKind = field(default=BodyKind.BALL, init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        if not self.radius > 0:
            raise ValidationError("Ball radius must be positive", field="radius")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Convex hull of a finite vertex list"""
    vertices: np.ndarray
    kind: BodyKind = field(default=BodyKind.VPOLYTOPE, init=False)

    def __post_init__(self):
        verts = _frozen(self.vertices)
        if verts.ndim != 2 or verts.shape[0] < 1:
            raise ValidationError("VPolytope needs a nonempty (k x d) vertex array", field="vertices")
        object.__setattr__(self, "vertices", verts)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def is_full_dimensional(self, tol: float = 1e-9) -> bool:
        if self.vertices.shape[0] < self.dim + 1:
            return False
        spread = self.vertices[1:] - self.vertices[0]
        return np.linalg.matrix_rank(spread, tol=tol) == self.dim


@dataclass(frozen=True, eq=False)
class HPolytope:
    """{x : <x,u_i> <= tau_i} with a known strictly interior point"""
    normals: np.ndarray
    offsets: np.ndarray
    interior: np.ndarray
    kind: BodyKind = field(default=BodyKind.HPOLYTOPE, init=False)

    def __post_init__(self):
        normals = np.array(self.normals, dtype=float)
        offsets = np.array(self.offsets, dtype=float)
        interior = np.array(self.interior, dtype=float)
        if normals.ndim != 2 or normals.shape[0] != offsets.size:
            raise ValidationError("normals and offsets must have matching lengths", field="normals")
        if interior.size != normals.shape[1]:
            raise ValidationError("interior point has the wrong dimension", field="interior")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms == 0.0):
            raise ValidationError("zero normal vector", field="normals")
        # store unit normals, offsets rescaled accordingly
        normals = normals / norms[:, None]
        offsets = offsets / norms
        if np.any(normals @ interior >= offsets):
            raise ValidationError("interior point must strictly satisfy every constraint", field="interior")
        object.__setattr__(self, "normals", _frozen(normals))
        object.__setattr__(self, "offsets", _frozen(offsets))
        object.__setattr__(self, "interior", _frozen(interior))

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def halfspaces(self) -> List[Hyperplane]:
        """Bounding hyperplanes; the constraint side stays in normals and offsets"""
        return [Hyperplane(Direction(u), t) for u, t in zip(self.normals, self.offsets)]


@dataclass(frozen=True, eq=False)
class SupportCombo:
    """Minkowski combination sum w_i * K_i, realized through h = sum w_i h_i"""
    terms: Tuple[Tuple[float, Any], ...]
    kind: BodyKind = field(default=BodyKind.COMBO, init=False)

    def __post_init__(self):
        terms = tuple((float(w), body) for w, body in self.terms)
        if not terms:
            raise ValidationError("SupportCombo needs at least one term", field="terms")
        if any(w < 0 for w, _ in terms):
            raise ValidationError("SupportCombo weights must be nonnegative", field="terms")
        dims = {body.dim for _, body in terms}
        if len(dims) != 1:
            raise ValidationError("SupportCombo terms have mixed dimensions", field="terms")
        object.__setattr__(self, "terms", terms)

    @property
    def dim(self) -> int:
        return self.terms[0][1].dim


ConvexBody = Union[Ball, VPolytope, HPolytope, SupportCombo]


class WindowKind(Enum):
    BALL = "ball"
    BOX = "box"


@dataclass(frozen=True)
class Window:
    """Sampling window: ball of radius R or cube of half-side R about o"""
    kind: WindowKind
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError("Window radius must be positive", field="radius")

    @classmethod
    def ball(cls, radius: float) -> "Window":
        return cls(WindowKind.BALL, float(radius))

    @classmethod
    def box(cls, radius: float) -> "Window":
        return cls(WindowKind.BOX, float(radius))

    def support_values(self, U: np.ndarray) -> np.ndarray:
        U = np.atleast_2d(U)
        if self.kind is WindowKind.BALL:
            return np.full(U.shape[0], self.radius)
        return self.radius * np.abs(U).sum(axis=1)

    def mean_width(self, d: int) -> float:
        """W(window) under the normalized-sigma convention, W(B^d) = 2"""
        if self.kind is WindowKind.BALL:
            return 2.0 * self.radius
        # cube [-R,R]^d: W = 2R * sum_i E|u_i| = 2R * d * E|u_1|
        from scipy.special import gammaln
        e_abs = np.exp(gammaln(d / 2.0) - gammaln((d + 1) / 2.0)) / np.sqrt(np.pi)
        return 2.0 * self.radius * d * e_abs

    def guard(self, d: int) -> Tuple[np.ndarray, np.ndarray]:
        """Box facets (2d halfspaces) circumscribing the window"""
        eye = np.eye(d)
        normals = np.vstack([eye, -eye])
        offsets = np.full(2 * d, self.radius)
        return normals, offsets

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "radius": self.radius}


# ----------------------------------------------------------------------------
# Constructors and JSON
# ----------------------------------------------------------------------------

def unit_ball(d: int = 2) -> Ball:
    return Ball(np.zeros(d), 1.0)


def unit_square(side: float = 1.0) -> VPolytope:
    h = side / 2.0
    return VPolytope([[-h, -h], [h, -h], [h, h], [-h, h]])


def regular_polygon(k: int, circumradius: float = 1.0, phase: float = 0.0) -> VPolytope:
    angles = phase + 2.0 * np.pi * np.arange(k) / k
    return VPolytope(circumradius * np.column_stack([np.cos(angles), np.sin(angles)]))


def cube(d: int = 3, side: float = 1.0) -> VPolytope:
    h = side / 2.0
    corners = np.array(np.meshgrid(*[[-h, h]] * d, indexing="ij")).reshape(d, -1).T
    return VPolytope(corners)


def translate(body: ConvexBody, v: Sequence[float]) -> ConvexBody:
    v = np.asarray(v, dtype=float)
    if isinstance(body, Ball):
        return Ball(body.center + v, body.radius)
    if isinstance(body, VPolytope):
        return VPolytope(body.vertices + v)
    if isinstance(body, HPolytope):
        return HPolytope(body.normals, body.offsets + body.normals @ v, body.interior + v)
    if isinstance(body, SupportCombo):
        total = sum(w for w, _ in body.terms)
        if total == 0.0:
            return body
        # distribute the shift so that sum w_i v_i = v
        return SupportCombo(tuple((w, translate(b, v / total)) for w, b in body.terms))
    raise ValidationError(f"Unknown body type {type(body).__name__}", field="body")


def _as_vector(value, path: str, dim: int = None) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError("expected a list of numbers", field=path)
    if arr.ndim != 1 or (dim is not None and arr.size != dim):
        raise ValidationError(f"expected a vector of length {dim}", field=path)
    return arr


def body_from_dict(data: Dict[str, Any], path: str = "body") -> ConvexBody:
    """Parse a body from its JSON form; errors carry the dotted field path"""
    if not isinstance(data, dict):
        raise ValidationError("body must be an object", field=path)
    kind = data.get("type")
    if kind == "ball":
        if "radius" not in data:
            raise ValidationError("missing field", field=f"{path}.radius")
        center = _as_vector(data.get("center", [0.0, 0.0]), f"{path}.center")
        try:
            return Ball(center, float(data["radius"]))
        except (TypeError, ValueError):
            raise ValidationError("radius must be a number", field=f"{path}.radius")
        except ValidationError as e:
            raise ValidationError(e.message, field=f"{path}.radius")
    if kind == "vpolytope":
        try:
            verts = np.asarray(data["vertices"], dtype=float)
        except KeyError:
            raise ValidationError("missing field", field=f"{path}.vertices")
        except (TypeError, ValueError):
            raise ValidationError("vertices must be a list of equal-length vectors", field=f"{path}.vertices")
        try:
            body = VPolytope(verts)
        except ValidationError as e:
            raise ValidationError(e.message, field=f"{path}.vertices")
        if not body.is_full_dimensional():
            raise ValidationError("vertices must span a d-dimensional body", field=f"{path}.vertices")
        return body
    if kind == "hpolytope":
        for key in ("normals", "offsets", "interior"):
            if key not in data:
                raise ValidationError("missing field", field=f"{path}.{key}")
        try:
            return HPolytope(np.asarray(data["normals"], dtype=float),
                             np.asarray(data["offsets"], dtype=float),
                             np.asarray(data["interior"], dtype=float))
        except (TypeError, ValueError):
            raise ValidationError("normals/offsets/interior must be numeric", field=path)
        except ValidationError as e:
            raise ValidationError(e.message, field=f"{path}.{e.field}")
    if kind == "square":
        return unit_square(float(data.get("side", 1.0)))
    if kind == "polygon":
        return regular_polygon(int(data.get("sides", 6)), float(data.get("circumradius", 1.0)))
    if kind == "cube":
        return cube(int(data.get("dim", 3)), float(data.get("side", 1.0)))
    if kind == "combo":
        terms = data.get("terms")
        if not isinstance(terms, list) or not terms:
            raise ValidationError("terms must be a nonempty list", field=f"{path}.terms")
        parsed = []
        for i, term in enumerate(terms):
            if not isinstance(term, dict) or "weight" not in term or "body" not in term:
                raise ValidationError("term needs weight and body", field=f"{path}.terms.{i}")
            parsed.append((float(term["weight"]), body_from_dict(term["body"], f"{path}.terms.{i}.body")))
        try:
            return SupportCombo(tuple(parsed))
        except ValidationError as e:
            raise ValidationError(e.message, field=f"{path}.terms")
    raise ValidationError(f"unknown body type {kind!r}", field=f"{path}.type")


def body_to_dict(body: ConvexBody) -> Dict[str, Any]:
    if isinstance(body, Ball):
        return {"type": "ball", "center": body.center.tolist(), "radius": body.radius}
    if isinstance(body, VPolytope):
        return {"type": "vpolytope", "vertices": body.vertices.tolist()}
    if isinstance(body, HPolytope):
        return {"type": "hpolytope", "normals": body.normals.tolist(),
                "offsets": body.offsets.tolist(), "interior": body.interior.tolist()}
    return {"type": "combo",
            "terms": [{"weight": w, "body": body_to_dict(b)} for w, b in body.terms]}


def body_label(body: ConvexBody) -> str:
    """Short stable label for CSV rows"""
    if isinstance(body, Ball):
        return f"ball(r={body.radius:g})"
    if isinstance(body, VPolytope):
        return f"vpolytope[{body.vertices.shape[0]}]"
    if isinstance(body, HPolytope):
        return f"hpolytope[{body.normals.shape[0]}]"
    return "combo(" + "+".join(f"{w:g}*{body_label(b)}" for w, b in body.terms) + ")"
