# kcell_lab/services/support_engine.py
"""
Support functions of H-polytopes.

The support LP  max <x,u>  s.t.  <x,u_i> <= tau_i  is solved through its dual

    min  sum_i b_i lam_i   s.t.   sum_i lam_i u_i = u,  lam >= 0,

with b_i = tau_i - <x0,u_i> > 0 for the known interior point x0. The dual has
only d equality rows, so the dense tableau is (d+1) x (m+d+1) no matter how
many halfspaces there are. An infeasible dual means an unbounded primal.
Pivoting follows Bland's rule; the optimal basis of the previous direction is
reused as a warm start.

Exact 2-D polygons are built from the polar point set {u_i / b_i} with
scipy's ConvexHull: hull vertices are the irredundant halfspaces, consecutive
hull vertices meet in the polygon's vertices.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, QhullError, cKDTree

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import DimensionError, InfeasibleError, KCellError, UnboundedError
from kcell_lab.core.logging import LoggerManager
from kcell_lab.models.geometry import Direction
from kcell_lab.models.polytope import HRep, SupportOutcome, SupportResult, UNBOUNDED

logger = LoggerManager.get_logger(__name__)

PIVOT_TOL = 1e-11


def merge_parallel(normals: np.ndarray, offsets: np.ndarray, guard_mask: np.ndarray,
                   tol: float = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merge constraints whose unit normals are within angle ``tol``, keeping the tighter offset.

    Groups are the connected components of the "closer than tol" relation, so
    near-parallel chains collapse to one constraint.
    """
    if offsets.size < 2:
        return normals, offsets, guard_mask
    tol = tol if tol is not None else get_settings().GEOMETRY_TOL
    # chord length 2 sin(angle / 2)
    pairs = cKDTree(normals).query_pairs(2.0 * np.sin(tol / 2.0), output_type="ndarray")
    if pairs.size == 0:
        return normals, offsets, guard_mask
    m = offsets.size
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    _, labels = connected_components(graph, directed=False)
    order = np.argsort(offsets, kind="stable")
    _, first = np.unique(labels[order], return_index=True)
    keep = np.sort(order[first])
    return normals[keep], offsets[keep], guard_mask[keep]


class DenseSimplex:
    """Dense tableau simplex for  min c^T lam  s.t.  A lam = b, lam >= 0  (few rows).

    Bland's rule: entering column is the lowest index with negative reduced
    cost, ties in the ratio test go to the lowest basic variable index.
    """

    def __init__(self, A: np.ndarray, c: np.ndarray, max_iter: Optional[int] = None):
        self.A = np.asarray(A, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.rows, self.cols = self.A.shape
        self.max_iter = max_iter or 50 * (self.rows + self.cols)
        self.basis: Optional[np.ndarray] = None
        self.iterations = 0

    @staticmethod
    def _pivot(T: np.ndarray, row: int, col: int):
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])

    def _iterate(self, T: np.ndarray, basis: np.ndarray, allowed: int) -> bool:
        """Run pivots on tableau T (last row = reduced costs). False iff unbounded."""
        rows = T.shape[0] - 1
        for _ in range(self.max_iter):
            self.iterations += 1
            reduced = T[-1, :allowed]
            candidates = np.flatnonzero(reduced < -PIVOT_TOL)
            if candidates.size == 0:
                return True
            col = int(candidates[0])
            column = T[:rows, col]
            positive = np.flatnonzero(column > PIVOT_TOL)
            if positive.size == 0:
                return False
            ratios = T[positive, -1] / column[positive]
            best = ratios.min()
            ties = positive[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            row = int(ties[np.argmin(basis[ties])])
            self._pivot(T, row, col)
            basis[row] = col
        raise KCellError("Simplex iteration limit reached", {"rows": self.rows, "cols": self.cols})

    def _phase2_tableau(self, B: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
        """Tableau for basis B if it is primal feasible for rhs b, else None"""
        AB = self.A[:, B]
        try:
            inv = np.linalg.inv(AB)
        except np.linalg.LinAlgError:
            return None
        x_B = inv @ b
        if np.any(x_B < -1e-10):
            return None
        T = np.empty((self.rows + 1, self.cols + 1))
        T[:self.rows, :self.cols] = inv @ self.A
        T[:self.rows, -1] = np.maximum(x_B, 0.0)
        cB = self.c[B]
        T[-1, :self.cols] = self.c - cB @ T[:self.rows, :self.cols]
        T[-1, -1] = -cB @ T[:self.rows, -1]
        return T

    def solve(self, b: np.ndarray, warm_basis: Optional[np.ndarray] = None):
        """Returns (status, lam, basis) with status in {'optimal', 'infeasible', 'unbounded'}"""
        b = np.asarray(b, dtype=float)
        self.iterations = 0

        if warm_basis is not None:
            T = self._phase2_tableau(warm_basis, b)
            if T is not None:
                basis = np.array(warm_basis, dtype=int)
                if not self._iterate(T, basis, self.cols):
                    return "unbounded", None, None
                return "optimal", self._extract(T, basis), basis

        m, n = self.rows, self.cols
        sign = np.where(b < 0, -1.0, 1.0)
        T = np.zeros((m + 1, n + m + 1))
        T[:m, :n] = self.A * sign[:, None]
        T[:m, n:n + m] = np.eye(m)
        T[:m, -1] = b * sign
        basis = np.arange(n, n + m)
        # phase 1 reduced costs: artificials cost 1
        T[-1, :n + m] = 0.0
        T[-1, n:n + m] = 1.0
        T[-1] -= T[:m].sum(axis=0)
        self._iterate(T, basis, n + m)
        if -T[-1, -1] > 1e-9:
            return "infeasible", None, None

        # drive remaining zero-level artificials out of the basis
        keep_rows = []
        for r in range(m):
            if basis[r] >= n:
                nz = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
                if nz.size == 0:
                    continue  # redundant equality row
                self._pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
            keep_rows.append(r)
        keep_rows = np.array(keep_rows, dtype=int)

        T2 = np.zeros((keep_rows.size + 1, n + 1))
        T2[:-1, :n] = T[keep_rows, :n]
        T2[:-1, -1] = T[keep_rows, -1]
        basis = basis[keep_rows]
        cB = self.c[basis]
        T2[-1, :n] = self.c - cB @ T2[:-1, :n]
        T2[-1, -1] = -cB @ T2[:-1, -1]
        if not self._iterate(T2, basis, n):
            return "unbounded", None, None
        return "optimal", self._extract(T2, basis), basis

    def _extract(self, T: np.ndarray, basis: np.ndarray) -> np.ndarray:
        lam = np.zeros(self.cols)
        lam[basis] = T[:-1, -1]
        return lam


class SupportEngine:
    """Support-function evaluator for one HRep; the workspace belongs to one thread"""

    def __init__(self, rep: HRep, merge: bool = True):
        self.rep = rep
        settings = get_settings()
        self.tol = settings.GEOMETRY_TOL
        normals, offsets, guard = rep.normals, rep.offsets, rep.guard_mask
        if merge:
            normals, offsets, guard = merge_parallel(normals, offsets, guard)
        self.normals = normals
        self.offsets = offsets
        self.guard = guard
        self.x0 = rep.interior
        self.slack = offsets - normals @ self.x0
        if np.any(self.slack <= 0):
            raise InfeasibleError("interior point is not strictly feasible")
        self._simplex = DenseSimplex(normals.T, self.slack) if offsets.size else None
        self._basis: Optional[np.ndarray] = None

    def support(self, u) -> SupportOutcome:
        u = u.coords if isinstance(u, Direction) else np.asarray(u, dtype=float)
        if self._simplex is None:
            return UNBOUNDED
        warm = self._basis if (self._basis is not None and self._basis.size == u.size) else None
        status, lam, basis = self._simplex.solve(u, warm_basis=warm)
        if status != "optimal":
            return UNBOUNDED
        self._basis = basis
        y = self._primal_point(basis, u, lam)
        x = self.x0 + y
        value = float(np.dot(self.slack, lam) + np.dot(self.x0, u))
        active = bool(np.any(self.guard) and
                      np.any(self.normals[self.guard] @ x >= self.offsets[self.guard] - self.tol))
        return SupportResult(value=value, active_guard=active, argmax=tuple(x))

    def _primal_point(self, basis: np.ndarray, u: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Primal optimum: tight constraints of the basis, complementary slackness"""
        NB = self.normals[basis]
        if basis.size == u.size:
            try:
                return np.linalg.solve(NB, self.slack[basis])
            except np.linalg.LinAlgError:
                pass
        y, *_ = np.linalg.lstsq(NB, self.slack[basis], rcond=None)
        return y

    def support_many(self, U: np.ndarray):
        """Vectorized over directions: (values, active_guard, unbounded) arrays"""
        U = np.atleast_2d(U)
        values = np.empty(U.shape[0])
        active = np.zeros(U.shape[0], dtype=bool)
        unbounded = np.zeros(U.shape[0], dtype=bool)
        argmax = np.zeros_like(U)
        for i, u in enumerate(U):
            res = self.support(u)
            if res is UNBOUNDED:
                unbounded[i] = True
                values[i] = np.inf
                argmax[i] = np.nan
            else:
                values[i] = res.value
                active[i] = res.active_guard
                argmax[i] = res.argmax
        return values, active, unbounded, argmax


def support_hrep(rep: HRep, u) -> SupportOutcome:
    """max <x,u> over the H-polytope; UNBOUNDED when no guard stops the LP"""
    return SupportEngine(rep).support(u)


def _polygon_cycle(rep: HRep) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(vertices ccw, indices of irredundant rows into the merged arrays, guard flags of those rows)"""
    if rep.dim != 2:
        raise DimensionError(2, rep.dim)
    normals, offsets, guard = merge_parallel(rep.normals, rep.offsets, rep.guard_mask)
    x0 = rep.interior
    slack = offsets - normals @ x0
    if slack.size < 3:
        raise UnboundedError()
    polar = normals / slack[:, None]
    try:
        hull = ConvexHull(polar)
    except QhullError as e:
        logger.debug(f"Polar hull failed: {e}")
        raise UnboundedError()
    # origin must be interior to the polar hull for a bounded polygon
    if np.any(hull.equations[:, -1] >= -1e-12):
        raise UnboundedError()
    idx = hull.vertices  # counterclockwise in 2-D
    a = normals[idx]
    b = slack[idx]
    a_next = np.roll(a, -1, axis=0)
    b_next = np.roll(b, -1)
    det = a[:, 0] * a_next[:, 1] - a[:, 1] * a_next[:, 0]
    vx = (b * a_next[:, 1] - b_next * a[:, 1]) / det
    vy = (a[:, 0] * b_next - a_next[:, 0] * b) / det
    vertices = np.column_stack([vx, vy]) + x0
    return vertices, idx, guard[idx]


def polygon_from_halfspaces_2d(rep: HRep) -> np.ndarray:
    """Counterclockwise vertex cycle of a bounded 2-D halfspace intersection"""
    vertices, _, _ = _polygon_cycle(rep)
    return vertices


def polygon_with_guard_flags(rep: HRep) -> Tuple[np.ndarray, bool]:
    """Vertex cycle and whether any guard facet survives as an edge"""
    vertices, _, guard_flags = _polygon_cycle(rep)
    return vertices, bool(np.any(guard_flags))


def polar_hrep(points: Sequence[Sequence[float]], boxguard=None) -> HRep:
    """{y : <y,x_i> <= 1} as an HRep with interior point o"""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    norms = np.linalg.norm(pts, axis=1)
    keep = norms > 0
    pts, norms = pts[keep], norms[keep]
    d = pts.shape[1]
    return HRep.build(pts / norms[:, None], 1.0 / norms, np.zeros(d), boxguard)


def polar_support(points: Sequence[Sequence[float]], u) -> SupportOutcome:
    """h(P°, u) for P = conv(points): max <y,u> s.t. <y,x_i> <= 1"""
    return support_hrep(polar_hrep(points), u)


def hrep_circumradius(rep: HRep, directions: np.ndarray, max_refine: int = 20) -> float:
    """max ||x|| over the polytope (vertex-attained); raises UnboundedError"""
    if rep.dim == 2:
        vertices = polygon_from_halfspaces_2d(rep)
        return float(np.linalg.norm(vertices, axis=1).max())
    engine = SupportEngine(rep)
    values, _, unbounded, argmax = engine.support_many(directions)
    if np.any(unbounded):
        raise UnboundedError(directions[int(np.argmax(unbounded))])
    norms = np.linalg.norm(argmax, axis=1)
    best = float(norms.max())
    point = argmax[int(np.argmax(norms))]
    for _ in range(max_refine):
        if best == 0.0:
            break
        res = engine.support(point / best)
        if res is UNBOUNDED:
            raise UnboundedError(point / best)
        candidate = np.asarray(res.argmax)
        norm = float(np.linalg.norm(candidate))
        if norm <= best + 1e-12:
            break
        best, point = norm, candidate
    return best
