# kcell_lab/services/statistics.py
"""
Tests and fits used by the experiment suites (scipy.stats throughout).
"""

from dataclasses import dataclass
from typing import Dict, Any, List, Sequence, Tuple

import numpy as np
from scipy import stats

from kcell_lab.core.config import get_settings
from kcell_lab.core.exceptions import DegenerateGrid, ValidationError


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    method: str

    def to_dict(self) -> Dict[str, Any]:
        return {"statistic": self.statistic, "p_value": self.p_value, "method": self.method}


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KSResult:
    """Two-sample KS; exact p-values below KS_EXACT_LIMIT samples, asymptotic above"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValidationError("KS test needs two nonempty samples", field="samples")
    method = "exact" if max(a.size, b.size) < get_settings().KS_EXACT_LIMIT else "asymp"
    res = stats.ks_2samp(a, b, method=method)
    return KSResult(float(res.statistic), float(res.pvalue), method)


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_ci_95: Tuple[float, float]
    residuals: List[float]
    stderr: float


def ols_fit(x: Sequence[float], y: Sequence[float]) -> LineFit:
    """Least-squares line with a t-based 95% interval for the slope"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValidationError("x and y differ in length", field="x")
    if x.size < 2 or np.unique(x).size < 2:
        raise DegenerateGrid("regression needs at least two distinct abscissae")
    res = stats.linregress(x, y)
    slope, intercept = float(res.slope), float(res.intercept)
    dof = x.size - 2
    stderr = float(res.stderr) if dof > 0 and np.isfinite(res.stderr) else 0.0
    half = float(stats.t.ppf(0.975, dof)) * stderr if dof > 0 else 0.0
    residuals = (y - (intercept + slope * x)).tolist()
    return LineFit(slope, intercept, (slope - half, slope + half), residuals, stderr)


def survival_curve(values: Sequence[float], thresholds: Sequence[float]) -> np.ndarray:
    """Empirical P(value > threshold) for each threshold"""
    values = np.sort(np.asarray(values, dtype=float))
    thresholds = np.asarray(thresholds, dtype=float)
    above = values.size - np.searchsorted(values, thresholds, side="right")
    return above / max(values.size, 1)


def exceedance_counts(values: Sequence[float], thresholds: Sequence[float]) -> np.ndarray:
    values = np.sort(np.asarray(values, dtype=float))
    return values.size - np.searchsorted(values, np.asarray(thresholds, dtype=float), side="right")


def decay_rate(x: Sequence[float], survival: Sequence[float]) -> LineFit:
    """Fit log S(x) = c - rate * x; the returned slope is -rate"""
    x = np.asarray(x, dtype=float)
    s = np.asarray(survival, dtype=float)
    keep = s > 0
    return ols_fit(x[keep], np.log(s[keep]))


def concave_bends(x: Sequence[float], survival: Sequence[float], reps: int, z: float = 3.0) -> np.ndarray:
    """Grid points where log S bends downward by more than z standard errors.

    The bend at x_i is the change of the secant slope of log S across it.
    Standard errors of log S use the binomial delta method, sqrt((1 - S) / (reps S)).
    Zero survival values are dropped first; returned values index the input grid.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(survival, dtype=float)
    if x.shape != s.shape:
        raise ValidationError("x and survival differ in length", field="survival")
    if reps < 1:
        raise ValidationError("reps must be positive", field="reps")
    idx = np.flatnonzero(s > 0)
    if idx.size < 3:
        return np.zeros(0, dtype=int)
    x, s = x[idx], s[idx]
    log_s = np.log(s)
    se = np.sqrt((1.0 - s) / (reps * s))
    h = np.diff(x)
    bend = np.diff(np.diff(log_s) / h)
    left, right = 1.0 / h[:-1], 1.0 / h[1:]
    tol = z * np.sqrt((left * se[:-2]) ** 2 + ((left + right) * se[1:-1]) ** 2 + (right * se[2:]) ** 2)
    return idx[1:-1][bend < -tol]


def standard_error(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(values.size))
