"""Finite-size scaling of dE_v/dlambda: pseudo-critical point, log laws, data collapse."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Iterable, Sequence

import numpy as np

from .entanglement import entropy_derivative

__all__ = [
    "LAMBDA_C",
    "FitError",
    "CollapseError",
    "BoundaryMaximumError",
    "LambdaMResult",
    "ScalingFit",
    "CollapseCurve",
    "CollapseResult",
    "golden_section_max",
    "locate_lambda_m",
    "fit_power_law",
    "fit_log_in_N",
    "fit_log_in_lambda",
    "collapse_residual",
    "data_collapse",
    "sample_collapse_curve",
]

LAMBDA_C = 1.0
MIN_FIT_POINTS = 4
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class FitError(ValueError):
    pass


class CollapseError(ValueError):
    pass


class BoundaryMaximumError(ArithmeticError):
    """The maximum of dE_v/dlambda stays on the edge of the search bracket."""


@dataclass(frozen=True)
class LambdaMResult:
    n: int
    lambda_m: float
    derivative_at_max: float
    bracket_width: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScalingFit:
    """Straight-line fit ``y' = slope * x' + intercept`` in transformed coordinates.

    For power laws ``exponent`` is the slope and ``amplitude = exp(intercept)``;
    for logarithmic laws ``amplitude`` is the slope and ``exponent`` is None.
    """

    exponent: float | None
    amplitude: float
    intercept: float
    r_squared: float
    window: str
    n_points: int

    @property
    def slope(self) -> float:
        return self.exponent if self.exponent is not None else self.amplitude

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CollapseCurve:
    """One system size: couplings, dE_v/dlambda values, and the collapse centre."""

    n: int
    lam: np.ndarray
    y: np.ndarray
    center: float
    y_center: float


@dataclass(frozen=True)
class CollapseResult:
    nu: float
    residual: float
    nu_grid: tuple[float, float, int]
    curves_used: list[int]
    grid_residuals: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


# --- pseudo-critical point -------------------------------------------------

def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float,
                       max_iter: int = 500) -> tuple[float, float, float, float]:
    """Maximize a unimodal ``f`` on [a, b].

    Returns ``(x, f(x), a_final, b_final)`` with ``b_final - a_final <= tol``.
    """
    if not b > a:
        raise ValueError("empty bracket")
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    if fc >= fd:
        return c, fc, a, b
    return d, fd, a, b


def _scan_then_refine(f, lo: float, hi: float, tol: float, points: int):
    grid = np.linspace(lo, hi, points)
    vals = np.array([f(x) for x in grid])
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, points - 1)]
    x, fx, a, b = golden_section_max(f, a, b, tol)
    return x, fx, a, b, k in (0, points - 1)


def locate_lambda_m(n: int, tol: float | None = None, scan_points: int = 32) -> LambdaMResult:
    """Coupling that maximizes dE_v/dlambda for a chain of ``n`` sites.

    A 32-point scan of [max(0.5, 1 - 10/n), 1] picks the bracket, golden-section
    search narrows it to ``tol`` (default ``1e-3 * n**-1.5``). A maximum on the
    scan edge triggers one wider retry before :class:`BoundaryMaximumError`.
    """
    if n < 8:
        raise ValueError(f"locate_lambda_m needs n >= 8, got {n}")
    if tol is None:
        tol = 1e-3 * n**-1.5
    if tol <= 0:
        raise ValueError("tol must be positive")

    def f(lam):
        return entropy_derivative(lam, n)

    lo, hi = max(0.5, 1.0 - 10.0 / n), 1.0
    x, fx, a, b, edge = _scan_then_refine(f, lo, hi, tol, scan_points)
    if edge:
        lo, hi = max(0.5, 1.0 - 20.0 / n), 1.0 + 10.0 / n
        x, fx, a, b, edge = _scan_then_refine(f, lo, hi, tol, 2 * scan_points)
        if edge:
            raise BoundaryMaximumError(
                f"dE_v/dlambda maximum for n={n} sits on the edge of [{lo}, {hi}]"
            )
    return LambdaMResult(n, float(x), float(fx), float(b - a))


# --- straight-line fits ----------------------------------------------------

def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), min(max(r2, 0.0), 1.0)


def _as_xy(points: Iterable[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(list(points), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FitError("points must be (x, y) pairs")
    if arr.shape[0] < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} points, got {arr.shape[0]}")
    return arr[:, 0], arr[:, 1]


def _window(x: np.ndarray, label: str) -> str:
    return f"{label} in [{x.min():.17g}, {x.max():.17g}], {x.size} points"


def fit_power_law(points) -> ScalingFit:
    """Fit ``y = amplitude * N**exponent`` by least squares in log-log space."""
    n, y = _as_xy(points)
    if np.any(y <= 0) or np.any(n <= 0):
        raise FitError("power-law fit needs positive N and y")
    slope, intercept, r2 = _line_fit(np.log(n), np.log(y))
    return ScalingFit(slope, math.exp(intercept), intercept, r2, _window(n, "N"), n.size)


def fit_log_in_N(points) -> ScalingFit:
    """Fit ``y = amplitude * ln N + intercept``."""
    n, y = _as_xy(points)
    if np.any(n <= 0):
        raise FitError("N must be positive")
    slope, intercept, r2 = _line_fit(np.log(n), y)
    return ScalingFit(None, slope, intercept, r2, _window(n, "N"), n.size)


def fit_log_in_lambda(samples, lambda_c: float = LAMBDA_C) -> ScalingFit:
    """Fit ``y = amplitude * ln|lam - lambda_c| + intercept`` on one side of ``lambda_c``."""
    lam, y = _as_xy(samples)
    d = lam - lambda_c
    if np.any(d == 0):
        raise FitError("samples must exclude lambda_c itself")
    if not (np.all(d < 0) or np.all(d > 0)):
        raise FitError("samples must all lie on one side of lambda_c")
    slope, intercept, r2 = _line_fit(np.log(np.abs(d)), y)
    return ScalingFit(None, slope, intercept, r2, _window(lam, "lambda"), lam.size)


# --- data collapse ---------------------------------------------------------

def _transform(curve: CollapseCurve, nu: float) -> tuple[np.ndarray, np.ndarray]:
    x = curve.n ** (1.0 / nu) * (curve.lam - curve.center)
    order = np.argsort(x, kind="stable")
    return x[order], (curve.y - curve.y_center)[order]


def collapse_residual(curves: Sequence[CollapseCurve], nu: float) -> float:
    """Mean squared distance of each point to the other curves' linear interpolants.

    Only points inside the x-range shared by every curve take part.
    """
    data = [_transform(c, nu) for c in curves]
    lo = max(x[0] for x, _ in data)
    hi = min(x[-1] for x, _ in data)
    if not hi > lo:
        raise CollapseError(f"rescaled curves share no x-range at nu={nu!r}")
    total = 0.0
    count = 0
    for i, (xi, yi) in enumerate(data):
        keep = (xi >= lo) & (xi <= hi)
        if not np.any(keep):
            continue
        for j, (xj, yj) in enumerate(data):
            if i == j:
                continue
            diff = yi[keep] - np.interp(xi[keep], xj, yj)
            total += float(np.sum(diff * diff))
            count += int(keep.sum())
    if count == 0:
        raise CollapseError(f"no points in the shared x-range at nu={nu!r}")
    return total / count


def data_collapse(curves: Sequence[CollapseCurve], nu_range: tuple[float, float] = (0.8, 1.2),
                  steps: int = 41) -> CollapseResult:
    """Scan ``nu`` for the best collapse of ``y - y_center`` against ``n**(1/nu) (lam - center)``.

    The grid minimum is refined once by a parabola through it and its neighbours.
    """
    if len(curves) < 3:
        raise CollapseError(f"data collapse needs at least 3 sizes, got {len(curves)}")
    if steps < 3:
        raise ValueError("steps must be >= 3")
    lo, hi = nu_range
    if not 0 < lo < hi:
        raise ValueError(f"bad nu range {nu_range!r}")
    grid = np.linspace(lo, hi, steps)
    res = np.array([collapse_residual(curves, nu) for nu in grid])
    k = int(np.argmin(res))
    nu = float(grid[k])
    best = float(res[k])
    if 0 < k < steps - 1:
        r0, r1, r2 = res[k - 1], res[k], res[k + 1]
        denom = r0 - 2.0 * r1 + r2
        if denom > 0:
            step = grid[1] - grid[0]
            cand = float(grid[k] + 0.5 * step * (r0 - r2) / denom)
            r_cand = collapse_residual(curves, cand)
            if r_cand <= best:
                nu, best = cand, r_cand
    return CollapseResult(
        nu=nu,
        residual=best,
        nu_grid=(float(lo), float(hi), int(steps)),
        curves_used=[int(c.n) for c in curves],
        grid_residuals=[float(r) for r in res],
    )


def sample_collapse_curve(n: int, half_width: float = 1.0, points: int = 41,
                          center: str = "lambda_m", tol: float | None = None) -> CollapseCurve:
    """Sample dE_v/dlambda on ``center +- half_width / n`` including the centre itself.

    ``center`` is ``"lambda_m"`` (the located maximum) or ``"lambda_c"`` (1).
    """
    if points < 3 or points % 2 == 0:
        raise ValueError("points must be odd and >= 3 so the centre is sampled")
    if center == "lambda_m":
        c = locate_lambda_m(n, tol).lambda_m
    elif center == "lambda_c":
        c = LAMBDA_C
    else:
        raise ValueError(f"unknown collapse centre {center!r}")
    offsets = np.linspace(-half_width / n, half_width / n, points)
    lam = c + offsets
    y = np.array([entropy_derivative(float(x), n) for x in lam])
    return CollapseCurve(n, lam, y, c, float(y[points // 2]))
