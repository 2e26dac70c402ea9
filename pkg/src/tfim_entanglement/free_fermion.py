"""Free-fermion ground-state correlators of the periodic transverse-field Ising chain.

The Hamiltonian is

.. math ::
    H = -\\sum_j \\left[\\lambda \\sigma^x_j \\sigma^x_{j+1} + \\sigma^z_j\\right]

with periodic boundary conditions. Finite chains are evaluated as exact momentum
sums over the even-parity (half-odd-integer) grid; the thermodynamic limit is
evaluated by composite Gauss-Legendre quadrature of the same integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "THERMODYNAMIC",
    "ModelPoint",
    "MomentumGrid",
    "CorrelatorSet",
    "CorrelatorDerivatives",
    "QuadratureError",
    "DivergenceError",
    "momentum_grid",
    "dispersion",
    "correlators",
    "correlator_derivatives",
    "ground_energy",
]


class _Thermodynamic:
    """Marker for the infinite chain."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "THERMODYNAMIC"

    def __reduce__(self):
        return (_Thermodynamic, ())


THERMODYNAMIC = _Thermodynamic()

Size = Union[int, _Thermodynamic]


class QuadratureError(ArithmeticError):
    """Thermodynamic-limit quadrature did not reach its tolerance."""


class DivergenceError(ArithmeticError):
    """Requested quantity diverges at this model point."""


@dataclass(frozen=True)
class ModelPoint:
    """Coupling ``lam`` and chain length ``size`` (an int >= 3 or THERMODYNAMIC)."""

    lam: float
    size: Size

    def __post_init__(self):
        lam = float(self.lam)
        if not math.isfinite(lam) or lam < 0:
            raise ValueError(f"coupling must be a finite nonnegative real, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)
        if self.size is THERMODYNAMIC:
            return
        if isinstance(self.size, bool) or not isinstance(self.size, (int, np.integer)):
            raise TypeError(f"size must be an integer or THERMODYNAMIC, got {self.size!r}")
        if self.size < 3:
            raise ValueError(f"chain length must be >= 3, got {self.size}")
        object.__setattr__(self, "size", int(self.size))

    @property
    def is_thermodynamic(self) -> bool:
        return self.size is THERMODYNAMIC


@dataclass(frozen=True)
class MomentumGrid:
    phis: np.ndarray
    parity: int


@dataclass(frozen=True)
class CorrelatorSet:
    """Nearest-neighbour ground-state expectation values.

    Attributes
    ----------
    sz : float
        <sigma^z>
    xx, yy, zz : float
        <sigma^a_0 sigma^a_1> for a = x, y, z. ``zz`` is built from the other three.
    """

    sz: float
    xx: float
    yy: float
    zz: float

    @classmethod
    def from_sums(cls, sz, xx, yy):
        sz, xx, yy = float(sz), float(xx), float(yy)
        return cls(sz, xx, yy, sz * sz - xx * yy)


@dataclass(frozen=True)
class CorrelatorDerivatives:
    """d/dlambda of the entries of a :class:`CorrelatorSet`."""

    d_sz: float
    d_xx: float
    d_yy: float
    d_zz: float

    @classmethod
    def from_sums(cls, c: CorrelatorSet, d_sz, d_xx, d_yy):
        d_sz, d_xx, d_yy = float(d_sz), float(d_xx), float(d_yy)
        return cls(d_sz, d_xx, d_yy, 2.0 * c.sz * d_sz - d_xx * c.yy - c.xx * d_yy)


def momentum_grid(n: int, parity: int = 1) -> MomentumGrid:
    """Momenta ``phi_q = 2 pi q / n`` in [0, 2 pi).

    ``q`` is half-odd-integer for parity +1 and integer for parity -1.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError(f"n must be an integer, got {n!r}")
    if n < 3:
        raise ValueError(f"momentum grid needs n >= 3, got {n}")
    if parity == 1:
        phis = np.pi * (2.0 * np.arange(n) + 1.0) / n
    elif parity == -1:
        phis = 2.0 * np.pi * np.arange(n) / n
    else:
        raise ValueError(f"parity must be +1 or -1, got {parity!r}")
    return MomentumGrid(phis, int(parity))


def dispersion(lam, phi):
    """Single-particle energy ``sqrt(1 + lam^2 - 2 lam cos(phi))``."""
    if np.any(np.asarray(lam) < 0):
        raise ValueError("coupling must be nonnegative")
    # (1 - lam)^2 + 2 lam (1 - cos phi) avoids cancellation near lam = 1, phi = 0
    return np.sqrt((1.0 - lam) ** 2 + 4.0 * lam * np.sin(0.5 * phi) ** 2)


# --- integrands ------------------------------------------------------------

def _value_terms(lam: float, phi: np.ndarray):
    w = dispersion(lam, phi)
    h = np.sin(0.5 * phi) ** 2
    # 1 - lam cos(phi) and lam - cos(phi) written without cancellation near phi = 0
    return (
        ((1.0 - lam) + 2.0 * lam * h) / w,
        ((lam - 1.0) + 2.0 * h) / w,
        (lam * np.cos(2.0 * phi) - np.cos(phi)) / w,
    )


def _derivative_terms(lam: float, phi: np.ndarray):
    # quotient rule with dw/dlam = (lam - cos phi) / w, numerators simplified by hand
    w = dispersion(lam, phi)
    s2 = np.sin(phi) ** 2
    w3 = w * w * w
    return (
        -lam * s2 / w3,
        s2 / w3,
        s2 * (2.0 * lam * np.cos(phi) - 1.0) / w3,
    )


# --- thermodynamic quadrature ----------------------------------------------

_GL_HIGH = np.polynomial.legendre.leggauss(32)
_GL_LOW = np.polynomial.legendre.leggauss(24)

QUAD_RTOL = 1e-12
#: thermodynamic derivatives are refused this close to lambda = 1
CRITICAL_EXCLUSION = 1e-12


def _panel_edges(lam: float) -> np.ndarray:
    """Breakpoints on [0, pi], halving toward phi = 0.

    Near lambda = 1 the integrands vary on the scale |1 - lam| around phi = 0, so
    the halving continues to a thousandth of that scale.
    """
    gap = min(abs(1.0 - lam), 1.0)
    floor = max(gap, 1e-15) * 1e-3
    k = int(math.ceil(math.log2(np.pi / floor)))
    inner = np.pi * 2.0 ** -np.arange(k, 0, -1, dtype=float)
    return np.concatenate(([0.0], inner, [np.pi]))


def _composite_gl(f: Callable, edges: np.ndarray, rule) -> np.ndarray:
    x, w = rule
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    vals = f(nodes)
    return np.array([np.sum(v * weights) for v in vals])


def _average_over_circle(f: Callable, lam: float) -> np.ndarray:
    # all integrands are even about phi = pi, so (1/2pi) int_0^2pi = (1/pi) int_0^pi
    edges = _panel_edges(lam)
    hi = _composite_gl(f, edges, _GL_HIGH) / np.pi
    lo = _composite_gl(f, edges, _GL_LOW) / np.pi
    err = np.abs(hi - lo)
    scale = np.maximum(np.abs(hi), 1e-300)
    bad = err > QUAD_RTOL * np.maximum(scale, 1.0)
    if np.any(bad):
        raise QuadratureError(
            f"quadrature at lambda={lam!r} missed tolerance {QUAD_RTOL:g}: "
            f"estimated errors {err.tolist()}"
        )
    return hi


def _average_over_grid(f: Callable, n: int) -> np.ndarray:
    phis = momentum_grid(n, 1).phis
    # numpy reduces contiguous float arrays pairwise, so the order is fixed
    return np.array([np.sum(v) / n for v in f(phis)])


def _average(f: Callable, point: ModelPoint) -> np.ndarray:
    if point.is_thermodynamic:
        return _average_over_circle(f, point.lam)
    return _average_over_grid(f, point.size)


def _as_point(point, size=None) -> ModelPoint:
    if isinstance(point, ModelPoint):
        return point
    return ModelPoint(point, size)


def correlators(point: ModelPoint | float, size: Size | None = None) -> CorrelatorSet:
    """Ground-state correlators at ``point``.

    Accepts either a :class:`ModelPoint` or ``(lam, size)``.
    """
    point = _as_point(point, size)
    lam = point.lam
    sz, xx, yy = _average(lambda phi: _value_terms(lam, phi), point)
    return CorrelatorSet.from_sums(sz, xx, yy)


def correlator_derivatives(point: ModelPoint | float, size: Size | None = None) -> CorrelatorDerivatives:
    """Analytic d/dlambda of :func:`correlators`.

    The thermodynamic derivatives diverge logarithmically at lambda = 1 and
    raise :class:`DivergenceError` there.
    """
    point = _as_point(point, size)
    lam = point.lam
    if point.is_thermodynamic and abs(lam - 1.0) < CRITICAL_EXCLUSION:
        raise DivergenceError("thermodynamic correlator derivatives diverge at lambda = 1")
    c = correlators(point)
    d_sz, d_xx, d_yy = _average(lambda phi: _derivative_terms(lam, phi), point)
    return CorrelatorDerivatives.from_sums(c, d_sz, d_xx, d_yy)


def ground_energy(point: ModelPoint | float, size: Size | None = None) -> float:
    """Total ground-state energy ``-sum_phi omega_phi`` of a finite chain."""
    point = _as_point(point, size)
    if point.is_thermodynamic:
        raise ValueError("ground_energy is defined for finite chains only")
    phis = momentum_grid(point.size, 1).phis
    return -float(np.sum(dispersion(point.lam, phis)))
