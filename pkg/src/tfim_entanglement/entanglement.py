"""Two-site reduced density matrix, its entropy, and the concurrence.

The reduced state of two neighbouring spins has the X form

    [[u+, 0,  0,  z-],
     [0,  w1, z+, 0 ],
     [0,  z+, w2, 0 ],
     [z-, 0,  0,  u-]]

in the basis {uu, ud, du, dd}, fixed entirely by ``<sz>`` and the three
nearest-neighbour correlators. Entropies are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .free_fermion import (
    CRITICAL_EXCLUSION,
    THERMODYNAMIC,
    CorrelatorDerivatives,
    CorrelatorSet,
    DivergenceError,
    ModelPoint,
    correlator_derivatives,
    correlators,
)

__all__ = [
    "NonPhysicalStateError",
    "BranchSwitchError",
    "RdmElements",
    "RdmSpectrum",
    "EntanglementSample",
    "CriticalConstants",
    "build_rdm",
    "rdm_matrix",
    "rdm_spectrum",
    "rdm_spectrum_derivative",
    "von_neumann_entropy",
    "entropy",
    "entropy_derivative",
    "entropy_derivative_ratio_form",
    "critical_spectrum_closed_form",
    "critical_constants",
    "critical_entropy",
    "a1_constant",
    "concurrence_log_constant",
    "critical_derivative_sum",
    "concurrence",
    "concurrence_branch",
    "concurrence_value",
    "concurrence_derivative",
    "wootters_concurrence",
    "richardson_derivative",
    "sample",
]

CLAMP_TOL = 1e-12
ERROR_TOL = 1e-9
#: analytic chain rule is used only when every eigenvalue exceeds this
ANALYTIC_EPS_MIN = 1e-12
BRANCH_TOL = 1e-9


class NonPhysicalStateError(ValueError):
    """Correlators do not describe a positive semidefinite two-site state."""


class BranchSwitchError(ArithmeticError):
    """Concurrence is not differentiable at a switch between its branches."""


def _clamp(x: float, lo: float = 0.0, hi: float = 1.0) -> float:
    # rounding-level excursions are clipped; anything beyond ERROR_TOL is a logic error
    if x < lo - ERROR_TOL or x > hi + ERROR_TOL:
        raise NonPhysicalStateError(f"value {x!r} outside [{lo}, {hi}] beyond rounding")
    return min(max(x, lo), hi)


@dataclass(frozen=True)
class RdmElements:
    u_plus: float
    u_minus: float
    w1: float
    w2: float
    z_plus: float
    z_minus: float

    def matrix(self) -> np.ndarray:
        return rdm_matrix(self)


@dataclass(frozen=True)
class RdmSpectrum:
    """Eigenvalues grouped as (eps1, eps2) from the outer block and (eps3, eps4) from the inner."""

    eps: tuple[float, float, float, float]

    def __iter__(self):
        return iter(self.eps)

    def __getitem__(self, i):
        return self.eps[i]

    def as_array(self) -> np.ndarray:
        return np.array(self.eps)


@dataclass(frozen=True)
class EntanglementSample:
    """One row of a sweep."""

    lam: float
    size: object
    ev: float
    d_ev: float
    conc: float
    d_conc: float


@dataclass(frozen=True)
class CriticalConstants:
    lambda_c: float
    a1: float
    eps_critical: RdmSpectrum


def build_rdm(c: CorrelatorSet) -> RdmElements:
    """Reduced density matrix entries from correlators.

    Raises
    ------
    NonPhysicalStateError
        If the assembled matrix has an eigenvalue below -1e-9.
    """
    for name in ("sz", "xx", "yy", "zz"):
        v = getattr(c, name)
        if not -1.0 - ERROR_TOL <= v <= 1.0 + ERROR_TOL:
            raise NonPhysicalStateError(f"correlator {name}={v!r} outside [-1, 1]")
    w = (1.0 - c.zz) / 4.0
    r = RdmElements(
        u_plus=_clamp((1.0 + 2.0 * c.sz + c.zz) / 4.0),
        u_minus=_clamp((1.0 - 2.0 * c.sz + c.zz) / 4.0),
        w1=_clamp(w),
        w2=_clamp(w),
        z_plus=(c.xx + c.yy) / 4.0,
        z_minus=(c.xx - c.yy) / 4.0,
    )
    _raw_spectrum(c)  # positivity check
    return r


def rdm_matrix(r: RdmElements) -> np.ndarray:
    return np.array(
        [
            [r.u_plus, 0.0, 0.0, r.z_minus],
            [0.0, r.w1, r.z_plus, 0.0],
            [0.0, r.z_plus, r.w2, 0.0],
            [r.z_minus, 0.0, 0.0, r.u_minus],
        ]
    )


def _raw_spectrum(c: CorrelatorSet) -> tuple[float, float, float, float]:
    outer = 1.0 + c.zz
    root = math.sqrt(4.0 * c.sz * c.sz + (c.xx - c.yy) ** 2)
    inner = 1.0 - c.zz
    s = c.xx + c.yy
    eps = (
        0.25 * (outer + root),
        0.25 * (outer - root),
        0.25 * (inner + s),
        0.25 * (inner - s),
    )
    low = min(eps)
    if low < -ERROR_TOL:
        raise NonPhysicalStateError(
            f"reduced density matrix eigenvalue {low!r} < -{ERROR_TOL:g} for {c}"
        )
    return eps


def rdm_spectrum(c: CorrelatorSet) -> RdmSpectrum:
    """Closed-form eigenvalues of the two-site reduced density matrix.

    The labelling keeps the block structure: ``eps1 >= eps2`` come from the
    {uu, dd} block and ``eps3, eps4`` from the {ud, du} block, with the sign of
    ``xx + yy`` deciding which of the latter is larger.
    """
    return RdmSpectrum(tuple(_clamp(e) for e in _raw_spectrum(c)))


def rdm_spectrum_derivative(c: CorrelatorSet, d: CorrelatorDerivatives) -> np.ndarray:
    """d(eps_i)/dlambda from correlator derivatives."""
    root = math.sqrt(4.0 * c.sz * c.sz + (c.xx - c.yy) ** 2)
    if root == 0.0:
        raise ZeroDivisionError("outer-block eigenvalues are degenerate")
    d_root = (4.0 * c.sz * d.d_sz + (c.xx - c.yy) * (d.d_xx - d.d_yy)) / root
    d_s = d.d_xx + d.d_yy
    return 0.25 * np.array(
        [
            d.d_zz + d_root,
            d.d_zz - d_root,
            -d.d_zz + d_s,
            -d.d_zz - d_s,
        ]
    )


def _xlog2x(p: float) -> float:
    return p * math.log2(p) if p > 0.0 else 0.0


def von_neumann_entropy(s: RdmSpectrum) -> float:
    """``-sum eps log2 eps`` with 0 log 0 = 0."""
    return max(0.0, -sum(_xlog2x(e) for e in s))


def entropy(point: ModelPoint | float, size=None) -> float:
    """Two-site entanglement E_v at a model point."""
    return von_neumann_entropy(rdm_spectrum(correlators(point, size)))


def richardson_derivative(f, x: float, h: float) -> float:
    """Central difference with one Richardson step, error O(h^4)."""
    d1 = (f(x + h) - f(x - h)) / (2.0 * h)
    h2 = 0.5 * h
    d2 = (f(x + h2) - f(x - h2)) / (2.0 * h2)
    return (4.0 * d2 - d1) / 3.0


def _fd_step(lam: float) -> float:
    h = 1e-6 * max(1.0, lam)
    # keep the stencil inside lambda >= 0
    return min(h, 0.5 * lam) if lam > 0 else h


def _point(point, size) -> ModelPoint:
    return point if isinstance(point, ModelPoint) else ModelPoint(point, size)


def _check_derivative_point(p: ModelPoint) -> None:
    if p.lam <= 0.0:
        raise ValueError("entropy derivative needs lambda > 0")
    if p.is_thermodynamic and abs(p.lam - 1.0) < CRITICAL_EXCLUSION:
        raise DivergenceError(
            f"dE_v/dlambda diverges logarithmically at lambda_c = 1 (got lambda={p.lam!r})"
        )


def entropy_derivative(point: ModelPoint | float, size=None) -> float:
    """dE_v/dlambda by the chain rule through the eigenvalues.

    Falls back to a Richardson central difference of E_v when an eigenvalue is
    below 1e-12, where the individual ``log eps`` terms are singular.
    """
    p = _point(point, size)
    _check_derivative_point(p)
    c = correlators(p)
    eps = np.array(rdm_spectrum(c).eps)
    if eps.min() <= ANALYTIC_EPS_MIN:
        h = _fd_step(p.lam)
        return richardson_derivative(lambda x: entropy(x, p.size), p.lam, h)
    d_eps = rdm_spectrum_derivative(c, correlator_derivatives(p))
    return float(-np.dot(np.log2(eps), d_eps))


def entropy_derivative_ratio_form(point: ModelPoint | float, size=None) -> float:
    """Same derivative written with logarithms of eigenvalue ratios.

    ``-log2(e4/e3) de4 - log2(e3/e1) d(e3+e4) - log2(e2/e1) de2``; equals
    :func:`entropy_derivative` because the eigenvalues sum to one.
    """
    p = _point(point, size)
    _check_derivative_point(p)
    c = correlators(p)
    e1, e2, e3, e4 = rdm_spectrum(c).eps
    if min(e1, e2, e3, e4) <= ANALYTIC_EPS_MIN:
        raise ValueError("ratio form needs every eigenvalue above 1e-12")
    d1, d2, d3, d4 = rdm_spectrum_derivative(c, correlator_derivatives(p))
    return float(
        -math.log2(e4 / e3) * d4
        - math.log2(e3 / e1) * (d3 + d4)
        - math.log2(e2 / e1) * d2
    )


# --- closed forms at criticality -------------------------------------------

def critical_spectrum_closed_form() -> RdmSpectrum:
    """Infinite-chain eigenvalues at lambda = 1."""
    pi = math.pi
    a = 0.25 + 4.0 / (3.0 * pi**2)
    b = 0.25 - 4.0 / (3.0 * pi**2)
    r = math.sqrt(13.0) / (3.0 * pi)
    q = 1.0 / (3.0 * pi)
    return RdmSpectrum((a + r, a - r, b + q, b - q))


def critical_entropy() -> float:
    return von_neumann_entropy(critical_spectrum_closed_form())


def a1_constant() -> float:
    """Amplitude of the ln N growth of dE_v/dlambda at lambda = 1."""
    pi = math.pi
    s13 = math.sqrt(13.0)
    first = -math.log2((3 * pi**2 + 4 * pi - 16) / (3 * pi**2 - 4 * pi - 16)) / (2 * pi)
    second = (3.0 / (2.0 * s13 * pi)) * math.log2(
        (3 * pi**2 + 4 * s13 * pi + 16) / (3 * pi**2 - 4 * s13 * pi + 16)
    )
    return first + second


def concurrence_log_constant() -> float:
    """8 / (3 pi^2), the ln N amplitude of dC/dlambda at criticality."""
    return 8.0 / (3.0 * math.pi**2)


def critical_constants() -> CriticalConstants:
    return CriticalConstants(1.0, a1_constant(), critical_spectrum_closed_form())


def critical_derivative_sum(n: int) -> float:
    """Closed-form momentum-sum expression for dE_v/dlambda at lambda = 1.

    Evaluated term for term with the infinite-chain eigenvalues.
    It is kept as a cross-check; :func:`entropy_derivative` is the reference
    route, and the two are compared (not asserted equal) by the oracle report.
    """
    from .free_fermion import momentum_grid

    phis = momentum_grid(n, 1).phis
    sh = np.sin(0.5 * phis)
    ch2 = np.cos(0.5 * phis) ** 2
    ratio = np.abs(ch2 / sh)
    s_cos = np.sum(ratio * np.cos(phis)) / n
    s_ratio = np.sum(ratio) / n
    s_sin2 = np.sum(np.abs(2.0 * sh**2)) / n
    s_mixed = np.sum(np.abs(4.0 * ch2 * sh))
    e1, e2, e3, e4 = critical_spectrum_closed_form().eps
    return float(
        -0.5 * s_cos * math.log2(e4 / e3)
        + (-s_ratio * s_sin2 + s_mixed**2 / n**2) / (2.0 * (e1 - e2)) * math.log2(e2 / e1)
    )


# --- concurrence -----------------------------------------------------------

def concurrence_branch(r: RdmElements) -> tuple[int, float]:
    """Active branch and value of ``max(0, |z-| - sqrt(w1 w2), |z+| - sqrt(u+ u-))``.

    Branch 0 is the zero floor, 1 the {uu, dd}-coherence branch ``|z-| - sqrt(w1 w2)``,
    2 the {ud, du}-coherence branch ``|z+| - sqrt(u+ u-)``.
    """
    cands = (
        0.0,
        abs(r.z_minus) - math.sqrt(r.w1 * r.w2),
        abs(r.z_plus) - math.sqrt(r.u_plus * r.u_minus),
    )
    k = int(np.argmax(cands))
    return k, cands[k]


def concurrence(r: RdmElements) -> float:
    """Wootters concurrence of an X-form two-qubit state."""
    return min(1.0, 2.0 * concurrence_branch(r)[1])


def concurrence_value(point: ModelPoint | float, size=None) -> float:
    return concurrence(build_rdm(correlators(point, size)))


def wootters_concurrence(rho: np.ndarray) -> float:
    """Generic Wootters formula from the spin-flipped spectrum of any 4x4 state."""
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]])
    yy = np.kron(sy, sy)
    rho = np.asarray(rho, dtype=complex)
    flipped = yy @ rho.conj() @ yy
    ev = np.linalg.eigvals(rho @ flipped)
    lam = np.sort(np.sqrt(np.clip(ev.real, 0.0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_derivative(point: ModelPoint | float, size=None) -> float:
    """dC/dlambda by the chain rule on the active branch.

    Within 1e-9 of a branch switch a Richardson difference is used instead; a
    point where two branches are exactly equal raises :class:`BranchSwitchError`.
    """
    p = _point(point, size)
    if p.lam <= 0.0:
        raise ValueError("concurrence derivative needs lambda > 0")
    if p.is_thermodynamic and abs(p.lam - 1.0) < CRITICAL_EXCLUSION:
        raise DivergenceError("dC/dlambda diverges at lambda_c = 1 in the infinite chain")
    c = correlators(p)
    r = build_rdm(c)
    cands = sorted(
        (
            0.0,
            abs(r.z_minus) - math.sqrt(r.w1 * r.w2),
            abs(r.z_plus) - math.sqrt(r.u_plus * r.u_minus),
        ),
        reverse=True,
    )
    gap = cands[0] - cands[1]
    if gap == 0.0:
        raise BranchSwitchError(f"concurrence branches coincide at lambda={p.lam!r}")
    if gap < BRANCH_TOL:
        h = min(_fd_step(p.lam), 0.25 * gap) if gap > 0 else _fd_step(p.lam)
        return richardson_derivative(lambda x: concurrence_value(x, p.size), p.lam, h)

    branch, _ = concurrence_branch(r)
    if branch == 0:
        return 0.0
    d = correlator_derivatives(p)
    if branch == 1:
        # 2 (|z-| - w),  z- = (xx - yy)/4, w = (1 - zz)/4
        z = 0.25 * (c.xx - c.yy)
        dz = 0.25 * (d.d_xx - d.d_yy)
        return 2.0 * (math.copysign(1.0, z) * dz + 0.25 * d.d_zz)
    # 2 (|z+| - sqrt(u+ u-)),  u+ u- = ((1 + zz)^2 - 4 sz^2) / 16
    z = 0.25 * (c.xx + c.yy)
    dz = 0.25 * (d.d_xx + d.d_yy)
    prod = r.u_plus * r.u_minus
    d_prod = (2.0 * (1.0 + c.zz) * d.d_zz - 8.0 * c.sz * d.d_sz) / 16.0
    if prod <= 0.0:
        raise BranchSwitchError("sqrt(u+ u-) is not differentiable at u+ u- = 0")
    return 2.0 * (math.copysign(1.0, z) * dz - d_prod / (2.0 * math.sqrt(prod)))


def sample(point: ModelPoint | float, size=None) -> EntanglementSample:
    """Entropy, concurrence and both derivatives at one point."""
    p = _point(point, size)
    c = correlators(p)
    ev = von_neumann_entropy(rdm_spectrum(c))
    conc = concurrence(build_rdm(c))
    if p.lam > 0.0:
        d_ev = entropy_derivative(p)
        d_conc = concurrence_derivative(p)
    else:
        # one-sided limits at lambda = 0
        d_ev = 0.0
        d_conc = concurrence_derivative(ModelPoint(1e-8, p.size))
    return EntanglementSample(p.lam, p.size, ev, d_ev, conc, d_conc)
