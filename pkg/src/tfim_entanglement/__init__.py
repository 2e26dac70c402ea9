"""Two-site entanglement of the periodic transverse-field Ising chain.

Exact free-fermion correlators, the two-site reduced density matrix and its
entropy, analytic coupling derivatives, an exact-diagonalization oracle, and
finite-size scaling tools.
"""

__version__ = "0.1.0"

from .free_fermion import (
    THERMODYNAMIC,
    CorrelatorDerivatives,
    CorrelatorSet,
    DivergenceError,
    ModelPoint,
    QuadratureError,
    correlator_derivatives,
    correlators,
    dispersion,
    ground_energy,
    momentum_grid,
)
from .entanglement import (
    RdmElements,
    RdmSpectrum,
    a1_constant,
    build_rdm,
    concurrence,
    concurrence_derivative,
    critical_derivative_sum,
    critical_spectrum_closed_form,
    entropy,
    entropy_derivative,
    rdm_spectrum,
    von_neumann_entropy,
)
