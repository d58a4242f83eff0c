"""Multi-order Kerr nonlinearities for fast cat-state preparation.

Fock-space states and operators (:mod:`kerrcat.fock`), exact coefficient
design (:mod:`kerrcat.design`), closed and driven dynamics
(:mod:`kerrcat.dynamics`), Krotov pulse optimization (:mod:`kerrcat.control`),
loss and dephasing (:mod:`kerrcat.open_system`), squeezed cats
(:mod:`kerrcat.squeezing`) and the Rydberg-ensemble model
(:mod:`kerrcat.rydberg`).
"""

from .errors import (DomainError, IntegrationError, KerrCatError, ResonanceError, StepSizeError,
                     TruncationError)
from .fock import (DenseOperator, DensityMatrix, FockVector, cat_state, coherent_state, fidelity,
                   fock_state, number_cumulants, number_moments, wigner)
from .design import NonlinearDesign, design, minimal_time, solve_gammas, verify_parity
from .dynamics import Pulse, evolve_diagonal, evolve_driven
from .control import OptimizationRun, krotov_optimize, min_time_scan
from .open_system import LindbladParams, analytic_decay, lindblad_propagate, overlap_expansion
from .squeezing import SqueezeParams, optimize_squeezing, sq_cat_moments, sq_cat_state
from .rydberg import RydbergParams, effective_coefficients, f_of_m, validate_effective

__version__ = "0.1.0"
