"""Generalized Fibonacci oscillator coupled to a thermal reservoir.

Spectrum and ladder operators (:mod:`.algebra`), Bohr frequencies and
Kraus operators (:mod:`.coupling`), the truncated GKLS generator
(:mod:`.generator`), the diagonal birth-death chain (:mod:`.birthdeath`),
spectral gap bounds (:mod:`.spectral`) and time evolution
(:mod:`.dynamics`).
"""
from .algebra import (DeformationParams, SpectrumTable, commutation_residuals,
                      ladder_matrices, monotonicity_report, qr_integer, spectrum_table)
from .birthdeath import (bd_chain, bd_rates, diagonal_gap_numeric, km_conservativity,
                         partial_sum_inequalities, partition_function, stationary_density)
from .coupling import bohr_spectrum, is_generic, kraus_from_coupling
from .dynamics import Trajectory, decay_rate_fit, evolve, initial_state
from .errors import NumericalError, ValidationError
from .generator import (DensityMatrix, TruncatedGenerator, apply_predual, apply_primal,
                        build_generator, gamma_rates, offdiag_eigenvalue)
from .spectral import (GapReport, crossing_curves, diag_lower_bounds, diag_upper_alpha,
                       embed_l2, gap_report, invariant_state, offdiag_minimum)

__version__ = "0.1.0"
