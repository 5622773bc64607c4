"""Incomplete-data X-ray tomography by transport-PDE least squares.

The attenuation f on a rectangle is recovered from ray integrals measured
between a below-lying source segment and the rectangle boundary.  The data
are expanded in a special orthonormal basis of the source variable; the
coefficient field solves an overdetermined first-order PDE system, handled
by a regularized least-squares (quasi-reversibility) solve, after which f
follows from a pointwise source-averaged reconstruction formula.  A
zero-filled filtered-back-projection baseline is included for comparison.
"""

from .basis import (BasisSet, OperatorMatrices, assemble_A_B, assemble_D1_D2,
                    build_basis, check_invertibility, gram_derivative_matrix)
from .errors import (ConditioningError, ConfigurationError, DomainError,
                     SolverError)
from .experiments import (ExperimentResult, benchmark_domain, compare_methods,
                          locate_extremes, run_test)
from .fbp import Sinogram, build_complete_sinogram, build_sinogram, fbp_reconstruct
from .forward import (BoundaryData, Phantom, add_noise, boundary_coefficients,
                      compute_boundary_data, eval_phantom, line_integral,
                      line_integrals, phantom_for_test)
from .geometry import (DomainConfig, Grid, SourceSet, build_grid, flat_index,
                       flat_index_inverse, load_config, source_positions,
                       test_domain)
from .reconstruction import (ImageField, postprocess, reconstruct_f, smooth,
                             smooth_coefficients, threshold_filter)
from .solver import (CoefficientField, SolverConfig, SparseSystem,
                     assemble_functional_matrix, assemble_normal_matrix,
                     boundary_flat_indices, discrete_h1_norm, evaluate_u,
                     solve_constrained)
from .theory import CarlemanReport, carleman_check, convergence_study

__version__ = "0.1.0"
