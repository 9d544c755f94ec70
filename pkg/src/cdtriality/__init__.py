"""Canonical duality and triality for exponential-plus-quartic optimization."""
__version__ = "0.1.0"

from .problem import (DimensionError, ExpTerm, InstanceFormatError, ProblemInstance, QuarticTerm,
                      ValidationReport, eval_primal, grad_primal, hess_primal, instance_from_arrays,
                      lambda_map, validate_instance)
from .dual import (DualPoint, GMatrix, OutsideDomainError, StationaryPair, duality_gap,
                   eval_dual, g_matrix, grad_dual, hess_dual, make_pair, recover_primal,
                   sigma_of_x, total_complementary)
from .linalg import (CongruencePair, Inertia, congruence_diagonalize, inertia_of, pinv, svd,
                     sym_eigen, sym_pinv)
from .solver import (CriticalSet, EnumerationCapError, InvalidInstanceError, SolverOptions,
                     enumerate_critical, solve_minus, solve_plus)
from .triality import (SubspacePreconditionError, TrialityVerdict, UnadmittedPairError, classify,
                       saddle_subspace_dual, saddle_subspace_primal)
from .perturbation import HomotopyTrace, PerturbationSchedule, homotopy_solve, perturb_g
from .applications import (CatalogEntry, SensorNetwork, build_sensor_instance, embed_positions,
                           example_catalog, extract_positions)
from .report import SolveReport, solve_instance
