"""Bogovskii operator toolkit: explicit solutions of div u = f with zero
boundary values, the singular-integral gradient decomposition, norm
estimators, and the Korn-type gradient reconstruction."""

__version__ = "0.1.0"

from .domain import (Ball, Box, Cutoff, Ellipsoid, LipschitzDomain, Mollifier,
                     StarDomain, StarPolygon, domain_from_config, make_bump,
                     mollifier_from_config, split_zero_mean, star_check)
from .errors import (BogovskiiError, ExtrapolationDiverged, InvalidDomain,
                     MeanNotZero, NonZeroMeanPsi, OutOfRegime, PaddingRequired,
                     SingularPoint, SupportViolation)
from .inputs import (AnalyticInput, atom_family, cubic_vector_family,
                     dipole_family, holder_family, korn_family, parse_analytic,
                     rigid_motion, trig_vector_family)
from .kernel import (KernelConfig, eval_G, eval_gradG, eval_K1, eval_K2,
                     eval_omega, kernel_bounds_report, spherical_average_K1)
from .korn import (StrainField, korn_ratio_sweep, korn_representation,
                   omega_mean, second_derivative_identity_check, strain)
from .norms import (MaximalConfig, bmo_norm, holder_norm, holder_seminorm,
                    hp_quasinorm, local_maximal, lp_norm)
from .quadrature import Grid, GridField, collar_nodes, fd_gradient
from .reports import SweepReport, write_csv, write_manifest
from .solver import (SolveResult, bogovskii_apply, counterexample_p1,
                     gradient_decomposition, lipschitz_ratio_sweep,
                     solve_lipschitz, solve_star)
