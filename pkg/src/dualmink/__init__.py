"""Dual curvature measures of convex bodies on the sphere.

Core pieces: a geodesic grid with tangent-chart differential operators,
convex-body representations (ellipsoid / polytope / support samples), the
family of curvature measures they generate, an iterative solver for the
prescribed-density Monge-Ampere equation, the John ellipsoid, and the
estimate-verification harness.  A FastAPI service and a CLI front both.
"""

__version__ = "0.1.0"

from .bodies import (Ellipsoid, Polytope, SupportGrid, cube, radial,
                     radial_gauss, sample_support_grid, support,
                     support_gradient, volume)
from .errors import (AmbiguityError, ConfigurationError, DegeneracyError,
                     DualMinkError, InvalidBodyError, NumericalError,
                     UnsupportedRegimeError)
from .john import JohnEllipsoid, containment_gaps, john_ellipsoid
from .measures import (AtomicMeasure, DensityMeasure, cone_volume_measure,
                       dual_curvature_boundary, dual_curvature_radial,
                       equivariance_pushforward, lp_dual_curvature,
                       lp_dual_density, surface_area_measure)
from .plma import monge_ampere_measure_pl
from .regions import Cap, DirectionSet, FullSphere, Union, hemisphere
from .solver import (InitSpec, SolveReport, SolverConfig, convexify,
                     residual, solve)
from .sphere import (ScalarField, SphericalGrid, build_geodesic_grid,
                     constant_field, ma_operator, quadrature,
                     spherical_gradient)
from .verify import (EstimateReport, FamilySpec, basic_estimate_suite,
                     c0_suite, degeneration_probe, proposition_suite,
                     uniqueness_probe)
