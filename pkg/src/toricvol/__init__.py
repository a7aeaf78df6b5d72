"""Exact toric polytope geometry and numerical Monge-Ampere tools."""
from .errors import (BudgetExceededError, DegeneratePolytopeError, DimensionTooLargeError,
                     DomainMismatchError, GridTooCoarseError, MassTooLargeError,
                     NonconvexInputError, NotReflexiveError, OriginNotInteriorError,
                     SupportUnboundedError, ToricVolError, UnboundedPolytopeError)
from .polytope import (LatticePolytope, build_polytope, degree_and_bounds, fano_index,
                       is_smooth_fano, lattice_point_census, reduced_representative,
                       standard_polytopes,
                       support_function, volume_and_barycenter)
from .catalog import are_equivalent, audit, classify, enumerate_fano
from .grids import (ConvexGridFn, LegendreGridFn, discrete_legendre, legendre_values,
                    ma_measure)
from .ma_solver import (SolveReport, ding_functional, solve_ke, sublevel_sweep,
                        sublevel_volume, verify_solution)
from .mt_lab import (FunctionalTrace, GeodesicPath, energy, geodesic_at,
                     mt_functional, mt_inequality_check, path_property_check, run_suite)
from .green_bm import (GreenGridFn, ReinhardtDomain, bm_disc_check, bm_product_check,
                       contradiction_probe, divergence_probe, green_function)
from .io import __version__

__all__ = [name for name in dir() if not name.startswith("_")]
