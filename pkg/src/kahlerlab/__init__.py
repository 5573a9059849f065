"""Numerical spectral-geometry lab for degenerating Kahler model metrics.

Builds flat-torus model metrics (potential perturbations, collapsing
products), discretizes their Laplacians in divergence form, and verifies at
desk scale that Sobolev constants, heat-kernel bounds, eigenvalue growth,
Green's-function moments, and ball-volume floors stay uniform across the
family.
"""

__version__ = "0.1.0"

from .davies import DaviesSchedule, davies_integrals, r_schedule
from .errors import KahlerLabError
from .functionals import (
    geodesic_geometry,
    nash_yau_entropy,
    noncollapsing_check,
    poincare_gap,
    sobolev_quotient,
)
from .grid import GridDomain
from .metrics import (
    FamilyParameter,
    KahlerPotential,
    MetricField,
    build_degenerating_product_family,
    build_flat_torus,
    intersection_number,
    perturb_with_potential,
    relative_volume_density,
)
from .operators import SparseOperator, assemble_laplacian, dirichlet_energy, weighted_inner_product
from .spectral import (
    SpectralData,
    eigendecompose,
    green_function,
    green_integral_moments,
    heat_kernel_eval,
)
from .sweep import SweepConfig, emit_reports, q_from_epsilon, run_sweep

__all__ = [
    "DaviesSchedule",
    "FamilyParameter",
    "GridDomain",
    "KahlerLabError",
    "KahlerPotential",
    "MetricField",
    "SparseOperator",
    "SpectralData",
    "SweepConfig",
    "assemble_laplacian",
    "build_degenerating_product_family",
    "build_flat_torus",
    "davies_integrals",
    "dirichlet_energy",
    "eigendecompose",
    "emit_reports",
    "geodesic_geometry",
    "green_function",
    "green_integral_moments",
    "heat_kernel_eval",
    "intersection_number",
    "nash_yau_entropy",
    "noncollapsing_check",
    "perturb_with_potential",
    "poincare_gap",
    "q_from_epsilon",
    "r_schedule",
    "relative_volume_density",
    "run_sweep",
    "sobolev_quotient",
    "weighted_inner_product",
]
