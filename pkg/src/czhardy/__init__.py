"""Calderon-Zygmund and atomic Hardy space tools on truncated weighted homogeneous trees."""

from .errors import ContainmentError, InvariantViolation, ParameterError
from .tree import TreeConfig, TreeTruncation
from .measure import (
    WeightedMeasure,
    ball_doubling_ratio,
    doubling_ratio,
    integrate,
    lp_norm,
    mu_ball,
    mu_set,
    mu_sphere,
)
from .geometry import (
    AdmissibleTrapezoid,
    CZSet,
    DilatedCZSet,
    admissible_trapezoids,
    cz_sets,
    envelope,
    geometry_sweep,
)
from .maximal import CoveringResult, cz_covering, maximal_function, restricted_maximal_function
from .hardy import Atom, AtomicDecomposition, atomic_decompose, h1_norm_upper_bound, validate_atom
from .interpolation import KDecomposition, interpolation_exponent_report, k_decompose, k_functional_upper
from .operators import (
    MultiplierSpec,
    OperatorMatrix,
    gradient,
    h1_to_l1_ratio,
    hormander_integral,
    hormander_sup,
    laplacian,
    mikhlin_hormander_estimate,
    riesz_transform,
    spectral_multiplier,
)

__version__ = "0.1.0"
