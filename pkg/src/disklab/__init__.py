"""Desk-scale numerical laboratory for disk-scaled transitivity of linear operators."""

from .vectorspace import (
    BILATERAL,
    UNILATERAL,
    Ball,
    ComplexVector,
    IndexWindow,
    ProductBall,
    ProductVector,
    inner,
    norm,
    sample_ball,
    sample_finite_support,
)
from .operators import (
    BackwardShift,
    Dense,
    Diagonal,
    DirectSum,
    EigenPair,
    ForwardShift,
    GrowthBounds,
    OperatorError,
    OperatorSpec,
    Scalar,
    WeightProfile,
    WindowGuardError,
    apply,
    as_dense,
    ensure_power_fits,
    growth,
    power_apply,
    right_inverse,
)
from .hitsolver import (
    DISK,
    FIXED,
    HIT,
    MISS_CERTIFIED,
    MISS_UNCERTAIN,
    HitProblem,
    HitResult,
    SolverSettings,
    Witness,
    best_alpha,
    certify_miss,
    constrained_lsq,
    power_map,
    random_search,
    reverify_witness,
    solve_hit,
)
from .transitivity import (
    COMPOUND,
    CONFIRMED,
    DISK_TRANSITIVE,
    INCONCLUSIVE,
    K_BITRANSITIVE,
    MIXING,
    REFUTED,
    CrossReport,
    JunctionReport,
    Verdict,
    cross_scan,
    detect,
    disk_orbit_norms,
    disk_orbit_points,
    junction_scan,
    make_ball_sampler,
)
from .criteria import (
    CompoundData,
    CriterionData,
    CriterionError,
    CriterionReport,
    DerivedScalars,
    RoundTripReport,
    ShiftWitness,
    SpectralSplit,
    SpectralWitnessReport,
    check_compound_scalar_free,
    check_compound_scaled,
    check_scalar_free_criterion,
    check_scaled_criterion,
    derive_scalars,
    make_vector_sampler,
    powers_of_right_inverse,
    roundtrip_scalar_derivation,
    shift_witness,
    spectral_witness,
)

__version__ = "0.1.0"

__all__ = [
    "BILATERAL",
    "UNILATERAL",
    "Ball",
    "ComplexVector",
    "IndexWindow",
    "ProductBall",
    "ProductVector",
    "inner",
    "norm",
    "sample_ball",
    "sample_finite_support",
    "BackwardShift",
    "Dense",
    "Diagonal",
    "DirectSum",
    "EigenPair",
    "ForwardShift",
    "GrowthBounds",
    "OperatorError",
    "OperatorSpec",
    "Scalar",
    "WeightProfile",
    "WindowGuardError",
    "apply",
    "as_dense",
    "ensure_power_fits",
    "growth",
    "power_apply",
    "right_inverse",
    "DISK",
    "FIXED",
    "HIT",
    "MISS_CERTIFIED",
    "MISS_UNCERTAIN",
    "HitProblem",
    "HitResult",
    "SolverSettings",
    "Witness",
    "best_alpha",
    "certify_miss",
    "constrained_lsq",
    "power_map",
    "random_search",
    "reverify_witness",
    "solve_hit",
    "COMPOUND",
    "CONFIRMED",
    "DISK_TRANSITIVE",
    "INCONCLUSIVE",
    "K_BITRANSITIVE",
    "MIXING",
    "REFUTED",
    "CrossReport",
    "JunctionReport",
    "Verdict",
    "cross_scan",
    "detect",
    "disk_orbit_norms",
    "disk_orbit_points",
    "junction_scan",
    "make_ball_sampler",
    "CompoundData",
    "CriterionData",
    "CriterionError",
    "CriterionReport",
    "DerivedScalars",
    "RoundTripReport",
    "ShiftWitness",
    "SpectralSplit",
    "SpectralWitnessReport",
    "check_compound_scalar_free",
    "check_compound_scaled",
    "check_scalar_free_criterion",
    "check_scaled_criterion",
    "derive_scalars",
    "make_vector_sampler",
    "powers_of_right_inverse",
    "roundtrip_scalar_derivation",
    "shift_witness",
    "spectral_witness",
    "__version__",
]
