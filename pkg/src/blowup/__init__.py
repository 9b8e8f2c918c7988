"""Finite-time blow-up certificates for second-order differential inequalities
and the wave-type systems that reduce to them, with numerical verification."""

from .odi_core import (
    BeyondPole,
    BlowupError,
    Certificate,
    HypothesisViolated,
    InvalidParameters,
    NotCertified,
    Levine,
    OdiParams,
    SubQuadratic,
    SuperQuadratic,
    SystemParams,
    SystemRegion,
    boundary_F,
    boundary_F2,
    boundary_fp,
    certify_scalar,
    certify_system,
    certify_wave,
    epsilon_min,
    in_region_sub_quadratic,
    in_region_super_quadratic,
    in_region_system,
    levine_region,
    rate_envelope,
    reduce_elliptic,
    reduce_parabolic,
    sub_quadratic_constants,
)
from .integrate import (
    Field,
    IntegratorOptions,
    Trajectory,
    boundary_inwardness,
    check_envelope,
    detect_blowup,
    extremal_scalar_field,
    extremal_system_field,
    integrate_ivp,
    region_margin,
)

__version__ = "0.1.0"
