"""Closed-form blow-up certificates for second-order differential inequalities.

The scalar model is ``v'' + a v >= b v'^q`` with ``a, b > 0`` and ``q > 1``.
Membership in an invariant region of the ``(v, v')`` plane certifies that
every solution blows up in finite time, and yields a lower envelope for
``v'`` whose pole bounds the blow-up time from above.

Two regimes are handled separately:

* ``1 < q <= 2``: the region above the four-piece curve :func:`boundary_F`,
  with the fixed fraction ``epsilon = 1/2``.
* ``q > 2``: the region of initial data with ``f(1) > 0``, where
  ``f(eps) = eps b q v1^(q-2) (eps b v1^q - a v0) - a``; the smallest
  admissible ``eps`` is the positive root of that quadratic.

The same machinery is reused for the two-component system
``U'' + aU >= V'^p, V'' + aV >= U'^q`` and for the PDE reductions obtained by
projecting onto the first Dirichlet eigenfunction.

A failed region test means *inconclusive*: these criteria are sufficient for
blow-up, never necessary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

__all__ = [
    "BlowupError",
    "InvalidParameters",
    "NotCertified",
    "HypothesisViolated",
    "BeyondPole",
    "OdiParams",
    "SystemParams",
    "SubQuadraticConstants",
    "SubQuadratic",
    "SuperQuadratic",
    "SystemRegion",
    "Levine",
    "Certificate",
    "sub_quadratic_constants",
    "boundary_F",
    "boundary_F_slope",
    "in_region_sub_quadratic",
    "condition_f",
    "epsilon_min",
    "boundary_F2",
    "boundary_F2_slope",
    "super_quadratic_A",
    "admissible_v0_super_quadratic",
    "in_region_super_quadratic",
    "certify_scalar",
    "rate_envelope",
    "in_region_system",
    "certify_system",
    "boundary_fp",
    "boundary_fp_slope",
    "levine_s0",
    "levine_region",
    "certify_wave",
    "reduce_elliptic",
    "reduce_parabolic",
]


class BlowupError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameters(BlowupError, ValueError):
    """Parameters or inputs outside the domain of an operation."""


class NotCertified(BlowupError):
    """The region test failed, so the criterion is inconclusive.

    This does *not* mean the solution is global.
    """


class HypothesisViolated(NotCertified):
    """A side hypothesis of a reduction (sign of beta, ordering) fails."""


class BeyondPole(BlowupError, ValueError):
    """Envelope requested at or past its pole."""


def _check_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise InvalidParameters(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class OdiParams:
    """Coefficients of ``v'' + a v >= b v'^q``."""

    a: float
    b: float
    q: float

    def __post_init__(self):
        _check_positive("a", self.a)
        _check_positive("b", self.b)
        if not (math.isfinite(self.q) and self.q > 1):
            raise InvalidParameters(f"q must be > 1, got {self.q!r}")

    @property
    def sub_quadratic(self) -> bool:
        return self.q <= 2


@dataclass(frozen=True)
class SystemParams:
    """Coefficients of the coupled inequalities ``U''+aU >= V'^p``, ``V''+aV >= U'^q``.

    ``alpha_sys = 1 + 1/(a p)`` and ``beta_sys = 1/(1 + a p)`` are derived.
    """

    a: float
    p: float
    q: float
    alpha_sys: float = field(init=False)
    beta_sys: float = field(init=False)

    def __post_init__(self):
        _check_positive("a", self.a)
        if not (math.isfinite(self.p) and self.p > 1):
            raise InvalidParameters(f"p must be > 1, got {self.p!r}")
        if not (math.isfinite(self.q) and self.q >= self.p):
            raise InvalidParameters(f"need 1 < p <= q, got p={self.p!r}, q={self.q!r}")
        object.__setattr__(self, "alpha_sys", 1.0 + 1.0 / (self.a * self.p))
        object.__setattr__(self, "beta_sys", 1.0 / (1.0 + self.a * self.p))


@dataclass(frozen=True)
class SubQuadraticConstants:
    alpha: float
    v1_threshold: float
    x1: float
    x2: float
    plateau: float


# Region variants. Each carries what is needed to redraw its boundary.

@dataclass(frozen=True)
class SubQuadratic:
    constants: SubQuadraticConstants
    kind: str = field(default="subq", init=False)


@dataclass(frozen=True)
class SuperQuadratic:
    epsilon: float
    A: float
    kind: str = field(default="superq", init=False)

    def __post_init__(self):
        if not self.A > 0:
            raise InvalidParameters(f"super-quadratic region needs A > 0, got {self.A!r}")


@dataclass(frozen=True)
class SystemRegion:
    params: SystemParams
    kind: str = field(default="system", init=False)


@dataclass(frozen=True)
class Levine:
    s0: float
    kind: str = field(default="levine", init=False)


RegionKind = Union[SubQuadratic, SuperQuadratic, SystemRegion, Levine]

PROVENANCES = ("scalar", "wave", "elliptic", "parabolic", "system")


@dataclass(frozen=True)
class Certificate:
    """Verdict of a successful region test.

    The envelope is ``(base - slope * t) ** (1 / (1 - power))``; its pole
    ``base / slope`` is ``t_star``. ``power`` is ``q`` for scalar
    certificates and ``p`` for the system certificate, whose envelope bounds
    ``U' + V'``. ``epsilon`` is ``None`` for the system certificate.
    """

    params: Union[OdiParams, SystemParams]
    initial: tuple
    region: RegionKind
    epsilon: Optional[float]
    t_star: float
    base: float
    slope: float
    power: float
    provenance: str = "scalar"
    l1_factor: Optional[float] = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise InvalidParameters(f"unknown provenance {self.provenance!r}")

    @property
    def envelope(self) -> tuple:
        return (self.base, self.slope)

    def __call__(self, t):
        return rate_envelope(self, t)

    def to_dict(self) -> dict:
        region = {"kind": self.region.kind}
        if isinstance(self.region, SubQuadratic):
            c = self.region.constants
            region.update(alpha=c.alpha, v1_threshold=c.v1_threshold, x1=c.x1, x2=c.x2,
                          plateau=c.plateau)
        elif isinstance(self.region, SuperQuadratic):
            region.update(epsilon=self.region.epsilon, A=self.region.A)
        elif isinstance(self.region, SystemRegion):
            region.update(alpha_sys=self.region.params.alpha_sys,
                          beta_sys=self.region.params.beta_sys)
        return {
            "certified": True,
            "provenance": self.provenance,
            "params": {k: getattr(self.params, k) for k in self.params.__dataclass_fields__},
            "initial": list(self.initial),
            "region": region,
            "epsilon": self.epsilon,
            "t_star": self.t_star,
            "envelope": {"base": self.base, "slope": self.slope, "power": self.power},
            "l1_factor": self.l1_factor,
        }


# ---------------------------------------------------------------------------
# sub-quadratic branch

def _require_sub(params: OdiParams) -> None:
    if params.q > 2:
        raise InvalidParameters(f"sub-quadratic branch needs 1 < q <= 2, got q={params.q}")


def _require_super(params: OdiParams) -> None:
    if params.q <= 2:
        raise InvalidParameters(f"super-quadratic branch needs q > 2, got q={params.q}")


def sub_quadratic_constants(params: OdiParams) -> SubQuadraticConstants:
    """Constants of the four-piece boundary curve for ``1 < q <= 2``.

    With ``K = 4a / (b^2 q)``::

        alpha   = 2a/(b q) * K^((2-q)/(2q-2))
        plateau = K^(1/(2q-2))            (also the v1 threshold)
        x1      = -alpha / a
        x2      = b/(2a) * K^(q/(2q-2))
    """
    _require_sub(params)
    a, b, q = params.a, params.b, params.q
    K = 4.0 * a / (b * b * q)
    e = 2.0 * q - 2.0
    plateau = K ** (1.0 / e)
    # q == 2 makes the exponent vanish; keep alpha exact there.
    alpha = 2.0 * a / (b * q) * (1.0 if q == 2 else K ** ((2.0 - q) / e))
    x2 = b / (2.0 * a) * K ** (q / e)
    return SubQuadraticConstants(alpha=alpha, v1_threshold=plateau, x1=-alpha / a, x2=x2,
                                 plateau=plateau)


def boundary_F(consts: SubQuadraticConstants, params: OdiParams, x: float) -> float:
    """Lower boundary ``y = F(x)`` of the sub-quadratic region."""
    a, b, q = params.a, params.b, params.q
    if x <= consts.x1:
        return 0.0
    if x <= 0:
        return max(2.0 * (a * x + consts.alpha) / b, 0.0) ** (1.0 / q)
    if x <= consts.x2:
        return consts.plateau
    return (2.0 * a * x / b) ** (1.0 / q)


def boundary_F_slope(consts: SubQuadraticConstants, params: OdiParams, x: float) -> float:
    """Derivative of :func:`boundary_F`, left-continuous at the kinks.

    Infinite at ``x1`` where the rising branch leaves the axis vertically.
    """
    a, b, q = params.a, params.b, params.q
    if x < consts.x1 or (0 < x <= consts.x2):
        return 0.0
    y = boundary_F(consts, params, x)
    if y == 0.0:
        return math.inf
    return 2.0 * a / (b * q) * y ** (1.0 - q)


def in_region_sub_quadratic(params: OdiParams, v0: float, v1: float) -> bool:
    """True iff ``v1 > 0`` and ``v1 > F(v0)`` (open region)."""
    _require_sub(params)
    if not v1 > 0:
        return False
    return v1 > boundary_F(sub_quadratic_constants(params), params, v0)


# ---------------------------------------------------------------------------
# super-quadratic branch

def condition_f(params: OdiParams, v0: float, v1: float, eps: float) -> float:
    """``f(eps) = eps b q v1^(q-2) (eps b v1^q - a v0) - a``."""
    a, b, q = params.a, params.b, params.q
    return eps * b * q * v1 ** (q - 2.0) * (eps * b * v1 ** q - a * v0) - a


def in_region_super_quadratic(params: OdiParams, v0: float, v1: float) -> bool:
    _require_super(params)
    if not v1 > 0:
        return False
    return condition_f(params, v0, v1, 1.0) > 0


def epsilon_min(params: OdiParams, v0: float, v1: float) -> float:
    """Smallest ``eps`` in (0, 1) with ``f(eps) >= 0``.

    ``f`` is the quadratic ``A2 eps^2 + B eps - a`` with
    ``A2 = b^2 q v1^(2q-2)`` and ``B = -a b q v1^(q-2) v0``; since
    ``f(0) = -a < 0`` the positive root is unique. The root is evaluated in
    the cancellation-free form matching the sign of ``B``.
    """
    _require_super(params)
    if not v1 > 0 or not condition_f(params, v0, v1, 1.0) > 0:
        raise NotCertified("condition f(1) > 0 violated: initial data outside the "
                           "super-quadratic region")
    a, b, q = params.a, params.b, params.q
    A2 = b * b * q * v1 ** (2.0 * q - 2.0)
    B = -a * b * q * v1 ** (q - 2.0) * v0
    root = math.sqrt(B * B + 4.0 * A2 * a)
    if B <= 0:
        return (root - B) / (2.0 * A2)
    return 2.0 * a / (B + root)


def super_quadratic_A(params: OdiParams, eps: float, v0: float, v1: float) -> float:
    """``A = eps b v1^q - a v0``, the intercept of the F2 curve."""
    return eps * params.b * v1 ** params.q - params.a * v0


def boundary_F2(params: OdiParams, epsilon: float, A: float, x: float) -> float:
    """``F2(x) = ((a x + A) / (eps b))^(1/q)``.

    Passes through ``(v0, v1)`` when ``A`` is built from that point.
    """
    s = params.a * x + A
    if not s > 0:
        raise InvalidParameters(f"F2 undefined where a*x + A <= 0 (x={x!r})")
    return (s / (epsilon * params.b)) ** (1.0 / params.q)


def boundary_F2_slope(params: OdiParams, epsilon: float, A: float, x: float) -> float:
    y = boundary_F2(params, epsilon, A, x)
    return params.a / (epsilon * params.b * params.q * y ** (params.q - 1.0))


def admissible_v0_super_quadratic(params: OdiParams, v1: float) -> float:
    """The ``v0`` at which ``f(1) = 0`` for a given ``v1 > 0``.

    Points with smaller ``v0`` are admissible; this is the boundary drawn for
    the q > 2 admissible-region plot.
    """
    a, b, q = params.a, params.b, params.q
    return (b * v1 ** q - a / (b * q * v1 ** (q - 2.0))) / a


# ---------------------------------------------------------------------------
# certificates

def _scalar_certificate(params: OdiParams, v0: float, v1: float, provenance: str,
                        l1_factor: Optional[float] = None) -> Certificate:
    if not (math.isfinite(v0) and math.isfinite(v1)):
        raise InvalidParameters("initial data must be finite")
    if params.sub_quadratic:
        if not in_region_sub_quadratic(params, v0, v1):
            raise NotCertified(
                f"(v0, v1) = ({v0!r}, {v1!r}) is not above the sub-quadratic boundary curve")
        eps = 0.5
        region: RegionKind = SubQuadratic(sub_quadratic_constants(params))
    else:
        eps = epsilon_min(params, v0, v1)
        region = SuperQuadratic(eps, super_quadratic_A(params, eps, v0, v1))
    q = params.q
    base = float(v1 ** (1.0 - q))
    slope = float((q - 1.0) * (1.0 - eps) * params.b)
    return Certificate(params=params, initial=(float(v0), float(v1)), region=region, epsilon=eps,
                       t_star=base / slope, base=base, slope=slope, power=q,
                       provenance=provenance, l1_factor=l1_factor)


def certify_scalar(params: OdiParams, v0: float, v1: float) -> Certificate:
    """Certify finite-time blow-up of ``v'' + a v >= b v'^q`` from ``(v0, v1)``.

    Raises
    ------
    NotCertified
        When ``(v0, v1)`` lies outside the region for the branch selected by
        ``q`` (``q <= 2`` uses the sub-quadratic curve).
    """
    return _scalar_certificate(params, v0, v1, "scalar")


def rate_envelope(cert: Certificate, t):
    """Lower bound ``(base - slope t)^(1/(1-power))`` on the derivative.

    Accepts scalars or numpy arrays; raises :class:`BeyondPole` if any time
    reaches ``t_star``.
    """
    gap = cert.base - cert.slope * t
    try:
        bad = not gap > 0
    except ValueError:  # array input
        bad = not (gap > 0).all()
    if bad:
        raise BeyondPole(f"envelope evaluated at or beyond its pole t_star={cert.t_star!r}")
    return gap ** (1.0 / (1.0 - cert.power))


# ---------------------------------------------------------------------------
# system

def boundary_fp(a: float, p: float, x: float) -> float:
    """``f_p(x) = H(x) (alpha a x)^(1/p)`` with ``alpha = 1 + 1/(a p)``, ``H(0) = 1``."""
    if x < 0:
        return 0.0
    return ((1.0 + 1.0 / (a * p)) * a * x) ** (1.0 / p)


def boundary_fp_slope(a: float, p: float, x: float) -> float:
    if x < 0:
        return 0.0
    if x == 0:
        return math.inf
    c = (1.0 + 1.0 / (a * p)) * a
    return c / p * (c * x) ** (1.0 / p - 1.0)


def in_region_system(sp: SystemParams, U0: float, V0: float, U1: float, V1: float) -> bool:
    c = sp.a + 1.0 / sp.p
    return (U1 > 1 and V1 > 1 and U0 * V0 >= U1 * V1
            and U1 ** sp.q >= c * V0 and V1 ** sp.p >= c * U0)


def certify_system(sp: SystemParams, U0: float, V0: float, U1: float, V1: float,
                   lambda_mode: bool = False, phi_sup: Optional[float] = None) -> Certificate:
    """Certificate for the coupled inequalities, bounding ``W' = U' + V'``.

    With ``lambda_mode`` the coefficient ``a`` plays the role of the first
    Dirichlet eigenvalue and ``phi_sup`` (sup-norm of the normalized
    eigenfunction) must be given; the certificate then also bounds
    ``||u_t + v_t||_{L1} >= l1_factor * envelope``.
    """
    l1 = None
    if lambda_mode:
        if phi_sup is None:
            raise InvalidParameters("lambda_mode needs phi_sup")
        _check_positive("phi_sup", phi_sup)
        l1 = 1.0 / phi_sup
    if not in_region_system(sp, U0, V0, U1, V1):
        raise NotCertified("system initial data fail the product-region conditions")
    p = sp.p
    base = float((U1 + V1) ** (1.0 - p))
    slope = float((p - 1.0) / (1.0 + sp.a * p) * 2.0 ** (1.0 - p))
    return Certificate(params=sp, initial=tuple(map(float, (U0, V0, U1, V1))), region=SystemRegion(sp),
                       epsilon=None, t_star=base / slope, base=base, slope=slope, power=p,
                       provenance="system", l1_factor=l1)


# ---------------------------------------------------------------------------
# PDE reductions

def levine_s0(lam: float, C: float, q: float) -> float:
    return ((lam + 1.0) / C) ** (1.0 / (q - 1.0))


def levine_region(lam: float, C: float, q: float, v0: float, v1: float) -> bool:
    """Comparison region ``v1 > v0 > s0`` with ``s0 = ((lam+1)/C)^(1/(q-1))``."""
    _check_positive("lambda", lam)
    _check_positive("C", C)
    if not q > 1:
        raise InvalidParameters(f"q must be > 1, got {q!r}")
    return v1 > v0 > levine_s0(lam, C, q)


def certify_wave(lam: float, C: float, q: float, v0: float, v1: float,
                 phi_sup: float) -> Certificate:
    """Blow-up certificate for ``u'' + L u >= g(u')`` with ``g(s) >= C|s|^q``.

    ``v0, v1`` are the projections of the initial data on the normalized
    first eigenfunction (eigenvalue ``lam``).
    """
    _check_positive("phi_sup", phi_sup)
    return _scalar_certificate(OdiParams(lam, C, q), v0, v1, "wave", 1.0 / phi_sup)


def reduce_elliptic(lam: float, q: float, U0: float, U1: float,
                    phi_sup: Optional[float] = None) -> Certificate:
    """Hyperbolic-elliptic system: ``lam V' = U'`` gives ``a = lam, b = lam^-q``."""
    _check_positive("lambda", lam)
    l1 = None
    if phi_sup is not None:
        _check_positive("phi_sup", phi_sup)
        l1 = 1.0 / phi_sup
    return _scalar_certificate(OdiParams(lam, lam ** (-q), q), U0, U1, "elliptic", l1)


def reduce_parabolic(lam: float, q: float, beta: float, m: float, p: float,
                     U0: float, V0: float, U1: float,
                     phi_sup: Optional[float] = None) -> Certificate:
    """Hyperbolic-parabolic system, reduced to ``U'' + lam U >= U'^q``.

    Raises
    ------
    InvalidParameters
        If ``m >= 1 >= p`` fails.
    HypothesisViolated
        If neither ``beta <= 0`` nor ``beta <= lam and U0 - V0 >= 1`` holds,
        or if ``U0 < V0``.
    NotCertified
        If the hypotheses hold but the scalar region test fails.
    """
    _check_positive("lambda", lam)
    if not (m >= 1 >= p):
        raise InvalidParameters(f"need m >= 1 >= p, got m={m!r}, p={p!r}")
    gap = U0 - V0
    if gap < 0:
        raise HypothesisViolated(f"ordering U0 - V0 >= 0 violated (gap={gap!r})")
    if not (beta <= 0 or (beta <= lam and gap >= 1)):
        raise HypothesisViolated(
            f"hypothesis on beta violated: beta={beta!r} needs beta <= 0, or beta <= lambda "
            f"with U0 - V0 >= 1 (gap={gap!r})")
    l1 = None
    if phi_sup is not None:
        _check_positive("phi_sup", phi_sup)
        l1 = 1.0 / phi_sup
    return _scalar_certificate(OdiParams(lam, 1.0, q), U0, U1, "parabolic", l1)
