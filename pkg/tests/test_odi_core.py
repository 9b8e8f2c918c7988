import math

import mpmath
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from blowup.odi_core import (
    BeyondPole,
    HypothesisViolated,
    InvalidParameters,
    NotCertified,
    OdiParams,
    SuperQuadratic,
    SystemParams,
    boundary_F,
    boundary_F2,
    boundary_F2_slope,
    boundary_fp,
    certify_scalar,
    certify_system,
    certify_wave,
    condition_f,
    epsilon_min,
    in_region_sub_quadratic,
    in_region_super_quadratic,
    in_region_system,
    levine_region,
    levine_s0,
    rate_envelope,
    reduce_elliptic,
    reduce_parabolic,
    sub_quadratic_constants,
    super_quadratic_A,
)

mpmath.mp.dps = 50

FIG_SUB = OdiParams(1.0, 2.0, 1.5)
FIG_SUPER = OdiParams(1.0, 1.0, 2.5)


def mp_constants(a, b, q):
    """Independent high-precision evaluation of the closed forms."""
    a, b, q = mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(q)
    K = 4 * a / (b * b * q)
    alpha = 2 * a / (b * q) * K ** ((2 - q) / (2 * q - 2))
    plateau = K ** (1 / (2 * q - 2))
    x2 = b / (2 * a) * K ** (q / (2 * q - 2))
    return alpha, plateau, -alpha / a, x2


# --- construction -----------------------------------------------------------

@pytest.mark.parametrize("a,b,q", [(0, 1, 1.5), (1, -1, 1.5), (1, 1, 1.0), (1, 1, 0.5),
                                   (math.nan, 1, 2)])
def test_params_rejected(a, b, q):
    with pytest.raises(InvalidParameters):
        OdiParams(a, b, q)


def test_system_params_derived():
    sp = SystemParams(1.0, 1.5, 2.0)
    assert sp.alpha_sys == pytest.approx(5 / 3)
    assert sp.beta_sys == pytest.approx(0.4)
    assert sp.beta_sys == pytest.approx((sp.alpha_sys - 1) / sp.alpha_sys, rel=1e-15)
    with pytest.raises(InvalidParameters):
        SystemParams(1.0, 2.0, 1.5)


# --- sub-quadratic constants -------------------------------------------------

def test_figure_constants_against_high_precision():
    c = sub_quadratic_constants(FIG_SUB)
    alpha, plateau, x1, x2 = mp_constants(1, 2, 1.5)
    assert c.alpha == pytest.approx(float(alpha), rel=1e-15)
    assert c.alpha == pytest.approx(0.544331, abs=1e-6)
    assert c.v1_threshold == pytest.approx(2 / 3, rel=1e-15)
    assert c.plateau == c.v1_threshold
    assert c.x2 == pytest.approx(float(x2), rel=1e-14)
    assert c.x1 == pytest.approx(float(x1), rel=1e-15)
    assert c.x2 == pytest.approx(0.544331, abs=1e-6)


def test_q2_alpha_exact():
    c = sub_quadratic_constants(OdiParams(1.0, 2.0, 2.0))
    assert c.alpha == 0.5


def test_wrong_branch_rejected():
    with pytest.raises(InvalidParameters):
        sub_quadratic_constants(FIG_SUPER)
    with pytest.raises(InvalidParameters):
        in_region_sub_quadratic(FIG_SUPER, 0, 1)
    with pytest.raises(InvalidParameters):
        in_region_super_quadratic(FIG_SUB, 0, 1)


def test_boundary_F_values():
    c = sub_quadratic_constants(FIG_SUB)
    assert boundary_F(c, FIG_SUB, c.x1) == 0.0
    assert boundary_F(c, FIG_SUB, -10.0) == 0.0
    assert boundary_F(c, FIG_SUB, 0.0) == pytest.approx(2 / 3, rel=1e-14)
    assert boundary_F(c, FIG_SUB, 2.0) == pytest.approx(2 ** (2 / 3), rel=1e-15)
    assert boundary_F(c, FIG_SUB, 2.0) == pytest.approx(1.5874, abs=1e-4)


@settings(max_examples=200, deadline=None)
@given(a=st.floats(0.05, 20), b=st.floats(0.05, 20), q=st.floats(1.05, 2.0))
def test_F_continuity(a, b, q):
    p = OdiParams(a, b, q)
    c = sub_quadratic_constants(p)
    tol = 1e-12 * c.plateau
    left0 = (2 * c.alpha / b) ** (1 / q)
    right_x2 = (2 * a * c.x2 / b) ** (1 / q)
    assert abs(left0 - c.plateau) <= tol
    assert abs(right_x2 - c.plateau) <= tol


# --- sub-quadratic membership ------------------------------------------------

def test_sub_membership_examples():
    assert in_region_sub_quadratic(FIG_SUB, 0.0, 1.0)
    assert not in_region_sub_quadratic(FIG_SUB, 0.0, 2 / 3)
    assert not in_region_sub_quadratic(FIG_SUB, 0.0, -1.0)
    assert not in_region_sub_quadratic(FIG_SUB, -50.0, 0.0)
    # left of x1 any positive velocity qualifies
    assert in_region_sub_quadratic(FIG_SUB, -1.0, 1e-6)


@settings(max_examples=200, deadline=None)
@given(q=st.floats(1.05, 2.0), v0=st.floats(-5, 5), v1=st.floats(1e-3, 5),
       bump=st.floats(0, 5))
def test_sub_region_monotone_in_v1(q, v0, v1, bump):
    p = OdiParams(1.0, 2.0, q)
    if in_region_sub_quadratic(p, v0, v1):
        assert in_region_sub_quadratic(p, v0, v1 + bump)


@settings(max_examples=300, deadline=None)
@given(q=st.floats(1.05, 2.0), v0=st.floats(-5, 5), v1=st.floats(1e-3, 5))
def test_sub_region_matches_printed_conditions_off_plateau(q, v0, v1):
    # the printed two-branch test, except on the plateau line itself
    p = OdiParams(1.0, 2.0, q)
    c = sub_quadratic_constants(p)
    assume(abs(v1 - c.v1_threshold) > 1e-9)
    if v1 < c.v1_threshold:
        printed = p.a * v0 + c.alpha < p.b / 2 * v1 ** q
    else:
        printed = p.a * v0 < p.b / 2 * v1 ** q
    lhs = p.a * v0 + (c.alpha if v1 < c.v1_threshold else 0.0)
    assume(abs(lhs - p.b / 2 * v1 ** q) > 1e-9)
    assert in_region_sub_quadratic(p, v0, v1) == printed


# --- super-quadratic -----------------------------------------------------------

def test_epsilon_min_figure_case():
    eps = epsilon_min(FIG_SUPER, 0.0, 1.0)
    assert eps == pytest.approx(math.sqrt(1 / 2.5), rel=1e-15)
    assert eps == pytest.approx(0.632456, abs=1e-6)
    assert condition_f(FIG_SUPER, 0.0, 1.0, 1.0) == pytest.approx(1.5)


def test_epsilon_min_rejects_outside():
    with pytest.raises(NotCertified):
        epsilon_min(OdiParams(1.0, 1.0, 3.0), 1.0, 1.0)
    assert condition_f(OdiParams(1.0, 1.0, 3.0), 1.0, 1.0, 1.0) == pytest.approx(-1.0)


def _bisect_root(params, v0, v1):
    lo, hi = mpmath.mpf(0), mpmath.mpf(1)
    a, b, q = (mpmath.mpf(x) for x in (params.a, params.b, params.q))
    v0, v1 = mpmath.mpf(v0), mpmath.mpf(v1)
    f = lambda e: e * b * q * v1 ** (q - 2) * (e * b * v1 ** q - a * v0) - a
    for _ in range(200):
        mid = (lo + hi) / 2
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo


@settings(max_examples=200, deadline=None)
@given(a=st.floats(0.1, 10), b=st.floats(0.1, 10), q=st.floats(2.01, 5),
       v0=st.floats(-10, 10), v1=st.floats(0.05, 5))
def test_epsilon_root_properties(a, b, q, v0, v1):
    p = OdiParams(a, b, q)
    assume(condition_f(p, v0, v1, 1.0) > 1e-6)
    eps = epsilon_min(p, v0, v1)
    assert 0 < eps < 1
    terms = max(a, abs(eps * b * q * v1 ** (q - 2) * eps * b * v1 ** q),
                abs(eps * b * q * v1 ** (q - 2) * a * v0))
    assert abs(condition_f(p, v0, v1, eps)) <= 1e-10 * terms
    assert eps == pytest.approx(float(_bisect_root(p, v0, v1)), rel=1e-9)


def test_F2_examples():
    eps = epsilon_min(FIG_SUPER, 0.0, 1.0)
    A = super_quadratic_A(FIG_SUPER, eps, 0.0, 1.0)
    assert A == pytest.approx(eps)
    assert boundary_F2(FIG_SUPER, eps, A, 0.0) == pytest.approx(1.0, rel=1e-15)
    assert boundary_F2(FIG_SUPER, eps, A, 1.0) == pytest.approx(((1 + eps) / eps) ** 0.4,
                                                                rel=1e-15)
    assert boundary_F2(FIG_SUPER, eps, A, 1.0) == pytest.approx(1.4613, abs=2e-4)
    h = 1e-5
    fd = (boundary_F2(FIG_SUPER, eps, A, h) - boundary_F2(FIG_SUPER, eps, A, -h)) / (2 * h)
    closed = 1.0 / (eps * 2.5)
    assert fd == pytest.approx(closed, rel=1e-6)
    assert boundary_F2_slope(FIG_SUPER, eps, A, 0.0) == pytest.approx(closed, rel=1e-14)
    with pytest.raises(InvalidParameters):
        boundary_F2(FIG_SUPER, eps, A, -1.0)


@settings(max_examples=200, deadline=None)
@given(q=st.floats(2.01, 5), v0=st.floats(-10, 10), v1=st.floats(0.05, 5))
def test_F2_anchoring(q, v0, v1):
    p = OdiParams(1.0, 1.0, q)
    assume(condition_f(p, v0, v1, 1.0) > 1e-6)
    eps = epsilon_min(p, v0, v1)
    A = super_quadratic_A(p, eps, v0, v1)
    assert A > 0
    assert boundary_F2(p, eps, A, v0) == pytest.approx(v1, rel=1e-12)


def test_super_membership_examples():
    assert in_region_super_quadratic(FIG_SUPER, 0.0, 1.0)
    assert not in_region_super_quadratic(FIG_SUPER, 10.0, 1.0)
    assert not in_region_super_quadratic(FIG_SUPER, 0.0, 0.0)
    with pytest.raises(InvalidParameters):
        SuperQuadratic(0.5, -1.0)


# --- certificates and envelopes ---------------------------------------------

def test_certify_scalar_sub():
    c = certify_scalar(FIG_SUB, 0.0, 1.0)
    assert c.epsilon == 0.5
    assert c.t_star == 2.0
    assert c.envelope == (1.0, 0.5)
    assert rate_envelope(c, 0.0) == 1.0
    assert rate_envelope(c, 1.0) == pytest.approx(4.0, rel=1e-15)
    with pytest.raises(BeyondPole):
        rate_envelope(c, 2.0)
    assert c.provenance == "scalar" and c.l1_factor is None


def test_certify_scalar_super():
    c = certify_scalar(FIG_SUPER, 0.0, 1.0)
    assert c.epsilon == pytest.approx(0.632456, abs=1e-6)
    assert c.t_star == pytest.approx(1 / ((1 - math.sqrt(0.4)) * 1.5), rel=1e-14)
    assert c.t_star == pytest.approx(1.81384, abs=1e-5)


def test_certify_scalar_inconclusive():
    with pytest.raises(NotCertified):
        certify_scalar(FIG_SUB, 100.0, 0.1)


def test_q2_uses_sub_branch():
    c = certify_scalar(OdiParams(1.0, 2.0, 2.0), 0.0, 1.0)
    assert c.epsilon == 0.5
    assert c.region.kind == "subq"


@settings(max_examples=100, deadline=None)
@given(q=st.floats(1.05, 4), v0=st.floats(-5, 0), v1=st.floats(1.0, 5),
       frac=st.floats(0, 0.999))
def test_envelope_pole_and_monotone(q, v0, v1, frac):
    p = OdiParams(1.0, 2.0, q)
    c = certify_scalar(p, v0, v1)
    assert c.t_star == c.base / c.slope
    t = frac * c.t_star
    assert rate_envelope(c, t) >= rate_envelope(c, 0.5 * t)
    near = rate_envelope(c, c.t_star * (1 - 1e-9))
    assert near > 1e3 * v1 or q > 3  # diverges like (1e-9)^(-1/(q-1))
    with pytest.raises(BeyondPole):
        rate_envelope(c, c.t_star * (1 + 1e-9))


# --- system ---------------------------------------------------------------------

def test_in_region_system_examples():
    sp = SystemParams(1.0, 1.5, 2.0)
    assert in_region_system(sp, 4, 4, 4, 4)
    assert not in_region_system(sp, 1, 1, 2, 2)
    assert not in_region_system(sp, 4, 4, 1, 4)


def test_certify_system_example():
    sp = SystemParams(1.0, 1.5, 2.0)
    c = certify_system(sp, 4, 4, 4, 4)
    assert c.base == pytest.approx(8 ** -0.5, rel=1e-15)
    assert c.slope == pytest.approx(0.2 * 2 ** -0.5, rel=1e-15)
    assert c.t_star == pytest.approx(2.5, rel=1e-14)
    assert rate_envelope(c, 0.0) == pytest.approx(8.0, rel=1e-15)
    assert c.epsilon is None and c.l1_factor is None
    lam = certify_system(sp, 4, 4, 4, 4, lambda_mode=True, phi_sup=0.5)
    assert lam.l1_factor == 2.0
    with pytest.raises(InvalidParameters):
        certify_system(sp, 4, 4, 4, 4, lambda_mode=True)
    with pytest.raises(NotCertified):
        certify_system(sp, 1, 1, 2, 2)


def test_certify_system_symmetric():
    sp = SystemParams(1.0, 2.0, 2.0)
    assert 16 >= 1.5 * 4
    c = certify_system(sp, 4, 4, 4, 4)
    assert c.power == 2.0


def test_boundary_fp():
    assert boundary_fp(1.0, 1.5, 0.0) == 0.0
    assert boundary_fp(1.0, 1.5, -5.0) == 0.0
    assert boundary_fp(1.0, 1.5, 3.0) == pytest.approx(5 ** (2 / 3), rel=1e-15)
    assert boundary_fp(1.0, 1.5, 3.0) == pytest.approx(2.92402, abs=1e-5)


# --- PDE reductions -------------------------------------------------------------

def test_levine_examples():
    assert levine_s0(1, 1, 2) == 2.0
    assert levine_region(1, 1, 2, 3, 4)
    assert not levine_region(1, 1, 2, 1, 4)
    assert not levine_region(1, 1, 2, 3, 3)


@settings(max_examples=300, deadline=None)
@given(q=st.floats(1.05, 2.0), d0=st.floats(1e-6, 50), d1=st.floats(1e-6, 50))
def test_levine_inside_ours(q, d0, d1):
    s0 = levine_s0(1.0, 1.0, q)
    v0 = s0 + d0
    v1 = v0 + d1
    assert levine_region(1.0, 1.0, q, v0, v1)
    assert in_region_sub_quadratic(OdiParams(1.0, 1.0, q), v0, v1)


def test_ours_exceeds_levine():
    p = OdiParams(1.0, 1.0, 1.5)
    assert in_region_sub_quadratic(p, -3.0, 0.5)
    assert not levine_region(1.0, 1.0, 1.5, -3.0, 0.5)
    # listed witness (-1, 0.5) sits below F(-1) ~ 1.77
    assert not in_region_sub_quadratic(p, -1.0, 0.5)


def test_certify_wave():
    c = certify_wave(1.0, 2.0, 1.5, 0.0, 1.0, 0.5)
    assert c.t_star == 2.0 and c.l1_factor == 2.0 and c.provenance == "wave"
    c = certify_wave(1.0, 1.0, 2.5, 0.0, 1.0, 0.5)
    assert c.epsilon == pytest.approx(0.632456, abs=1e-6)
    with pytest.raises(NotCertified):
        certify_wave(1.0, 2.0, 1.5, 100.0, 0.1, 0.5)


def test_reduce_elliptic():
    # a = b = 1, q = 1.5 needs v1 above 8/3 at v0 = 0
    with pytest.raises(NotCertified):
        certify_scalar(OdiParams(1.0, 1.0, 1.5), 0.0, 1.0)
    with pytest.raises(NotCertified):
        reduce_elliptic(1.0, 1.5, 0.0, 1.0)
    c = reduce_elliptic(1.0, 1.5, 0.0, 3.0)
    s = certify_scalar(OdiParams(1.0, 1.0, 1.5), 0.0, 3.0)
    assert c.t_star == s.t_star == pytest.approx(4 / math.sqrt(3), rel=1e-14)
    assert c.provenance == "elliptic"
    # lambda = 2, q = 2: b = 1/4, region is v1 > 8 at v0 = 0
    assert reduce_elliptic(2.0, 2.0, 0.0, 9.0).params.b == 0.25
    with pytest.raises(NotCertified):
        reduce_elliptic(2.0, 2.0, 0.0, 7.0)
    with pytest.raises(NotCertified):
        reduce_elliptic(1.0, 3.0, 1.0, 1.0)


def test_reduce_parabolic():
    c = reduce_parabolic(1.0, 1.5, -1.0, 1.0, 1.0, 0.0, -1.0, 3.0)
    assert c.params.b == 1.0 and c.epsilon == 0.5
    assert c.t_star == pytest.approx(4 / math.sqrt(3), rel=1e-14)
    with pytest.raises(NotCertified) as info:
        reduce_parabolic(1.0, 1.5, -1.0, 1.0, 1.0, 0.0, -1.0, 1.0)
    assert not isinstance(info.value, HypothesisViolated)
    with pytest.raises(HypothesisViolated):
        reduce_parabolic(1.0, 1.5, 0.5, 1.0, 1.0, 1.0, 0.5, 5.0)
    with pytest.raises(NotCertified) as info:
        reduce_parabolic(1.0, 1.5, 0.0, 1.0, 1.0, 5.0, 5.0, 0.01)
    assert not isinstance(info.value, HypothesisViolated)
    with pytest.raises(HypothesisViolated):
        reduce_parabolic(1.0, 1.5, -1.0, 1.0, 1.0, 0.0, 1.0, 5.0)
    with pytest.raises(InvalidParameters):
        reduce_parabolic(1.0, 1.5, -1.0, 0.5, 1.0, 0.0, -1.0, 5.0)
    # beta <= lambda with a unit gap
    assert reduce_parabolic(1.0, 1.5, 0.5, 2.0, 0.5, 1.0, 0.0, 5.0).provenance == "parabolic"


def test_certificate_to_dict_keys():
    d = certify_scalar(FIG_SUB, 0.0, 1.0).to_dict()
    assert d["certified"] is True
    assert set(d) >= {"epsilon", "t_star", "envelope", "region", "provenance"}
    assert d["envelope"]["base"] == 1.0
