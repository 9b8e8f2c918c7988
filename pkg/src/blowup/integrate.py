"""Adaptive integration with blow-up detection, used to check certificates.

The integrator is a Dormand-Prince 5(4) pair with a proportional-integral
step controller. Integration stops when the max-norm of the state crosses a
threshold (``BlownUp``), at the horizon (``Survived``), or when the
controller asks for a step below ``min_step`` (``StepCollapse``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import optimize

from .odi_core import (
    Certificate,
    InvalidParameters,
    OdiParams,
    SubQuadratic,
    SuperQuadratic,
    SystemParams,
    SystemRegion,
    boundary_F,
    boundary_F2,
    boundary_F2_slope,
    boundary_F_slope,
    boundary_fp,
    boundary_fp_slope,
    rate_envelope,
    sub_quadratic_constants,
)
from ._io import write_csv

__all__ = [
    "Field",
    "IntegratorOptions",
    "BlownUp",
    "Survived",
    "StepCollapse",
    "Trajectory",
    "BlowupEstimate",
    "InwardnessReport",
    "EnvelopeReport",
    "integrate_ivp",
    "extremal_scalar_field",
    "extremal_system_field",
    "detect_blowup",
    "boundary_inwardness",
    "check_envelope",
    "region_margin",
]


@dataclass(frozen=True)
class Field:
    """Autonomous (or not) first-order vector field ``y' = eval(t, y)``."""

    dimension: int
    eval: Callable[[float, np.ndarray], np.ndarray]
    label: str = ""
    names: tuple = ()

    def __call__(self, t, y):
        return self.eval(t, y)


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    blowup_threshold: float = 1e8
    max_steps: int = 10 ** 7
    min_step: float = 1e-14
    horizon: float = 100.0

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "blowup_threshold", "min_step", "horizon"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidParameters(f"{name} must be positive, got {v!r}")
        if self.max_steps < 1:
            raise InvalidParameters("max_steps must be >= 1")
        if not self.min_step < self.horizon:
            raise InvalidParameters("min_step must be smaller than horizon")


@dataclass(frozen=True)
class BlownUp:
    t_est: float
    component: int
    tag: str = field(default="blown_up", init=False)


@dataclass(frozen=True)
class Survived:
    horizon: float
    tag: str = field(default="survived", init=False)


@dataclass(frozen=True)
class StepCollapse:
    t_fail: float
    reason: str = "step below min_step"
    tag: str = field(default="step_collapse", init=False)


Termination = Union[BlownUp, Survived, StepCollapse]


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    steps: np.ndarray
    termination: Termination
    label: str = ""
    names: tuple = ()

    @property
    def blew_up(self) -> bool:
        return isinstance(self.termination, BlownUp)

    def to_csv(self, path) -> None:
        """Columns ``t``, state components, accepted step size (0 for the first row)."""
        names = self.names or tuple(f"s{i}" for i in range(self.states.shape[1]))
        header = ("t",) + tuple(names) + ("step",)
        rows = np.column_stack([self.times, self.states, self.steps])
        write_csv(path, header, rows)


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])
_E = _B - _B_LOW

_SAFETY = 0.9
_FAC_MIN, _FAC_MAX = 0.2, 5.0
# PI gains for a 5th-order method (Gustafsson).
_K_I, _K_P = 0.7 / 5, 0.4 / 5


def _rms(x):
    return math.sqrt(float(np.dot(x, x)) / x.size)


def _initial_step(f, t0, y0, f0, opts, order=5):
    scale = opts.abs_tol + opts.rel_tol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, opts.horizon)
    y1 = y0 + h0 * f0
    d2 = _rms((f(t0 + h0, y1) - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / order)
    return min(100 * h0, h1, opts.horizon)


def integrate_ivp(field: Field, state0, opts: IntegratorOptions = IntegratorOptions()) -> Trajectory:
    """Integrate ``field`` from ``state0`` at ``t = 0`` and keep every accepted step.

    Parameters
    ----------
    field : Field
    state0 : array_like
        Initial state, length ``field.dimension``.
    opts : IntegratorOptions

    Returns
    -------
    Trajectory
        ``termination`` is ``BlownUp`` when ``max|y| >= opts.blowup_threshold``
        (``t_est`` is the raw crossing time), ``Survived`` at the horizon, and
        ``StepCollapse`` when the controller needs a step below
        ``opts.min_step`` or ``opts.max_steps`` is exhausted.
    """
    y = np.array(state0, dtype=float)
    if y.shape != (field.dimension,):
        raise InvalidParameters(
            f"state0 has shape {y.shape}, field expects ({field.dimension},)")
    f = field.eval
    t = 0.0
    horizon = opts.horizon
    rtol, atol = opts.rel_tol, opts.abs_tol
    times, states, steps = [t], [y.copy()], [0.0]
    K = np.empty((7, y.size))
    K[0] = f(t, y)
    h = _initial_step(f, t, y, K[0], opts)
    err_prev = 1.0
    rejected = False
    termination: Optional[Termination] = None
    n_steps = 0

    # trial stages past the singularity may overflow; those steps are rejected
    with np.errstate(over="ignore", invalid="ignore"):
        while termination is None:
            if n_steps >= opts.max_steps:
                termination = StepCollapse(t, "max_steps exhausted")
                break
            last = False
            if t + h >= horizon:
                h = horizon - t
                last = True
            if h < opts.min_step and not last:
                termination = StepCollapse(t)
                break
            for s in range(1, 7):
                K[s] = f(t + _C[s] * h, y + h * np.dot(_A[s], K[:s]))
            y_new = y + h * np.dot(_B[:6], K[:6])
            K[6] = f(t + h, y_new)
            err_vec = h * np.dot(_E, K)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = _rms(err_vec / scale)
            if not math.isfinite(err) or not np.isfinite(y_new).all():
                err = math.inf

            if err <= 1.0:
                n_steps += 1
                t = horizon if last else t + h
                y = y_new
                K[0] = K[6]
                times.append(t)
                states.append(y.copy())
                steps.append(h)
                peak = np.abs(y)
                if peak.max() >= opts.blowup_threshold:
                    termination = BlownUp(t, int(np.argmax(peak)))
                    break
                if last:
                    termination = Survived(horizon)
                    break
                err = max(err, 1e-10)
                fac = _SAFETY * err ** (-_K_I) * err_prev ** _K_P
                fac = min(_FAC_MAX, max(_FAC_MIN, fac))
                if rejected:
                    fac = min(fac, 1.0)
                h *= fac
                err_prev = err
                rejected = False
            else:
                fac = _FAC_MIN if not math.isfinite(err) else max(_FAC_MIN, _SAFETY * err ** -0.2)
                h *= fac
                rejected = True

    return Trajectory(times=np.array(times), states=np.array(states), steps=np.array(steps),
                      termination=termination, label=field.label, names=field.names)


def extremal_scalar_field(params: OdiParams) -> Field:
    """Equality case ``x' = y``, ``y' = b|y|^q - a x`` of the scalar inequality."""
    a, b, q = params.a, params.b, params.q

    def rhs(t, s):
        x, y = s
        return np.array([y, b * abs(y) ** q - a * x])

    return Field(2, rhs, f"extremal scalar a={a} b={b} q={q}", ("x", "y"))


def extremal_system_field(sp: SystemParams) -> Field:
    """Equality case over ``(U, U', V, V')``: ``(U', |V'|^p - aU, V', |U'|^q - aV)``."""
    a, p, q = sp.a, sp.p, sp.q

    def rhs(t, s):
        x, u, z, y = s
        return np.array([u, abs(y) ** p - a * x, y, abs(u) ** q - a * z])

    return Field(4, rhs, f"extremal system a={a} p={p} q={q}", ("U", "Udot", "V", "Vdot"))


# ---------------------------------------------------------------------------
# blow-up time refinement

@dataclass(frozen=True)
class BlowupEstimate:
    """Fit of ``y ~ c (T - t)^(-exponent)`` to the tail of a trajectory.

    ``residual`` is the RMS misfit in time units: the fitted model is
    inverted at each tail value and compared to the recorded time.
    """

    t_est: float
    exponent: float
    residual: float
    n_points: int


def _tail(traj: Trajectory, opts: IntegratorOptions, component: Optional[int], k_min: int):
    if isinstance(traj.termination, Survived):
        raise InvalidParameters("detect_blowup needs a BlownUp or StepCollapse trajectory")
    if component is None:
        component = (traj.termination.component if isinstance(traj.termination, BlownUp)
                     else int(np.argmax(np.abs(traj.states[-1]))))
    y = np.abs(traj.states[:, component])
    mask = y >= 0.01 * opts.blowup_threshold
    # the tail must be the trailing run above the cut
    idx = np.flatnonzero(~mask)
    start = idx[-1] + 1 if idx.size else 0
    t_tail, y_tail = traj.times[start:], y[start:]
    if t_tail.size < k_min:
        raise InvalidParameters(
            f"insufficient tail data: {t_tail.size} accepted steps above "
            f"{0.01 * opts.blowup_threshold:g}, need {k_min}")
    return t_tail, y_tail


def _fit_fixed_exponent(t, y, gamma):
    # y^(-1/gamma) = k (T - t) is linear in t
    z = y ** (-1.0 / gamma)
    slope, intercept = np.polyfit(t, z, 1)
    T = -intercept / slope
    return T, slope


def detect_blowup(traj: Trajectory, opts: IntegratorOptions, q: Optional[float] = None,
                  component: Optional[int] = None, k_min: int = 8) -> BlowupEstimate:
    """Refine the blow-up time from the trajectory tail.

    Uses the accepted steps whose |component| exceeds ``0.01 *
    blowup_threshold``. With ``q`` given the exponent is fixed to
    ``1/(q-1)``; otherwise it is fitted together with ``T``.

    Raises
    ------
    InvalidParameters
        For a ``Survived`` trajectory, or fewer than ``k_min`` tail points.
    """
    t, y = _tail(traj, opts, component, k_min)
    t0 = t[0]
    tt = t - t0  # shift for conditioning

    if q is not None:
        if not q > 1:
            raise InvalidParameters("q must be > 1")
        gamma = 1.0 / (q - 1.0)
        T, _ = _fit_fixed_exponent(tt, y, gamma)
    else:
        logy = np.log(y)
        last = tt[-1]
        span = max(tt[-1] - tt[0], 1e-300)

        def misfit(s):
            T = last + math.exp(s)
            X = np.log(T - tt)
            slope, intercept = np.polyfit(X, logy, 1)
            r = logy - (slope * X + intercept)
            return float(np.dot(r, r))

        # search the gap T - t_last on a log scale, then polish
        grid = np.linspace(math.log(span * 1e-8), math.log(span * 1e2), 200)
        vals = [misfit(s) for s in grid]
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = optimize.minimize_scalar(misfit, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        T = last + math.exp(res.x)
        slope, _ = np.polyfit(np.log(T - tt), logy, 1)
        gamma = -slope

    # invert y = c (T - t)^(-gamma) at each tail point
    logc = float(np.mean(np.log(y) + gamma * np.log(T - tt)))
    t_model = T - np.exp((logc - np.log(y)) / gamma)
    residual = math.sqrt(float(np.mean((t_model - tt) ** 2)))
    return BlowupEstimate(t_est=float(T + t0), exponent=float(gamma), residual=residual,
                          n_points=int(t.size))


# ---------------------------------------------------------------------------
# region checks

@dataclass(frozen=True)
class InwardnessReport:
    """Minimum over boundary samples of the field's component along the unit
    inward normal, with the sample where it occurs."""

    min_inward: float
    argmin: tuple
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.min_inward >= -1e-10


def _planar_inward(state, slope, vec):
    # boundary y = g(x), inward normal (-g', 1); vertical tangent -> (-1, 0)
    if math.isinf(slope):
        return -vec[0]
    return (vec[1] - slope * vec[0]) / math.hypot(1.0, slope)


def boundary_inwardness(kind, params, n_samples: int, x_range: Sequence[float],
                        velocity_floor: Optional[Sequence[float]] = None) -> InwardnessReport:
    """Sample the region boundary and evaluate the extremal field's inward component.

    Parameters
    ----------
    kind : SubQuadratic | SuperQuadratic | SystemRegion
    params : OdiParams or SystemParams
        Must match ``kind``.
    n_samples : int
        Number of points, spread uniformly over ``x_range`` (endpoints included).
    x_range : (lo, hi)
    velocity_floor : (U1, V1), optional
        System region only. Boundary samples are restricted to the face
        points reachable from data with ``U' >= U1`` and ``V' >= V1``,
        which is where the entering-field argument applies.
    """
    lo, hi = map(float, x_range)
    if not (n_samples >= 1 and hi >= lo):
        raise InvalidParameters("need n_samples >= 1 and a nonempty x_range")
    xs = np.linspace(lo, hi, n_samples)
    best, where = math.inf, ()

    if isinstance(kind, (SubQuadratic, SuperQuadratic)):
        if not isinstance(params, OdiParams):
            raise InvalidParameters("planar regions need OdiParams")
        fld = extremal_scalar_field(params)
        if isinstance(kind, SubQuadratic):
            consts = kind.constants
            g = lambda x: boundary_F(consts, params, x)
            dg = lambda x: boundary_F_slope(consts, params, x)
        else:
            g = lambda x: boundary_F2(params, kind.epsilon, kind.A, x)
            dg = lambda x: boundary_F2_slope(params, kind.epsilon, kind.A, x)
        for x in xs:
            pt = np.array([x, g(x)])
            val = _planar_inward(pt, dg(x), fld.eval(0.0, pt))
            if val < best:
                best, where = val, (float(pt[0]), float(pt[1]))
        return InwardnessReport(float(best), where, n_samples)

    if isinstance(kind, SystemRegion):
        if not isinstance(params, SystemParams):
            raise InvalidParameters("system region needs SystemParams")
        a, p, q = params.a, params.p, params.q
        fld = extremal_system_field(params)
        u_min, y_min = velocity_floor if velocity_floor is not None else (0.0, 0.0)
        count = 0
        for x in xs:
            # face V' = f_p(U) with (V, U') on or above its own curve
            y = boundary_fp(a, p, x)
            u = max(boundary_fp(a, q, x), u_min)
            if y >= y_min:
                s = np.array([x, u, x, y])
                d = fld.eval(0.0, s)
                sl = boundary_fp_slope(a, p, x)
                val = -d[0] if math.isinf(sl) else (d[3] - sl * d[0]) / math.hypot(1.0, sl)
                count += 1
                if val < best:
                    best, where = val, tuple(map(float, s))
            # face U' = f_q(V)
            u = boundary_fp(a, q, x)
            y = max(boundary_fp(a, p, x), y_min)
            if u >= u_min:
                s = np.array([x, u, x, y])
                d = fld.eval(0.0, s)
                sl = boundary_fp_slope(a, q, x)
                val = -d[2] if math.isinf(sl) else (d[1] - sl * d[2]) / math.hypot(1.0, sl)
                count += 1
                if val < best:
                    best, where = val, tuple(map(float, s))
        if count == 0:
            raise InvalidParameters("no boundary samples satisfy the velocity floor")
        return InwardnessReport(float(best), where, count)

    raise InvalidParameters(f"inwardness not defined for region {kind!r}")


def region_margin(cert: Certificate, states: np.ndarray) -> np.ndarray:
    """Signed distance-like margin of each state above the certificate's boundary.

    Planar regions: ``y - g(x)``. System region: the smaller of
    ``V' - f_p(U)`` and ``U' - f_q(V)``. Positive means inside.
    """
    states = np.atleast_2d(states)
    region, params = cert.region, cert.params
    if isinstance(region, SubQuadratic):
        c = region.constants
        return np.array([s[1] - boundary_F(c, params, s[0]) for s in states])
    if isinstance(region, SuperQuadratic):
        out = []
        for x, y in states[:, :2]:
            s = params.a * x + region.A
            out.append(y - boundary_F2(params, region.epsilon, region.A, x) if s > 0 else y)
        return np.array(out)
    if isinstance(region, SystemRegion):
        a, p, q = params.a, params.p, params.q
        return np.array([min(s[3] - boundary_fp(a, p, s[0]), s[1] - boundary_fp(a, q, s[2]))
                         for s in states])
    raise InvalidParameters(f"no margin for region {region!r}")


@dataclass(frozen=True)
class EnvelopeReport:
    passed: bool
    worst_margin: float
    checked: int
    t_est: Optional[float]
    t_star: float
    first_violation: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "worst_margin": self.worst_margin,
                "checked": self.checked, "t_est": self.t_est, "t_star": self.t_star,
                "first_violation": self.first_violation}


def _derivative_series(traj: Trajectory, cert: Certificate) -> np.ndarray:
    if cert.provenance == "system":
        return traj.states[:, 1] + traj.states[:, 3]
    return traj.states[:, 1]


def _matches_certificate(traj: Trajectory, cert: Certificate) -> bool:
    s0 = traj.states[0]
    if cert.provenance == "system":
        U0, V0, U1, V1 = cert.initial
        want = (U0, U1, V0, V1)
    else:
        want = cert.initial
    return s0.size == len(want) and np.allclose(s0, want, rtol=1e-12, atol=0)


def check_envelope(traj: Trajectory, cert: Certificate, slack: float = 0.0) -> EnvelopeReport:
    """Compare the trajectory's derivative to the certificate's envelope.

    At every accepted step with ``t < min(t_est, t_star)`` the derivative
    (``y`` for scalar data, ``U' + V'`` for the system) must be at least
    ``(1 - slack) * envelope(t)``, and the trajectory must have blown up with
    ``t_est <= (1 + slack) * t_star``.

    ``worst_margin`` is the smallest ``derivative / envelope - 1``.

    Raises
    ------
    InvalidParameters
        If the trajectory does not start at the certificate's initial data,
        or ``slack`` is outside ``[0, 0.1]``.
    """
    if not 0 <= slack <= 0.1:
        raise InvalidParameters("slack must lie in [0, 0.1]")
    if not _matches_certificate(traj, cert):
        raise InvalidParameters("trajectory does not start at the certified initial data")
    t_est = traj.termination.t_est if isinstance(traj.termination, BlownUp) else None
    limit = min(t_est if t_est is not None else math.inf, cert.t_star)
    keep = traj.times < limit
    t = traj.times[keep]
    d = _derivative_series(traj, cert)[keep]
    env = rate_envelope(cert, t)
    ratio = d / env
    # 4 ulp: at t = 0 the envelope equals v1 only up to rounding
    bad = np.flatnonzero(ratio < 1.0 - slack - 4 * np.finfo(float).eps)
    worst = float(ratio.min() - 1.0) if ratio.size else math.inf
    violation = None
    if bad.size:
        i = int(bad[0])
        violation = {"kind": "envelope", "t": float(t[i]), "value": float(d[i]),
                     "bound": float(env[i])}
    elif t_est is None:
        violation = {"kind": "no_blowup", "termination": traj.termination.tag}
    elif t_est > (1.0 + slack) * cert.t_star:
        violation = {"kind": "late_blowup", "t_est": t_est}
    return EnvelopeReport(passed=violation is None, worst_margin=worst, checked=int(t.size),
                          t_est=t_est, t_star=cert.t_star, first_violation=violation)
