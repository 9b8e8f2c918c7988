"""Sine-Galerkin solvers for the wave problems on (0, pi) with Dirichlet ends.

Unknowns are expanded as ``u(x, t) = sum_k c_k(t) sin(k x)``, ``k = 1..N``;
the Laplacian is diagonal with eigenvalues ``k^2``, so the first eigenvalue is
1 with eigenfunction ``phi(x) = sin(x) / 2`` (unit integral, sup-norm 1/2).
Nonlinear forcings are evaluated pointwise on composite Gauss-Legendre
nodes and projected back onto the modes.

Problems (equality case of each inequality):

``SingleWave``           u_tt - u_xx = C |u_t|^q
``WaveSystem``           u_tt - u_xx = C |v_t|^p,  v_tt - v_xx = C |u_t|^q
``HyperbolicElliptic``   u_tt - u_xx = C |v_t|^q,  -v_xx = u
``HyperbolicParabolic``  u_tt - u_xx = C |v_t|^q,  w_t - w_xx = beta w^p,  w = u - v
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .integrate import (
    BlownUp,
    Field,
    IntegratorOptions,
    Trajectory,
    integrate_ivp,
)
from .odi_core import Certificate, InvalidParameters, rate_envelope
from ._io import write_csv, write_json

__all__ = [
    "PHI_SUP",
    "LAMBDA1",
    "SingleWave",
    "WaveSystem",
    "HyperbolicElliptic",
    "HyperbolicParabolic",
    "SpectralConfig",
    "Quadrature",
    "ModalState",
    "WaveProblem",
    "WaveTrajectory",
    "TheoremReport",
    "gauss_legendre_panels",
    "build_wave_problem",
    "project_eigen",
    "project_eigen_quadrature",
    "simulate_wave",
    "verify_theorem",
]

LAMBDA1 = 1.0
PHI_SUP = 0.5
_GL_POINTS = 8
_TAIL_LIMIT = 1e-3


@dataclass(frozen=True)
class SingleWave:
    name: str = field(default="wave", init=False)


@dataclass(frozen=True)
class WaveSystem:
    p: float
    q: float
    name: str = field(default="system", init=False)


@dataclass(frozen=True)
class HyperbolicElliptic:
    q: float
    name: str = field(default="elliptic", init=False)


@dataclass(frozen=True)
class HyperbolicParabolic:
    q: float
    beta: float
    p: float = 1.0
    m: float = 1.0
    name: str = field(default="parabolic", init=False)


Problem = Union[SingleWave, WaveSystem, HyperbolicElliptic, HyperbolicParabolic]


@dataclass(frozen=True)
class SpectralConfig:
    n_modes: int
    C: float = 1.0
    q: float = 1.5
    problem: Problem = SingleWave()
    n_quad: Optional[int] = None
    horizon: float = 10.0

    def __post_init__(self):
        if self.n_modes < 1:
            raise InvalidParameters("n_modes must be >= 1")
        if self.n_quad is None:
            object.__setattr__(self, "n_quad", _GL_POINTS * self.n_modes)
        if self.n_quad < 4 * self.n_modes:
            raise InvalidParameters(
                f"n_quad={self.n_quad} must be >= 4 * n_modes = {4 * self.n_modes}")
        if not (self.C >= 0 and math.isfinite(self.C)):
            raise InvalidParameters("C must be a nonnegative finite number")
        if not self.q > 1:
            raise InvalidParameters("q must be > 1")
        if not self.horizon > 0:
            raise InvalidParameters("horizon must be positive")
        pr = self.problem
        if isinstance(pr, WaveSystem) and not 1 < pr.p <= pr.q:
            raise InvalidParameters("WaveSystem needs 1 < p <= q")
        if isinstance(pr, HyperbolicParabolic):
            if pr.m != 1:
                raise InvalidParameters("parabolic simulation supports m = 1 only")
            if not 0 < pr.p <= 1:
                raise InvalidParameters("parabolic simulation needs 0 < p <= 1")

    @property
    def exponent(self) -> float:
        """Power in the wave forcing of ``u`` (the one entering the certificate)."""
        pr = self.problem
        if isinstance(pr, WaveSystem):
            return pr.p
        if isinstance(pr, (HyperbolicElliptic, HyperbolicParabolic)):
            return pr.q
        return self.q


def gauss_legendre_panels(n_panels: int, lo: float = 0.0, hi: float = math.pi,
                          points: int = _GL_POINTS):
    """Nodes and weights of composite Gauss-Legendre quadrature on ``[lo, hi]``."""
    xg, wg = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class Quadrature:
    """Collocation tables shared by every evaluation of a problem."""

    nodes: np.ndarray
    weights: np.ndarray
    sines: np.ndarray  # sines[j, k-1] = sin(k x_j)
    phi: np.ndarray

    @classmethod
    def build(cls, n_modes: int, n_quad: int) -> "Quadrature":
        n_panels = max(1, math.ceil(n_quad / _GL_POINTS))
        x, w = gauss_legendre_panels(n_panels)
        k = np.arange(1, n_modes + 1)
        return cls(x, w, np.sin(np.outer(x, k)), 0.5 * np.sin(x))

    def synth(self, coef):
        return self.sines @ coef

    def project(self, values):
        """Sine coefficients ``(2/pi) int f sin(kx)`` of nodal values."""
        return (2.0 / math.pi) * (self.sines.T @ (self.weights * values))

    def integrate(self, values) -> float:
        return float(self.weights @ values)

    def against_phi(self, values) -> float:
        return float((self.weights * self.phi) @ values)


@dataclass(frozen=True)
class ModalState:
    """Coefficients at one time.

    ``u, ut`` are the wave unknown. ``v, vt`` are the second unknown for the
    coupled problems (evolved for the wave system, reconstructed for the
    elliptic and parabolic ones); ``None`` for the single wave.
    """

    time: float
    u: np.ndarray
    ut: np.ndarray
    v: Optional[np.ndarray] = None
    vt: Optional[np.ndarray] = None


def project_eigen(state: ModalState, which: str = "u"):
    """``(int w phi, int w_t phi)`` from the modal closed form ``(pi/4) c_1``."""
    c, d = (state.u, state.ut) if which == "u" else (state.v, state.vt)
    return math.pi / 4.0 * c[0], math.pi / 4.0 * d[0]


def project_eigen_quadrature(state: ModalState, quad: Quadrature, which: str = "u"):
    """Same projection as :func:`project_eigen`, by quadrature."""
    c, d = (state.u, state.ut) if which == "u" else (state.v, state.vt)
    return quad.against_phi(quad.synth(c)), quad.against_phi(quad.synth(d))


def _as_coefficients(data, quad: Quadrature, n: int) -> np.ndarray:
    if data is None:
        return np.zeros(n)
    if callable(data):
        return quad.project(np.asarray(data(quad.nodes), dtype=float))
    arr = np.asarray(data, dtype=float).ravel()
    if arr.size > n:
        raise InvalidParameters(f"got {arr.size} coefficients for {n} modes")
    out = np.zeros(n)
    out[:arr.size] = arr
    return out


@dataclass(frozen=True)
class WaveProblem:
    """A built modal problem: the vector field, the initial state and the
    tables needed to read states back."""

    config: SpectralConfig
    quad: Quadrature
    field: Field
    y0: np.ndarray
    k2: np.ndarray

    def unpack(self, y: np.ndarray, t: float = 0.0) -> ModalState:
        n = self.config.n_modes
        pr = self.config.problem
        c, d = y[:n], y[n:2 * n]
        if isinstance(pr, SingleWave):
            return ModalState(t, c, d)
        if isinstance(pr, WaveSystem):
            return ModalState(t, c, d, y[2 * n:3 * n], y[3 * n:])
        if isinstance(pr, HyperbolicElliptic):
            return ModalState(t, c, d, c / self.k2, d / self.k2)
        w = y[2 * n:]
        wt = self._gap_rate(w)
        return ModalState(t, c, d, c - w, d - wt)

    def _gap_rate(self, w):
        pr = self.config.problem
        src = self.quad.project(np.maximum(self.quad.synth(w), 0.0) ** pr.p)
        return -self.k2 * w + pr.beta * src

    @property
    def coupled(self) -> bool:
        return not isinstance(self.config.problem, SingleWave)


def build_wave_problem(config: SpectralConfig, u0=None, u1=None, v0=None, v1=None) -> WaveProblem:
    """Assemble the modal field for ``config.problem``.

    Initial data are callables of ``x`` (sampled at the quadrature nodes and
    projected) or coefficient sequences (zero-padded to ``n_modes``). ``v1``
    is used by the wave system only; ``v0`` by the wave system and the
    parabolic problem, where ``u0 - v0 >= 0`` is required at every node.
    """
    n = config.n_modes
    quad = Quadrature.build(n, config.n_quad)
    k2 = np.arange(1, n + 1, dtype=float) ** 2
    C, pr = config.C, config.problem
    c0, d0 = _as_coefficients(u0, quad, n), _as_coefficients(u1, quad, n)
    synth, proj = quad.synth, quad.project

    if isinstance(pr, SingleWave):
        q = config.q

        def rhs(t, y):
            c, d = y[:n], y[n:]
            return np.concatenate([d, -k2 * c + C * proj(np.abs(synth(d)) ** q)])

        y0 = np.concatenate([c0, d0])
        names = [f"c{k}" for k in range(1, n + 1)] + [f"d{k}" for k in range(1, n + 1)]
    elif isinstance(pr, WaveSystem):
        p, q = pr.p, pr.q

        def rhs(t, y):
            c, d, e, f = y[:n], y[n:2 * n], y[2 * n:3 * n], y[3 * n:]
            return np.concatenate([d, -k2 * c + C * proj(np.abs(synth(f)) ** p),
                                   f, -k2 * e + C * proj(np.abs(synth(d)) ** q)])

        y0 = np.concatenate([c0, d0, _as_coefficients(v0, quad, n),
                             _as_coefficients(v1, quad, n)])
        names = ([f"c{k}" for k in range(1, n + 1)] + [f"d{k}" for k in range(1, n + 1)]
                 + [f"e{k}" for k in range(1, n + 1)] + [f"f{k}" for k in range(1, n + 1)])
    elif isinstance(pr, HyperbolicElliptic):
        q = pr.q

        def rhs(t, y):
            c, d = y[:n], y[n:]
            vt = d / k2  # -v_xx = u, differentiated in time
            return np.concatenate([d, -k2 * c + C * proj(np.abs(synth(vt)) ** q)])

        y0 = np.concatenate([c0, d0])
        names = [f"c{k}" for k in range(1, n + 1)] + [f"d{k}" for k in range(1, n + 1)]
    elif isinstance(pr, HyperbolicParabolic):
        q, beta, pp = pr.q, pr.beta, pr.p
        gap0 = c0 - _as_coefficients(v0, quad, n)
        if (synth(gap0) < -1e-12 * max(1.0, np.abs(gap0).max())).any():
            raise InvalidParameters("parabolic data need u0 - v0 >= 0 at every node")

        def rhs(t, y):
            c, d, w = y[:n], y[n:2 * n], y[2 * n:]
            wt = -k2 * w + beta * proj(np.maximum(synth(w), 0.0) ** pp)
            vt = d - wt
            return np.concatenate([d, -k2 * c + C * proj(np.abs(synth(vt)) ** q), wt])

        y0 = np.concatenate([c0, d0, gap0])
        names = ([f"c{k}" for k in range(1, n + 1)] + [f"d{k}" for k in range(1, n + 1)]
                 + [f"w{k}" for k in range(1, n + 1)])
    else:
        raise InvalidParameters(f"unknown problem {pr!r}")

    fld = Field(y0.size, rhs, f"{pr.name} N={n}", tuple(names))
    return WaveProblem(config, quad, fld, y0, k2)


@dataclass(frozen=True)
class WaveTrajectory:
    """Per-snapshot diagnostics of a modal run.

    For coupled problems ``v, vp`` are ``U, U'`` and ``V, Vp`` the second
    unknown's projections. ``l1`` is ``||u_t||_1`` (``||u_t + v_t||_1`` for
    the wave system). ``jensen`` is ``int |s_t|^r phi - |int s_t phi|^r``
    for the forcing argument ``s`` (the minimum over both equations for the
    wave system). ``tail`` is the spectral tail ratio; snapshots after
    ``trusted_until`` are past resolution loss.
    """

    problem: WaveProblem
    trajectory: Trajectory
    times: np.ndarray
    v: np.ndarray
    vp: np.ndarray
    V: Optional[np.ndarray]
    Vp: Optional[np.ndarray]
    l1: np.ndarray
    jensen: np.ndarray
    tail: np.ndarray
    trusted_until: float
    resolution_loss: bool

    @property
    def termination(self):
        return self.trajectory.termination

    @property
    def trusted(self) -> np.ndarray:
        return self.times <= self.trusted_until

    @property
    def indicator_time(self) -> Optional[float]:
        """First time the run signals blow-up: resolution loss or threshold."""
        if self.resolution_loss:
            return self.trusted_until
        if isinstance(self.termination, BlownUp):
            return self.termination.t_est
        return None

    def state(self, i: int) -> ModalState:
        return self.problem.unpack(self.trajectory.states[i], float(self.times[i]))

    def to_csv(self, path) -> None:
        header = ["t", "v", "vp", "l1", "jensen", "tail"]
        cols = [self.times, self.v, self.vp, self.l1, self.jensen, self.tail]
        if self.V is not None:
            header[3:3] = ["V", "Vp"]
            cols[3:3] = [self.V, self.Vp]
        write_csv(path, header, np.column_stack(cols))

    def modes_to_json(self, path) -> None:
        snaps = []
        for i in range(self.times.size):
            s = self.state(i)
            rec = {"t": s.time, "u": s.u.tolist(), "ut": s.ut.tolist()}
            if s.v is not None:
                rec.update(v=s.v.tolist(), vt=s.vt.tolist())
            snaps.append(rec)
        write_json(path, {"problem": self.problem.config.problem.name,
                          "n_modes": self.problem.config.n_modes, "snapshots": snaps})


def _tail_ratio(coefs) -> float:
    # last two modes: symmetric data never excite every other mode
    peak = np.abs(coefs).max()
    return float(np.abs(coefs[-2:]).max() / peak) if peak > 0 else 0.0


def simulate_wave(problem: WaveProblem, opts: IntegratorOptions = IntegratorOptions()) -> WaveTrajectory:
    """Integrate the modal field and record the projected diagnostics.

    The horizon is ``min(opts.horizon, config.horizon)``. Resolution loss is
    flagged the first time the tail ratio ``max(|c_{N-1}|, |c_N|) / max_k |c_k|``
    (over each evolved block of coefficients) exceeds 1e-3; the previous snapshot time is
    kept as ``trusted_until``. For a single mode the tail ratio is not
    meaningful and is reported as 0.
    """
    cfg = problem.config
    if cfg.horizon < opts.horizon:
        opts = IntegratorOptions(opts.rel_tol, opts.abs_tol, opts.blowup_threshold,
                                 opts.max_steps, opts.min_step, cfg.horizon)
    traj = integrate_ivp(problem.field, problem.y0, opts)
    quad, pr, C = problem.quad, cfg.problem, cfg.C
    n_snap, n = traj.times.size, cfg.n_modes
    v, vp, l1, jen, tail = (np.empty(n_snap) for _ in range(5))
    V = Vp = None
    if problem.coupled:
        V, Vp = np.empty(n_snap), np.empty(n_snap)
    trusted_until, lost = float(traj.times[-1]), False

    for i in range(n_snap):
        s = problem.unpack(traj.states[i], float(traj.times[i]))
        ut = quad.synth(s.ut)
        v[i], vp[i] = project_eigen(s)
        if s.v is not None:
            V[i], Vp[i] = project_eigen(s, "v")
            vt = quad.synth(s.vt)
        if isinstance(pr, SingleWave):
            r = cfg.q
            jen[i] = quad.against_phi(np.abs(ut) ** r) - abs(quad.against_phi(ut)) ** r
            l1[i] = quad.integrate(np.abs(ut))
        elif isinstance(pr, WaveSystem):
            j1 = quad.against_phi(np.abs(vt) ** pr.p) - abs(quad.against_phi(vt)) ** pr.p
            j2 = quad.against_phi(np.abs(ut) ** pr.q) - abs(quad.against_phi(ut)) ** pr.q
            jen[i] = min(j1, j2)
            l1[i] = quad.integrate(np.abs(ut + vt))
        else:
            r = pr.q
            jen[i] = quad.against_phi(np.abs(vt) ** r) - abs(quad.against_phi(vt)) ** r
            l1[i] = quad.integrate(np.abs(ut))
        if cfg.n_modes > 1:
            y = traj.states[i]
            tail[i] = max(_tail_ratio(y[j:j + n]) for j in range(0, y.size, n))
        else:
            tail[i] = 0.0
        if not lost and tail[i] > _TAIL_LIMIT:
            lost = True
            trusted_until = float(traj.times[i - 1]) if i > 0 else 0.0

    return WaveTrajectory(problem, traj, traj.times, v, vp, V, Vp, l1, jen, tail,
                          trusted_until, lost)


@dataclass(frozen=True)
class TheoremReport:
    passed: bool
    checked: int
    worst_derivative_margin: float
    worst_l1_margin: float
    min_ode_residual: float
    min_jensen: float
    indicator_time: Optional[float]
    t_star: float
    first_violation: Optional[dict] = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _check_matching(wt: WaveTrajectory, cert: Certificate) -> None:
    cfg = wt.problem.config
    pr = cfg.problem
    want = {SingleWave: "wave", WaveSystem: "system", HyperbolicElliptic: "elliptic",
            HyperbolicParabolic: "parabolic"}[type(pr)]
    if cert.provenance != want:
        raise InvalidParameters(f"certificate provenance {cert.provenance!r} does not match "
                                f"a {pr.name!r} run")
    if cert.l1_factor is None:
        raise InvalidParameters("certificate carries no L1 factor")
    close = lambda x, y: abs(x - y) <= 1e-12 * max(1.0, abs(x), abs(y))
    cp = cert.params
    if want == "system":
        if not (close(cp.a, LAMBDA1) and close(cp.p, pr.p) and close(cp.q, pr.q)
                and close(cfg.C, 1.0)):
            raise InvalidParameters("system certificate parameters do not match the run")
        U0, V0, U1, V1 = cert.initial
        got = (wt.v[0], wt.V[0], wt.vp[0], wt.Vp[0])
        if not all(close(x, y) for x, y in zip((U0, V0, U1, V1), got)):
            raise InvalidParameters("certificate initial data differ from the run's projections")
        return
    b = cfg.C * LAMBDA1 ** (-pr.q) if want == "elliptic" else cfg.C
    if not (close(cp.a, LAMBDA1) and close(cp.b, b) and close(cp.q, cfg.exponent)):
        raise InvalidParameters(
            f"certificate (a={cp.a}, b={cp.b}, q={cp.q}) does not match the run "
            f"(lambda={LAMBDA1}, C={cfg.C}, q={cfg.exponent})")
    if not (close(cert.initial[0], wt.v[0]) and close(cert.initial[1], wt.vp[0])):
        raise InvalidParameters("certificate initial data differ from the run's projections")


def verify_theorem(wt: WaveTrajectory, cert: Certificate, slack: float = 0.0,
                   tol: float = 1e-8) -> TheoremReport:
    """Check a modal run against a PDE certificate at every trusted snapshot.

    (i)   projected derivative ``>= (1 - slack) * envelope``;
    (ii)  ``L1`` norm ``>= (1 - slack) * l1_factor * envelope``;
    (iii) the projected equation residual ``v'' + lambda v - int g phi`` is
          reconstructed from the modal right-hand side and must be ``>= -tol``,
          and the Jensen residual must be ``>= -tol``.

    The run must also show a blow-up indicator no later than
    ``(1 + slack) * t_star``.

    Raises
    ------
    InvalidParameters
        If the certificate was built for other parameters or other data.
    """
    _check_matching(wt, cert)
    prob = wt.problem
    cfg, quad = prob.config, prob.quad
    system = cert.provenance == "system"
    keep = wt.trusted & (wt.times < cert.t_star)
    idx = np.flatnonzero(keep)
    env = rate_envelope(cert, wt.times[idx])
    deriv = (wt.vp + wt.Vp)[idx] if system else wt.vp[idx]
    dmargin = deriv / env - 1.0
    lmargin = wt.l1[idx] / (cert.l1_factor * env) - 1.0

    # (iii) from the modal right-hand side: (pi/4) * forcing_1 = int g phi
    ode_res = np.empty(idx.size)
    n = cfg.n_modes
    for j, i in enumerate(idx):
        y = wt.trajectory.states[i]
        dy = prob.field.eval(wt.times[i], y)
        s = prob.unpack(y)
        if system:
            vpp = math.pi / 4 * dy[n]
            g = cfg.C * quad.against_phi(np.abs(quad.synth(s.vt)) ** cert.params.p)
            ode_res[j] = vpp + LAMBDA1 * wt.v[i] - g
        else:
            vpp = math.pi / 4 * dy[n]
            r = cfg.exponent
            arg = s.ut if isinstance(cfg.problem, SingleWave) else s.vt
            g = cfg.C * quad.against_phi(np.abs(quad.synth(arg)) ** r)
            ode_res[j] = vpp + LAMBDA1 * wt.v[i] - g
    scale = np.maximum(1.0, np.abs(wt.vp[idx]) ** cfg.exponent)
    ode_scaled = ode_res / scale
    jen = wt.jensen[idx]

    violation = None
    eps = 4 * np.finfo(float).eps
    checks = [("derivative", dmargin < -slack - eps), ("l1", lmargin < -slack - eps),
              ("ode_residual", ode_scaled < -tol), ("jensen", jen < -tol)]
    first = None
    for name, bad in checks:
        hits = np.flatnonzero(bad)
        if hits.size and (first is None or hits[0] < first[1]):
            first = (name, int(hits[0]))
    if first is not None:
        name, j = first
        violation = {"kind": name, "t": float(wt.times[idx[j]])}
    ind = wt.indicator_time
    if violation is None and (ind is None or ind > (1.0 + slack) * cert.t_star):
        violation = {"kind": "no_indicator_before_t_star", "indicator_time": ind}
    return TheoremReport(
        passed=violation is None, checked=int(idx.size),
        worst_derivative_margin=float(dmargin.min()) if idx.size else math.inf,
        worst_l1_margin=float(lmargin.min()) if idx.size else math.inf,
        min_ode_residual=float(ode_scaled.min()) if idx.size else math.inf,
        min_jensen=float(jen.min()) if idx.size else math.inf,
        indicator_time=ind, t_star=cert.t_star, first_violation=violation)
