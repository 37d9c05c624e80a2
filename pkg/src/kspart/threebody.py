"""The three-particle system: relative-distance dynamics, its parabolic
rescaling, stationary profiles on the constraint curve and the
two-particle collapse regime.

Relative distances are ``u_1 = X_2 - X_1`` and ``u_2 = X_3 - X_2``. For a
three-particle collapse the rescaled distances ``v = u / R`` with
``R = sqrt(2 alpha (T - t))`` live on the curve
``v_1**2 + v_2**2 + v_1 v_2 = 3/2`` (unit rescaled second moment about the
center of mass).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import IntegratorConfig, estimate_blowup_time, integrate
from .model import RUNG_TOL, ParticleState

H3 = 0.25
CHI3 = Fraction(4, 3)
CHI_BAR = Fraction(16, 9)
CHI3_2 = Fraction(2)
CURVE_LEVEL = 1.5
SYMMETRIC_POINT = (np.sqrt(2.0) / 2.0, np.sqrt(2.0) / 2.0)
MERGE_TOL = 1e-4


def _near(chi: float, b: Fraction) -> bool:
    return abs(Fraction(chi) - b) <= RUNG_TOL * b


def classify_regime(chi: float) -> str:
    """Regime of the three-particle system; boundaries 4/3, 16/9 and 2."""
    if not chi > 0:
        raise ValueError("chi must be positive")
    c = Fraction(chi)
    if _near(chi, CHI3) or c < CHI3:
        return "subcritical"
    if _near(chi, CHI_BAR) or c < CHI_BAR:
        return "triple_symmetric"
    if _near(chi, CHI3_2):
        return "rung"
    if c < CHI3_2:
        return "triple_asymmetric"
    return "pair"


@dataclass(frozen=True)
class ThreeBodyParams:
    chi: float
    h3: float = H3
    alpha3: float = field(init=False)
    alpha_bar: float = field(init=False)
    regime: str = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha3", 2.0 * (self.chi / float(CHI3) - 1.0))
        object.__setattr__(self, "alpha_bar", self.chi - 2.0)
        object.__setattr__(self, "regime", classify_regime(self.chi))


def _check_positive(a, b):
    if not (a > 0 and b > 0):
        raise ValueError(f"relative distances must be positive, got ({a!r}, {b!r})")


def _u_field(u1, u2, chi):
    c = 2.0 * chi * H3
    du1 = 2.0 / u1 - 1.0 / u2 - c * (2.0 / u1 - 1.0 / u2 + 1.0 / (u1 + u2))
    du2 = 2.0 / u2 - 1.0 / u1 - c * (2.0 / u2 - 1.0 / u1 + 1.0 / (u1 + u2))
    return du1, du2


def u_rhs(u1: float, u2: float, chi: float) -> tuple[float, float]:
    """Time derivative of the relative distances."""
    _check_positive(u1, u2)
    du1, du2 = _u_field(u1, u2, chi)
    return float(du1), float(du2)


def v_rhs(v1: float, v2: float, chi: float, alpha: float | None = None) -> tuple[float, float]:
    """Rescaled relative-distance field; `alpha` defaults to ``2(chi/chi_3 - 1)``."""
    _check_positive(v1, v2)
    if alpha is None:
        alpha = 2.0 * (chi * 0.75 - 1.0)
    du1, du2 = _u_field(v1, v2, chi)
    return float(du1 + alpha * v1), float(du2 + alpha * v2)


def curve_residual(v1, v2):
    return v1 * v1 + v2 * v2 + v1 * v2 - CURVE_LEVEL


def curve_point(v1: float) -> tuple[float, float]:
    """Point of the constraint curve with first coordinate `v1`, ``v2 > 0``."""
    if not 0 < v1 < np.sqrt(2.0):
        raise ValueError("v1 must lie in (0, sqrt(2))")
    return float(v1), float((-v1 + np.sqrt(6.0 - 3.0 * v1 * v1)) / 2.0)


@dataclass(frozen=True)
class FixedPointSet:
    chi: float
    symmetric: tuple[float, float]
    asymmetric: tuple[tuple[float, float], tuple[float, float]] | None
    product: float
    merged: bool = False

    @property
    def points(self) -> list[tuple[float, float]]:
        pts = [self.symmetric]
        if self.asymmetric is not None:
            pts.extend(self.asymmetric)
        return pts

    def attractors(self) -> list[tuple[float, float]]:
        return list(self.asymmetric) if self.asymmetric is not None else [self.symmetric]

    def as_dict(self) -> dict:
        return {"chi": self.chi, "symmetric": list(self.symmetric),
                "asymmetric": None if self.asymmetric is None
                else [list(p) for p in self.asymmetric],
                "product": self.product, "merged": self.merged,
                "regime": classify_regime(self.chi)}


def fixed_points(chi: float, merge_tol: float = MERGE_TOL) -> FixedPointSet:
    """Stationary points of the rescaled three-particle flow on the curve.

    The asymmetric pair exists when ``1 - 6q >= 0`` with
    ``q = (1 - 2 chi h_3) / alpha``. It is reported only strictly above
    16/9; within `merge_tol` of 16/9 the set is flagged as merged.
    """
    if not float(CHI3) < chi < float(CHI3_2):
        raise ValueError(f"chi={chi} outside (4/3, 2)")
    alpha = 2.0 * (chi * 0.75 - 1.0)
    q = (1.0 - 2.0 * chi * H3) / alpha
    merged = abs(chi - float(CHI_BAR)) <= merge_tol
    asym = None
    if classify_regime(chi) == "triple_asymmetric" and not merged:
        a = np.sqrt(1.5 * (1.0 + 2.0 * q))
        b = np.sqrt(max(1.5 * (1.0 - 6.0 * q), 0.0))
        p1 = (float((a - b) / 2.0), float((a + b) / 2.0))
        asym = (p1, (p1[1], p1[0]))
    return FixedPointSet(chi, SYMMETRIC_POINT, asym, 3.0 * q, merged)


def asymmetric_radicals(chi: float) -> tuple[float, float]:
    """Closed-form radicals for any chi in (4/3, 2), clipped at the merge."""
    alpha = 2.0 * (chi * 0.75 - 1.0)
    q = (1.0 - 2.0 * chi * H3) / alpha
    a = np.sqrt(1.5 * (1.0 + 2.0 * q))
    b = np.sqrt(max(1.5 * (1.0 - 6.0 * q), 0.0))
    return float((a - b) / 2.0), float((a + b) / 2.0)


def v_jacobian(v1: float, v2: float, chi: float, alpha: float | None = None,
               step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of `v_rhs`."""
    J = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        fp = v_rhs(v1 + e[0], v2 + e[1], chi, alpha)
        fm = v_rhs(v1 - e[0], v2 - e[1], chi, alpha)
        J[:, j] = (np.array(fp) - np.array(fm)) / (2 * step)
    return J


def restricted_eigenvalue(point, chi: float) -> float:
    """Eigenvalue of the curve-restricted flow at a stationary point.

    The curve is invariant, so its tangent is an eigenvector of the
    Jacobian; the other eigenvalue (transverse) is ``2 alpha``.
    """
    v1, v2 = point
    J = v_jacobian(v1, v2, chi)
    tangent = np.array([-(v1 + 2 * v2), 2 * v1 + v2])
    tangent /= np.linalg.norm(tangent)
    return float(tangent @ J @ tangent)


def tangential_speed(point, chi: float) -> float:
    v1, v2 = point
    f = np.array(v_rhs(v1, v2, chi))
    tangent = np.array([-(v1 + 2 * v2), 2 * v1 + v2])
    return float(f @ tangent / np.linalg.norm(tangent))


def integrate_v(v0, chi: float, tau_max: float, alpha: float | None = None,
                rtol: float = 1e-13, atol: float = 1e-15, n_eval: int | None = None,
                stabilize: bool = False, v_stop: float | None = None):
    """Integrate the rescaled relative distances over ``[0, tau_max]``.

    The constraint curve is invariant but repels at rate ``2 alpha``. With
    ``stabilize=True`` the field ``f - 4 alpha (Q - 3/2) grad Q / |grad Q|**2``
    is used instead: it equals ``f`` on the curve and makes the curve
    attracting, so long horizons stay on it. With `v_stop` the run ends
    once a distance falls below it. Returns the `solve_ivp` result with
    dense output.
    """
    v1, v2 = v0
    _check_positive(v1, v2)
    a = 2.0 * (chi * 0.75 - 1.0) if alpha is None else alpha

    def f(_, v):
        d = np.array(v_rhs(v[0], v[1], chi, alpha))
        if stabilize:
            g = np.array([2 * v[0] + v[1], 2 * v[1] + v[0]])
            d -= 4.0 * a * curve_residual(v[0], v[1]) * g / (g @ g)
        return d

    events = None
    if v_stop is not None:
        def events(_, v):
            return min(v[0], v[1]) - v_stop
        events.terminal = True
    t_eval = None if n_eval is None else np.linspace(0.0, tau_max, n_eval)
    sol = solve_ivp(f, (0.0, tau_max), [v1, v2], method="DOP853", rtol=rtol,
                    atol=atol, dense_output=True, t_eval=t_eval, events=events)
    if sol.status < 0:
        raise FloatingPointError(f"rescaled three-body integration failed: {sol.message}")
    return sol


def integrate_u(u0, chi: float, t_max: float, u_stop: float = 1e-3,
                rtol: float = 1e-10, atol: float = 1e-14):
    """Integrate the relative distances until one falls below `u_stop`."""
    u1, u2 = u0
    _check_positive(u1, u2)

    def f(_, u):
        return _u_field(u[0], u[1], chi)

    def collapse(_, u):
        return min(u[0], u[1]) - u_stop
    collapse.terminal = True

    return solve_ivp(f, (0.0, t_max), [u1, u2], method="DOP853", rtol=rtol,
                     atol=atol, events=collapse)


@dataclass
class LiouvilleVerdict:
    chi: float
    grid: list[tuple[float, float]]
    max_curve_drift: float
    limits: list[tuple[float, float]]
    limit_errors: list[float]
    branches: list[str]
    max_translate_error: float
    stays_diagonal: bool
    drift_tol: float = 1e-6
    limit_tol: float = 1e-5
    translate_tol: float = 1e-5

    @property
    def on_curve(self) -> bool:
        return self.max_curve_drift <= self.drift_tol

    @property
    def converged(self) -> bool:
        return max(self.limit_errors) <= self.limit_tol

    @property
    def translates(self) -> bool:
        return self.max_translate_error <= self.translate_tol

    @property
    def ok(self) -> bool:
        return self.on_curve and self.converged and self.translates and self.stays_diagonal

    def as_dict(self) -> dict:
        return {"chi": self.chi, "ok": self.ok, "max_curve_drift": self.max_curve_drift,
                "limit_errors": self.limit_errors, "branches": self.branches,
                "max_translate_error": self.max_translate_error,
                "stays_diagonal": self.stays_diagonal}


def _crossing(sol, value: float, lo: float, hi: float) -> float | None:
    """First tau in [lo, hi] where v_1 crosses `value`, refined by bisection."""
    taus = np.linspace(lo, hi, 4001)
    v = sol.sol(taus)[0] - value
    idx = np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:]))
    if idx.size == 0:
        return None
    a, b = taus[idx[0]], taus[idx[0] + 1]
    for _ in range(80):
        m = 0.5 * (a + b)
        if np.sign(sol.sol(m)[0] - value) == np.sign(sol.sol(a)[0] - value):
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def translate_error(sol_a, sol_b, tau_max: float, fiducial: float = 0.5,
                    span: float = 4.0) -> float:
    """Sup-distance between two trajectories aligned at a v_1 crossing.

    Falls back to the midpoint of the commonly visited v_1 range when the
    fiducial value is not crossed by both.
    """
    ta = _crossing(sol_a, fiducial, 0.0, tau_max)
    tb = _crossing(sol_b, fiducial, 0.0, tau_max)
    if ta is None or tb is None:
        grid = np.linspace(0.0, tau_max, 2001)
        ra, rb = sol_a.sol(grid)[0], sol_b.sol(grid)[0]
        lo = max(ra.min(), rb.min())
        hi = min(ra.max(), rb.max())
        if not lo < hi:
            return np.inf
        fid = 0.5 * (lo + hi)
        ta = _crossing(sol_a, fid, 0.0, tau_max)
        tb = _crossing(sol_b, fid, 0.0, tau_max)
        if ta is None or tb is None:
            return np.inf
    s = np.linspace(0.0, min(span, tau_max - ta, tau_max - tb), 401)
    return float(np.max(np.abs(sol_a.sol(ta + s) - sol_b.sol(tb + s))))


def default_grid(chi: float, count: int = 10) -> list[tuple[float, float]]:
    """Points of the curve strictly above the diagonal, avoiding fixed points.

    The grid stops short of the symmetric point, which repels along the
    curve above 16/9 and would need a long horizon to escape from.
    """
    v1s = np.linspace(0.05, 0.6, count)
    pts = [curve_point(v) for v in v1s]
    fps = fixed_points(chi).points
    return [p for p in pts if min(np.hypot(p[0] - f[0], p[1] - f[1]) for f in fps) > 1e-3]


def liouville_check(chi: float, grid=None, tau_max: float | None = None,
                    drift_tol: float = 1e-6, limit_tol: float = 1e-5,
                    translate_tol: float = 1e-5, max_horizon: float = 400.0) -> LiouvilleVerdict:
    """Numerical Liouville verification on the constraint curve.

    Curve conservation is measured on the plain rescaled flow, over the
    horizon where round-off amplified by the transverse growth
    ``exp(2 alpha tau)`` stays below `drift_tol`. Convergence to the
    attractive point of each branch and the translate property of
    same-branch trajectories are then measured on the stabilized flow over
    `tau_max`, chosen from the slowest contraction rate unless given.
    Diagonal data is checked to stay on the diagonal.
    """
    fps = fixed_points(chi)
    grid = default_grid(chi) if grid is None else [tuple(map(float, p)) for p in grid]
    for p in grid:
        if abs(curve_residual(*p)) > 1e-9:
            raise ValueError(f"grid point {p} off the constraint curve")
        if p[0] == p[1]:
            raise ValueError("grid points must be off the diagonal")
    alpha = 2.0 * (chi * 0.75 - 1.0)
    lam = min(abs(restricted_eigenvalue(a, chi)) for a in fps.attractors())
    fixed_horizon = tau_max is not None
    tau0 = tau_max if fixed_horizon else min(max(np.log(1e9) / max(lam, 1e-12), 10.0),
                                             max_horizon)
    tau_drift = min(tau0, 0.5 * np.log(1e7) / alpha)
    sols, drift, limits, errs, branches = [], 0.0, [], [], []
    for p in grid:
        plain = integrate_v(p, chi, tau_drift)
        drift = max(drift, float(np.max(np.abs(curve_residual(plain.y[0], plain.y[1])))))
        # attractive point on the same side of the diagonal
        above = p[1] > p[0]
        target = [a for a in fps.attractors() if (a[1] >= a[0]) == above][0]
        tau = tau0
        while True:
            sol = integrate_v(p, chi, tau, stabilize=True)
            end = (float(sol.y[0, -1]), float(sol.y[1, -1]))
            err = float(max(abs(end[0] - target[0]), abs(end[1] - target[1])))
            if fixed_horizon or err <= 1e-2 * limit_tol or 2 * tau > max_horizon:
                break
            tau *= 2
        limits.append(end)
        errs.append(err)
        if fps.asymmetric is None:
            branch = "upper" if above else "lower"
        else:
            asym = fps.asymmetric[0] if above else fps.asymmetric[1]
            side = "l" if (p[0] < asym[0]) == above else "r"
            branch = ("upper_" if above else "lower_") + side
        branches.append(branch)
        sols.append(sol)
    worst = 0.0
    for b in set(branches):
        idx = [i for i, x in enumerate(branches) if x == b]
        for i in idx[1:]:
            horizon = min(sols[idx[0]].t[-1], sols[i].t[-1])
            worst = max(worst, translate_error(sols[idx[0]], sols[i], horizon))
    diag = integrate_v(SYMMETRIC_POINT, chi, min(tau0, 10.0))
    stays = bool(np.max(np.abs(diag.y[0] - diag.y[1])) <= 1e-12)
    return LiouvilleVerdict(chi, grid, drift, limits, errs, branches, worst, stays,
                            drift_tol, limit_tol, translate_tol)


@dataclass
class PairCollapseAnalysis:
    chi: float
    alpha_bar: float
    linearization: np.ndarray
    eigenvalues: tuple[float, float]
    t_hat: float | None = None
    tau: np.ndarray | None = field(default=None, repr=False)
    v1: np.ndarray | None = field(default=None, repr=False)
    v2: np.ndarray | None = field(default=None, repr=False)
    v1_final: float | None = None
    escape_rate: float | None = None
    gap_difference_monotone: bool | None = None
    manifold_error: float | None = None

    def as_dict(self) -> dict:
        return {"chi": self.chi, "alpha_bar": self.alpha_bar,
                "linearization": self.linearization.tolist(),
                "eigenvalues": list(self.eigenvalues), "t_hat": self.t_hat,
                "v1_final": self.v1_final, "escape_rate": self.escape_rate,
                "gap_difference_monotone": self.gap_difference_monotone,
                "manifold_error": self.manifold_error}


def pair_linearization(chi: float) -> np.ndarray:
    """Linearization at ``(xi, eta) = (0, 0)`` with ``xi = v_1 - 1``, ``eta = 1/v_2``."""
    ab = chi - 2.0
    return np.array([[2.0 * ab, -1.0], [0.0, -ab]])


def pair_field_xi_eta(xi: float, eta: float, chi: float) -> np.ndarray:
    """Pair-rescaled flow written in ``(xi, eta)``; finite at ``eta = 0``."""
    ab = chi - 2.0
    c = 2.0 * chi * H3
    v1 = 1.0 + xi
    # v_2 = 1/eta: expand every 1/v_2 term as eta
    dv1 = (2.0 / v1 - eta) - c * (2.0 / v1 - eta + eta / (1.0 + v1 * eta)) + ab * v1
    # d(eta)/dtau = -eta**2 dv2/dtau, with dv2 = (...) + ab / eta
    rest = (2.0 * eta - 1.0 / v1) - c * (2.0 * eta - 1.0 / v1 + eta / (1.0 + v1 * eta))
    deta = -eta * eta * rest - ab * eta
    return np.array([dv1, deta])


def rescale_pair_run(traj, alpha_bar: float, t_hat: float | None = None):
    """Rescaled relative distances of a two-particle collapse run."""
    if t_hat is None:
        t_hat = estimate_blowup_time(traj).t_hat
    keep = traj.times < t_hat
    t = traj.times[keep]
    u = np.diff(traj.positions[keep], axis=1)
    R = np.sqrt(2.0 * alpha_bar * (t_hat - t))
    tau = -np.log(R / R[0]) / alpha_bar
    return t_hat, tau, u[:, 0] / R, u[:, 1] / R


def pair_collapse_analysis(chi: float, u0=(0.4, 0.9), cfg: IntegratorConfig | None = None,
                           second_u0=(0.3, 1.1)) -> PairCollapseAnalysis:
    """Linearization and simulation check of the two-particle collapse regime.

    The physical system is integrated to collapse and rescaled with
    ``alpha_bar = chi - 2``, because the rescaled flow has a saddle at the
    limit point and cannot be integrated forward in tau directly.
    """
    if not chi > 2.0 or _near(chi, CHI3_2):
        raise ValueError("pair collapse requires chi > 2")
    ab = chi - 2.0
    L = pair_linearization(chi)
    ev = tuple(sorted(np.linalg.eigvals(L).real.tolist(), reverse=True))
    out = PairCollapseAnalysis(chi, ab, L, ev)
    if u0 is None:
        return out
    u1, u2 = u0
    if not u2 > u1:
        raise ValueError("expected u2(0) > u1(0), so that particles 1 and 2 collapse")
    traj = integrate(ParticleState([0.0, u1, u1 + u2], chi), cfg)
    if traj.stop_reason != "gap_collapse":
        raise FloatingPointError(f"pair run did not collapse: {traj.stop_reason}")
    t_hat, tau, v1, v2 = rescale_pair_run(traj, ab)
    half = tau >= 0.5 * tau[-1]
    rate = float(np.polyfit(tau[half], np.log(v2[half]), 1)[0])
    du = np.diff(traj.positions, axis=1)
    mono = bool(np.all(np.diff(du[:, 1] - du[:, 0]) >= 0))
    out.t_hat, out.tau, out.v1, out.v2 = t_hat, tau, v1, v2
    out.v1_final = float(v1[-1])
    out.escape_rate = rate
    out.gap_difference_monotone = mono
    if second_u0 is not None:
        other = integrate(ParticleState([0.0, second_u0[0], sum(second_u0)], chi), cfg)
        _, _, w1, w2 = rescale_pair_run(other, ab)
        out.manifold_error = stable_manifold_mismatch((v1, v2), (w1, w2))
    return out


def stable_manifold_mismatch(a, b) -> float:
    """Distance between two rescaled pair runs seen as curves ``xi(eta)``.

    Runs that are tau-translates of one solution trace the same curve in the
    ``(xi, eta)`` plane. Compared over the central part of the common eta
    range, away from both the initial transient and the final frames where
    the blow-up time estimate dominates the error.
    """
    xa, ea = a[0] - 1.0, 1.0 / a[1]
    xb, eb = b[0] - 1.0, 1.0 / b[1]
    lo = max(ea.min(), eb.min())
    hi = min(ea.max(), eb.max())
    if not lo < hi:
        return np.inf
    # log-spaced eta between 1e-3 and 1e-1 of the common range
    grid = np.geomspace(max(lo, 1e-3 * hi), 0.1 * hi, 200)
    oa, ob = np.argsort(ea), np.argsort(eb)
    fa = np.interp(grid, ea[oa], xa[oa])
    fb = np.interp(grid, eb[ob], xb[ob])
    return float(np.max(np.abs(fa - fb)))


def physical_to_v(traj, t_hat: float | None = None, alpha: float | None = None):
    """Rescale a full three-particle run about its center of mass."""
    chi = traj.chi
    if alpha is None:
        alpha = 2.0 * (chi * 0.75 - 1.0)
    if t_hat is None:
        xc = traj.positions[0] - traj.positions[0].mean()
        t_hat = float(np.sum(xc ** 2) / (2.0 * alpha))
    keep = traj.times < t_hat
    t = traj.times[keep]
    u = np.diff(traj.positions[keep], axis=1)
    R = np.sqrt(2.0 * alpha * (t_hat - t))
    tau = -np.log(R / R[0]) / alpha
    return tau, u / R[:, None]


def portrait(chi: float, mode: str = "v", n_grid: int = 15, n_traj: int = 8,
             tau_max: float = 10.0) -> list[tuple]:
    """Phase-portrait samples as rows ``(kind, index, x1, x2, dx1, dx2)``.

    ``mode="u"`` samples the physical relative distances, ``mode="v"`` the
    rescaled ones together with trajectories started on the curve (below
    ``chi = 2``) or on the line ``v2 = 2`` (pair regime).
    """
    rows = []
    if mode == "u":
        g = np.linspace(0.05, 1.5, n_grid)
        for a in g:
            for b in g:
                d = _u_field(a, b, chi)
                rows.append(("arrow_u", -1, a, b, d[0], d[1]))
        starts = [(0.2 + 1.2 * s, 1.4 - 1.2 * s) for s in np.linspace(0, 1, n_traj)]
        for i, s in enumerate(starts):
            sol = integrate_u(s, chi, 10.0, u_stop=1e-2)
            for k in range(sol.t.size):
                d = _u_field(sol.y[0, k], sol.y[1, k], chi)
                rows.append(("traj_u", i, sol.y[0, k], sol.y[1, k], d[0], d[1]))
        return rows
    if mode != "v":
        raise ValueError("mode must be 'u' or 'v'")
    alpha = 2.0 * (chi * 0.75 - 1.0) if chi < 2 else chi - 2.0
    g = np.linspace(0.05, 1.4, n_grid)
    for a in g:
        for b in g:
            d = v_rhs(a, b, chi, alpha)
            rows.append(("arrow_v", -1, a, b, d[0], d[1]))
    if chi < 2:
        starts = [curve_point(float(v)) for v in np.linspace(0.05, 1.2, n_traj)]
    else:
        # the pair regime has no invariant curve; start right of the saddle
        starts = [(float(v), 2.0) for v in np.linspace(0.3, 1.5, n_traj)]
    for i, p in enumerate(starts):
        sol = integrate_v(p, chi, tau_max, alpha=alpha, n_eval=200, v_stop=1e-2)
        for k in range(sol.t.size):
            d = v_rhs(sol.y[0, k], sol.y[1, k], chi, alpha)
            rows.append(("traj_v", i, sol.y[0, k], sol.y[1, k], d[0], d[1]))
    return rows
