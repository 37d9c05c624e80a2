"""Adaptive integration of the particle gradient flow up to the first
blow-up time, and estimation of that time."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._rk import dopri_step, gap_scaled_error
from .model import (IndexWindow, OrderingError, ParticleState, SingularityError,
                    check_ordered, energy, second_moment_slope, velocity)

log = logging.getLogger(__name__)

STOP_REASONS = ("gap_collapse", "horizon", "step_underflow")
AUTO_EXPLICIT_MAX_N = 8
AUTO_RUNG_MARGIN = 0.05
# a collapse counts as reached once its local time scale g/|dg/dt| is
# below this many float spacings of t: later frames cannot resolve T - t
TIME_RESOLUTION = 1e6


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control for `integrate`.

    ``gap_stop`` is an absolute minimal-gap threshold; ``None`` means
    ``1e-6`` times the initial minimal gap.

    ``method="dopri"`` is the explicit Dormand-Prince pair with gap-relative
    error control and the step cap ``safety * g**2 / (max|v| * g + 1)``.
    ``method="radau"`` is implicit and integrates log-gaps; it is the right
    choice once a cluster of many particles forms, since the internal
    relaxation of the cluster is then much faster than its collapse and
    the explicit step becomes stability-limited. ``method="auto"`` picks
    dopri up to ``AUTO_EXPLICIT_MAX_N`` particles and radau above, and
    also radau within ``AUTO_RUNG_MARGIN`` (relative) of a critical value,
    where a collapse is slow compared with the gap stiffness.
    ``dt_init`` and ``safety`` only affect the explicit method.
    """

    dt_init: float = 1e-4
    safety: float = 0.5
    gap_stop: float | None = None
    t_max: float = 10.0
    tol: float = 1e-9
    monitor_stride: int = 1
    max_steps: int = 2_000_000
    method: str = "auto"

    def __post_init__(self):
        if self.method not in ("auto", "radau", "dopri"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.dt_init > 0 and self.t_max > 0 and self.tol > 0):
            raise ValueError("dt_init, t_max and tol must be positive")
        if not 0 < self.safety < 1:
            raise ValueError("safety must lie in (0, 1)")
        if self.gap_stop is not None and not self.gap_stop > 0:
            raise ValueError("gap_stop must be positive")
        if self.monitor_stride < 1:
            raise ValueError("monitor_stride must be >= 1")

    def gap_threshold(self, x0: np.ndarray) -> float:
        if self.gap_stop is not None:
            return self.gap_stop
        return 1e-6 * float(np.diff(x0).min())


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (frames, N)
    chi: float
    stop_reason: str
    gap_stop: float
    n_steps: int = 0
    n_rejected: int = 0

    def __len__(self):
        return self.times.size

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    def state(self, m: int) -> ParticleState:
        return ParticleState(self.positions[m], self.chi)

    @property
    def states(self) -> list[ParticleState]:
        return [self.state(m) for m in range(len(self))]

    @property
    def min_gaps(self) -> np.ndarray:
        return np.diff(self.positions, axis=1).min(axis=1)

    @property
    def second_moment(self) -> np.ndarray:
        return np.sum(self.positions ** 2, axis=1)

    def energies(self) -> np.ndarray:
        return np.array([energy(s) for s in self.states])


@dataclass(frozen=True)
class BlowUpTimeEstimate:
    t_hat: float
    method: str
    residual: float
    alternatives: dict = field(default_factory=dict)


def integrate(state: ParticleState, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate the particle flow until gap collapse, horizon or underflow.

    A frame is recorded every ``cfg.monitor_stride`` accepted steps, plus
    the final state. The run stops with ``gap_collapse`` as soon as the
    minimal gap falls below the gap threshold, so the last frame is the
    first one past it, or earlier when the collapse outruns the time
    resolution: ``g / |dg/dt| < TIME_RESOLUTION * spacing(t)``.

    Raises
    ------
    OrderingError
        If an accepted step produced crossing particles.
    FloatingPointError
        If the state became non-finite.
    """
    cfg = cfg or IntegratorConfig()
    method = cfg.method
    if method == "auto":
        method = _auto_method(state)
    if method == "radau":
        return _integrate_radau(state, cfg)
    return _integrate_dopri(state, cfg)


def _auto_method(state: ParticleState) -> str:
    if state.n > AUTO_EXPLICIT_MAX_N:
        return "radau"
    rungs = (state.n + 1) / np.arange(1, state.n + 1)
    near = np.any(np.abs(state.chi / rungs - 1.0) < AUTO_RUNG_MARGIN)
    return "radau" if near else "dopri"


def _unresolved(t: float, rate: float) -> bool:
    """True when the fastest log-gap rate outruns the resolution of t."""
    return rate * TIME_RESOLUTION * np.spacing(max(abs(t), 1e-300)) > 1.0


class _GapField:
    """Flow written in log-gaps ``z_i = log(X_{i+1} - X_i)``.

    Pair distances are accumulated row by row from the gaps, so a distance
    between close particles never comes from subtracting large positions.
    """

    def __init__(self, n: int, chi: float):
        self.n = n
        self.c = 2.0 * chi / (n + 1)
        self.upper = np.triu(np.ones((n, n), dtype=bool), 1)

    def distances(self, u: np.ndarray) -> np.ndarray:
        # D[i, j] = X_j - X_i for j > i
        m = np.where(self.upper, np.concatenate([[0.0], u])[None, :], 0.0)
        return np.cumsum(m, axis=1)

    def velocity(self, u: np.ndarray) -> np.ndarray:
        inv = 1.0 / u
        v = np.zeros(self.n)
        v[:-1] -= inv
        v[1:] += inv
        with np.errstate(divide="ignore"):
            w = np.where(self.upper, 1.0 / self.distances(u), 0.0)
        v += self.c * (w.sum(axis=1) - w.sum(axis=0))
        return v

    def __call__(self, t, z):
        u = np.exp(z)
        return np.diff(self.velocity(u)) / u

    @staticmethod
    def positions(z: np.ndarray, center: float) -> np.ndarray:
        s = np.concatenate([[0.0], np.cumsum(np.exp(z.astype(np.longdouble)))])
        return (center + (s - s.mean())).astype(float)


def _integrate_radau(state: ParticleState, cfg: IntegratorConfig) -> Trajectory:
    from scipy.integrate import Radau

    x0 = np.array(state.positions)
    g_stop = cfg.gap_threshold(x0)
    center = float(np.mean(x0))  # conserved exactly by the flow
    field_ = _GapField(state.n, state.chi)
    z = np.log(np.diff(x0))
    rtol = max(1e-3 * cfg.tol, 100 * np.finfo(float).eps)
    solver = Radau(field_, 0.0, z, cfg.t_max, rtol=rtol, atol=cfg.tol)
    times, frames = [0.0], [x0.copy()]
    accepted = since_frame = 0
    reason = None
    while True:
        if float(np.exp(solver.y.min())) < g_stop or _unresolved(
                solver.t, np.abs(field_(solver.t, solver.y)).max()):
            reason = "gap_collapse"
            break
        if solver.status == "finished":
            reason = "horizon"
            break
        if accepted >= cfg.max_steps:
            raise RuntimeError(f"step budget exhausted at t={solver.t!r}")
        with np.errstate(over="ignore", invalid="ignore"):
            msg = solver.step()
        if solver.status == "failed":
            if msg and ("too small" in msg or "spacing" in msg):
                reason = "step_underflow"
                break
            raise FloatingPointError(f"implicit step failed at t={solver.t!r}: {msg}")
        if not np.all(np.isfinite(solver.y)):
            raise FloatingPointError(f"non-finite state at t={solver.t!r}")
        accepted += 1
        since_frame += 1
        if since_frame >= cfg.monitor_stride:
            times.append(solver.t)
            frames.append(field_.positions(solver.y, center))
            since_frame = 0
    if times[-1] != solver.t:
        times.append(solver.t)
        frames.append(field_.positions(solver.y, center))
    for x in frames[-2:]:
        check_ordered(x)
    log.debug("integrate[radau]: %s after %d steps, t=%g", reason, accepted, solver.t)
    return Trajectory(np.array(times), np.array(frames), state.chi, reason, g_stop,
                      accepted, 0)


def _integrate_dopri(state: ParticleState, cfg: IntegratorConfig) -> Trajectory:
    chi = state.chi
    x = np.array(state.positions)
    g_stop = cfg.gap_threshold(x)

    def f(y):
        return velocity(y, chi)

    t = 0.0
    dt = cfg.dt_init
    k1 = f(x)
    times, frames = [t], [x.copy()]
    accepted = rejected = 0
    since_frame = 0
    reason = None
    while True:
        g = np.diff(x)
        gmin = float(g.min())
        if gmin < g_stop or _unresolved(t, np.max(np.abs(np.diff(k1)) / g)):
            reason = "gap_collapse"
            break
        if t >= cfg.t_max:
            reason = "horizon"
            break
        if accepted + rejected >= cfg.max_steps:
            raise RuntimeError(f"step budget exhausted at t={t!r}")
        cap = cfg.safety * gmin ** 2 / (np.abs(k1).max() * gmin + 1.0)
        h = min(dt, cap, cfg.t_max - t)
        if t + h == t:
            reason = "step_underflow"
            break
        try:
            x_new, k7, err = dopri_step(f, x, k1, h)
            errn = gap_scaled_error(err, x) / cfg.tol
            bad = not np.all(np.diff(x_new) > 0)
        except (OrderingError, SingularityError):
            # an intermediate stage crossed: the step was far too large
            bad, errn = True, np.inf
        if bad or errn > 1.0:
            rejected += 1
            dt = h * (0.2 if bad or not np.isfinite(errn)
                      else max(0.2, 0.9 * errn ** -0.2))
            continue
        if not np.all(np.isfinite(x_new)):
            raise FloatingPointError(f"non-finite state at t={t + h!r}")
        check_ordered(x_new)
        t += h
        x = x_new
        k1 = k7
        accepted += 1
        since_frame += 1
        dt = h * min(5.0, 0.9 * errn ** -0.2 if errn > 0 else 5.0)
        if since_frame >= cfg.monitor_stride:
            times.append(t)
            frames.append(x.copy())
            since_frame = 0
    if times[-1] != t:
        times.append(t)
        frames.append(x.copy())
    log.debug("integrate: %s after %d steps (%d rejected), t=%g",
              reason, accepted, rejected, t)
    return Trajectory(np.array(times), np.array(frames), chi, reason, g_stop,
                      accepted, rejected)


def second_moment_law_check(traj: Trajectory, until_gap: float | None = None) -> float:
    """Worst deviation of sum X_i^2 from its exact linear law.

    The deviation is measured relative to the initial second moment, so it
    stays meaningful when the second moment itself approaches zero.
    Frames whose minimal gap is below `until_gap` are ignored.
    """
    if len(traj) < 2:
        raise ValueError("need at least 2 frames")
    pi2 = traj.second_moment
    law = pi2[0] + second_moment_slope(traj.n, traj.chi) * traj.times
    keep = np.ones(len(traj), dtype=bool)
    if until_gap is not None:
        keep = traj.min_gaps >= until_gap
    return float(np.max(np.abs(pi2[keep] - law[keep])) / pi2[0])


def _relative_linear_root(t, y):
    """Fit y ~ a + b t with relative residuals; return (root, rms residual)."""
    w = 1.0 / y
    M = np.column_stack([w, t * w])
    (a, b), *_ = np.linalg.lstsq(M, np.ones_like(y), rcond=None)
    res = M @ np.array([a, b]) - 1.0
    return -a / b, float(np.sqrt(np.mean(res ** 2)))


def estimate_blowup_time(traj: Trajectory, window: IndexWindow | None = None,
                         tail: float = 0.2, method: str | None = None) -> BlowUpTimeEstimate:
    """Estimate the blow-up time from the end of a collapsing trajectory.

    The squared minimal gap is fitted linearly in time over the final
    `tail` fraction of frames and the root of the fit is returned. When an
    inner `window` is given the window variance is fitted the same way and
    reported under ``alternatives``; pass ``method="variance_linear_fit"``
    to make it the returned value.
    """
    if traj.stop_reason != "gap_collapse":
        raise ValueError(f"trajectory stopped by {traj.stop_reason}, not gap collapse")
    m = max(int(np.ceil(tail * len(traj))), 5)
    if len(traj) < 5:
        raise ValueError("insufficient frames for a blow-up time fit")
    t = traj.times[-m:]
    fits = {"min_gap_quadratic_fit": _relative_linear_root(t, traj.min_gaps[-m:] ** 2)}
    if window is not None:
        xi = traj.positions[-m:, window.sl]
        pi2 = np.sum((xi - xi.mean(axis=1, keepdims=True)) ** 2, axis=1)
        fits["variance_linear_fit"] = _relative_linear_root(t, pi2)
    method = method or "min_gap_quadratic_fit"
    t_hat, res = fits[method]
    # the collapse happens after the last integrated time
    t_hat = max(t_hat, np.nextafter(traj.times[-1], np.inf))
    alt = {k: v[0] for k, v in fits.items() if k != method}
    return BlowUpTimeEstimate(float(t_hat), method, res, alt)
