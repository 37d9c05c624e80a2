"""Partial variances, exterior potentials, the differential-inequality
certificates and the basin-of-stability constants."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import IndexWindow, ParticleState, RungError, critical_ladder, velocity

C42 = 1.0  # sharp uniform constant in ||v||_4 <= C42 ||v||_2


@dataclass(frozen=True)
class WindowStats:
    window: IndexWindow
    mean: float
    variance: float
    variance_about: float | None = None


@dataclass(frozen=True)
class ExteriorPotential:
    window: IndexWindow
    order: int
    value: float


@dataclass(frozen=True)
class StabilityConstants:
    n: int
    chi: float
    k: int
    alpha: float
    beta: float
    c_n: float
    c42: float
    gamma_n: float

    def blowup_time_bound(self, eps: float, t0: float = 0.0) -> float:
        """Upper bound on the blow-up time for data in the basin at ``t0``."""
        return t0 + eps / self.alpha

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "c_n": self.c_n}


def _positions(state) -> np.ndarray:
    return state.positions if isinstance(state, ParticleState) else np.asarray(state, float)


def window_stats(state: ParticleState, window: IndexWindow,
                 about: float | None = None) -> WindowStats:
    x = _positions(state)
    window.check(x.size)
    xi = x[window.sl]
    mean = float(xi.mean())
    var = float(np.sum((xi - mean) ** 2))
    var_about = None if about is None else float(np.sum((xi - about) ** 2))
    return WindowStats(window, mean, var, var_about)


def exterior_potential(state: ParticleState, window: IndexWindow, m: int) -> ExteriorPotential:
    """Sum over inner i, outer j of ``(X_j - X_i)**-m``."""
    if m not in (2, 4):
        raise ValueError("order must be 2 or 4")
    x = _positions(state)
    window.check(x.size)
    outer = window.outer_mask(x.size)
    if not outer.any():
        raise ValueError("window covers every particle: the outer set is empty")
    d = x[outer][:, None] - x[window.sl][None, :]
    return ExteriorPotential(window, m, float(np.sum(d ** -float(m))))


def _h2(x: np.ndarray, window: IndexWindow) -> float:
    outer = window.outer_mask(x.size)
    if not outer.any():
        return 0.0
    d = x[outer][:, None] - x[window.sl][None, :]
    return float(np.sum(d ** -2.0))


def t1_sum(xi) -> float:
    """Inner self-interaction moment sum_i sum_{j != i} (x_i - mean)/(x_j - x_i).

    Equals ``-m(m-1)/2`` for any ``m`` distinct points.
    """
    xi = np.asarray(xi, float)
    d = xi[None, :] - xi[:, None]
    np.fill_diagonal(d, np.inf)
    return float(np.sum((xi - xi.mean())[:, None] / d))


def stability_constants(n: int, chi: float, k: int) -> StabilityConstants:
    ladder = critical_ladder(n, chi)
    if not ladder.rung(k) < chi < ladder.rung(k - 1):
        raise RungError(f"chi={chi} not strictly inside (chi_N^{k}, chi_N^{k - 1})")
    alpha = (k - 1) * (chi / ladder.rung(k) - 1.0)
    gamma = C42 * (12.0 + 14.0 * chi + 4.0 * n ** 0.25)
    kk = 2.0 + 2.0 * chi / np.sqrt(n)
    c_n = min(alpha / (2.0 * gamma), alpha ** 2 / (8.0 * kk))
    beta = 4.0 * gamma * c_n ** 2
    return StabilityConstants(n, float(chi), k, float(alpha), float(beta),
                              float(c_n), C42, float(gamma))


def window_scan(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Variance and H_2 of every contiguous window of size k.

    Entry ``s`` corresponds to the window ``[s+1, s+k]``.
    """
    if not 1 <= k <= x.size:
        raise ValueError(f"window size {k} out of range for N={x.size}")
    wins = [IndexWindow(s + 1, s + k) for s in range(x.size - k + 1)]
    var = np.array([np.var(x[w.sl]) * k for w in wins])
    h2 = np.array([_h2(x, w) for w in wins])
    return var, h2


def in_basin(state, k: int, var_bound: float, h_bound: float) -> IndexWindow | None:
    """First size-k window with variance <= var_bound and H_2 < h_bound."""
    x = _positions(state)
    var, h2 = window_scan(x, k)
    ok = np.flatnonzero((var <= var_bound) & (h2 < h_bound))
    if ok.size == 0:
        return None
    return IndexWindow(int(ok[0]) + 1, int(ok[0]) + k)


def stability_membership(state: ParticleState, k: int, eps: float,
                         constants: StabilityConstants | None = None) -> IndexWindow | None:
    """Window witnessing membership in the basin ``D^{eps, C_N/eps}``, or None.

    Raises `RungError` unless ``chi_N^k < chi < chi_N^{k-1}``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    const = constants or stability_constants(state.n, state.chi, k)
    return in_basin(state, k, eps, const.c_n / eps)


@dataclass
class VarianceRateResiduals:
    """Per-frame residuals of the three evolution inequalities.

    A residual above its slack is a violation. Slack is ``slack_rel`` times
    the local magnitude of the terms in each inequality.
    """

    times: np.ndarray
    res_var: np.ndarray
    res_var_about: np.ndarray
    res_h: np.ndarray
    slack_var: np.ndarray
    slack_var_about: np.ndarray
    slack_h: np.ndarray

    @property
    def violations(self) -> dict[str, int]:
        return {
            "variance": int(np.sum(self.res_var > self.slack_var)),
            "variance_about": int(np.sum(self.res_var_about > self.slack_var_about)),
            "exterior": int(np.sum(self.res_h > self.slack_h)),
        }

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())


def centered_derivative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second-order derivative of f at the interior nodes of a non-uniform grid."""
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    return (hm ** 2 * f[2:] - hp ** 2 * f[:-2] + (hp ** 2 - hm ** 2) * f[1:-1]) / (
        hm * hp * (hm + hp))


def rounding_noise(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Floating-point noise floor of `centered_derivative` at interior nodes."""
    h = np.minimum(t[1:-1] - t[:-2], t[2:] - t[1:-1])
    mag = np.maximum.reduce([np.abs(f[:-2]), np.abs(f[1:-1]), np.abs(f[2:])])
    return 8.0 * np.finfo(float).eps * mag / h


def lemma32_residuals(traj, window: IndexWindow, about: float | None = None,
                      slack_rel: float = 1e-3) -> VarianceRateResiduals:
    """Check the variance and exterior-potential evolution inequalities.

    Time derivatives are centered finite differences on the frame grid.
    ``about`` is the fixed point for the second variance; it defaults to
    the inner mean at the last frame. When the window is the whole system
    the exterior terms vanish and the variance inequality is an equality.
    """
    if len(traj) < 3:
        raise ValueError("need at least 3 frames")
    n, chi = traj.n, traj.chi
    window.check(n)
    x = traj.positions
    xi = x[:, window.sl]
    if about is None:
        about = float(xi[-1].mean())
    pi2 = np.sum((xi - xi.mean(axis=1, keepdims=True)) ** 2, axis=1)
    pib2 = np.sum((xi - about) ** 2, axis=1)
    h2 = np.array([_h2(row, window) for row in x])
    p = window.size - 1
    drift = p * (1.0 - chi * (p + 1) / (n + 1))
    kk = 2.0 + 2.0 * chi / np.sqrt(n)
    gamma = C42 * (12.0 + 14.0 * chi + 4.0 * n ** 0.25)
    t = traj.times
    s = slice(1, -1)

    # rounding of the positions themselves perturbs a variance by about
    # 2 sqrt(f) delta + delta**2
    delta = 4.0 * np.finfo(float).eps * np.abs(x).max(axis=1)[s]
    h = np.minimum(t[1:-1] - t[:-2], t[2:] - t[1:-1])

    def pos_noise(f):
        return (2.0 * np.sqrt(f[s]) * delta + delta ** 2) / h

    dpi2 = 0.5 * centered_derivative(t, pi2)
    bound = kk * np.sqrt(pi2[s] * h2[s])
    res_a = np.abs(dpi2 - drift) - bound
    dpib2 = 0.5 * centered_derivative(t, pib2)
    bound_b = kk * np.sqrt(pib2[s] * h2[s])
    res_b = np.abs(dpib2 - drift) - bound_b
    dh = centered_derivative(t, h2)
    res_c = dh - gamma * h2[s] ** 2
    return VarianceRateResiduals(
        t[s], res_a, res_b, res_c,
        slack_rel * (abs(drift) + bound + np.abs(dpi2)) + 0.5 * rounding_noise(t, pi2)
        + pos_noise(pi2),
        slack_rel * (abs(drift) + bound_b + np.abs(dpib2)) + 0.5 * rounding_noise(t, pib2)
        + pos_noise(pib2),
        slack_rel * (np.abs(dh) + gamma * h2[s] ** 2) + rounding_noise(t, h2),
    )


def exact_variance_rate(x: np.ndarray, chi: float, window: IndexWindow) -> float:
    """Half the time derivative of the window variance, from the flow itself."""
    xi = x[window.sl]
    return float(np.sum((xi - xi.mean()) * velocity(x, chi)[window.sl]))
