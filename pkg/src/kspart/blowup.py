"""Blow-up set detection and classification, and the basin-of-stability
experiment."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import StabilityConstants, in_basin, stability_constants
from .dynamics import IntegratorConfig, Trajectory, estimate_blowup_time, integrate
from .model import CriticalLadder, IndexWindow, ParticleState, critical_ladder


@dataclass(frozen=True)
class BlowUpSet:
    window: IndexWindow
    classification: str  # "weak" or "strong"
    clearance: float | None  # c with |X_i - X_j| >= 1/c across the boundary
    x_bar: float

    @property
    def size(self) -> int:
        return self.window.size

    def as_dict(self) -> dict:
        return {"window": self.window.as_list(), "class": self.classification,
                "c": self.clearance, "x_bar": self.x_bar}


@dataclass
class BlowUpReport:
    t_hat: float
    method: str
    sets: list[BlowUpSet]
    k_expected: int | None

    @property
    def quantization_verdict(self) -> bool:
        return (self.k_expected is not None and bool(self.sets)
                and all(s.size == self.k_expected for s in self.sets))

    @property
    def x_bar_per_set(self) -> list[float]:
        return [s.x_bar for s in self.sets]

    def as_dict(self) -> dict:
        return {"t_hat": self.t_hat, "method": self.method,
                "sets": [s.as_dict() for s in self.sets],
                "k_expected": self.k_expected,
                "quantization": self.quantization_verdict}


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as (start, stop) zero-based half-open ranges."""
    runs, start = [], None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, mask.size))
    return runs


def detect_blowup_sets(traj: Trajectory, gap_tol: float = 1e-2,
                       clearance_tol: float = 0.1, tail: float = 0.2,
                       ladder: CriticalLadder | None = None,
                       t_hat_method: str | None = None) -> BlowUpReport:
    """Find the blow-up sets of a collapsing trajectory.

    Over the final `tail` fraction of frames a consecutive pair collapses
    when its smallest gap drops below ``gap_tol`` times the initial minimal
    gap. Maximal contiguous runs of collapsing pairs give the candidate
    sets. A set is strong when each of its gaps decreases monotonically,
    the largest late gap stays below ten times the threshold, and both
    boundary gaps stay above ``clearance_tol`` times the initial minimal
    gap. Otherwise it is weak.
    """
    if traj.stop_reason != "gap_collapse":
        raise ValueError(f"trajectory stopped by {traj.stop_reason}, not gap collapse")
    gaps = np.diff(traj.positions, axis=1)
    g0 = float(gaps[0].min())
    m = max(int(np.ceil(tail * len(traj))), 3)
    late = gaps[-m:]
    thresh = gap_tol * g0
    collapsing = late.min(axis=0) < thresh
    runs = _runs(collapsing)
    if not runs:
        raise ValueError("no collapsing pair found despite a gap-collapse stop; "
                         "gap_tol is inconsistent with gap_stop")
    ladder = ladder or critical_ladder(traj.n, traj.chi)
    sets = []
    for a, b in runs:
        # gaps a..b-1 join particles a+1..b+1 (1-based)
        win = IndexWindow(a + 1, b + 1)
        g = late[:, a:b]
        monotone = bool(np.all(np.diff(g, axis=0) <= 1e-9 * g[:-1]))
        small = bool(np.all(g.max(axis=0) < 10 * thresh))
        bnd = []
        if a > 0:
            bnd.append(late[:, a - 1])
        if b < gaps.shape[1]:
            bnd.append(late[:, b])
        bmin = min((float(v.min()) for v in bnd), default=np.inf)
        cleared = bmin >= clearance_tol * g0
        strong = monotone and small and cleared
        x_bar = float(traj.positions[-1, win.sl].mean())
        sets.append(BlowUpSet(win, "strong" if strong else "weak",
                              1.0 / bmin if np.isfinite(bmin) else None, x_bar))
    inner = max(sets, key=lambda s: s.size).window
    est = estimate_blowup_time(traj, inner, tail=tail, method=t_hat_method)
    return BlowUpReport(est.t_hat, est.method, sets, ladder.k_star)


def minimal_cardinality_check(report: BlowUpReport, ladder: CriticalLadder) -> bool:
    """Every detected set holds at least the critical number of particles."""
    if not report.sets:
        raise ValueError("empty report")
    k = ladder.k_star if ladder.k_star is not None else ladder.on_rung
    return all(s.size >= k for s in report.sets)


def clustered_initial(n: int, chi: float, k: int, eps: float, margin: float = 4.0,
                      rng: np.random.Generator | None = None, noise: float = 0.01,
                      constants: StabilityConstants | None = None) -> np.ndarray:
    """Initial data inside the basin: k clustered particles, the rest far out.

    The inner cluster is equally spaced over width ``sqrt(eps/k)`` around 0.
    Outer particles alternate sides at multiples of
    ``margin * sqrt(k * eps / C_N)`` from the cluster edges. With `rng`
    every position is shifted by uniform noise of relative size `noise`
    times its smallest adjacent gap.
    """
    const = constants or stability_constants(n, chi, k)
    w = np.sqrt(eps / k)
    inner = np.linspace(-w / 2, w / 2, k)
    d = margin * np.sqrt(k * eps / const.c_n)
    n_left = (n - k) // 2
    n_right = n - k - n_left
    left = -w / 2 - d * np.arange(n_left, 0, -1)
    right = w / 2 + d * np.arange(1, n_right + 1)
    x = np.concatenate([left, inner, right])
    if rng is not None:
        g = np.diff(x)
        local = np.minimum(np.concatenate([[g[0]], g]), np.concatenate([g, [g[-1]]]))
        x = x + noise * local * rng.uniform(-1.0, 1.0, n)
    return x


@dataclass
class SeedOutcome:
    seed: int
    t_hat: float
    quantized: bool
    strong: bool
    sizes: list[int]
    time_bound_ok: bool
    nested_ok: bool
    nested_frames: int
    report: BlowUpReport = field(repr=False)
    trajectory: Trajectory | None = field(default=None, repr=False)


@dataclass
class ExperimentSummary:
    n: int
    chi: float
    k: int
    eps: float
    constants: StabilityConstants
    outcomes: list[SeedOutcome]

    @property
    def quantization_rate(self) -> float:
        return float(np.mean([o.quantized for o in self.outcomes]))

    @property
    def all_ok(self) -> bool:
        return all(o.quantized and o.strong and o.time_bound_ok and o.nested_ok
                   for o in self.outcomes)

    def as_dict(self) -> dict:
        return {
            "n": self.n, "chi": self.chi, "k": self.k, "eps": self.eps,
            "constants": self.constants.as_dict(),
            "quantization_rate": self.quantization_rate,
            "seeds": [{"seed": o.seed, "t_hat": o.t_hat, "quantized": o.quantized,
                       "strong": o.strong, "sizes": o.sizes,
                       "time_bound_ok": o.time_bound_ok, "nested_ok": o.nested_ok}
                      for o in self.outcomes],
        }


def nested_membership(traj: Trajectory, const: StabilityConstants, eps: float,
                      t0: float = 0.0) -> np.ndarray:
    """Per-frame membership in the drifting basins.

    At ``s = t - t0`` the basin is ``D^{eps - s alpha, C_N/eps + s beta/eps^2}``.
    """
    s = traj.times - t0
    var_bound = eps - s * const.alpha
    h_bound = const.c_n / eps + s * const.beta / eps ** 2
    x = traj.positions
    k = const.k
    ok = np.zeros(len(traj), dtype=bool)
    for q in range(x.shape[1] - k + 1):
        w = IndexWindow(q + 1, q + k)
        xi = x[:, w.sl]
        var = np.sum((xi - xi.mean(axis=1, keepdims=True)) ** 2, axis=1)
        xo = x[:, w.outer_mask(x.shape[1])]
        h2 = np.sum((xo[:, :, None] - xi[:, None, :]) ** -2.0, axis=(1, 2))
        ok |= (var <= var_bound) & (h2 < h_bound)
    return ok & (var_bound > 0)


def run_seed(n, chi, k, eps, seed, cfg=None, margin=4.0, keep_trajectory=False,
             t_hat_method="variance_linear_fit") -> SeedOutcome:
    const = stability_constants(n, chi, k)
    x0 = clustered_initial(n, chi, k, eps, margin, np.random.default_rng(seed),
                           constants=const)
    state = ParticleState(x0, chi)
    if in_basin(x0, k, eps, const.c_n / eps) is None:
        raise ValueError(f"eps={eps} gives infeasible initial data for seed {seed}")
    if cfg is None:
        g0 = float(np.diff(x0).min())
        cfg = IntegratorConfig(dt_init=1e-3 * g0 ** 2, gap_stop=1e-4 * g0,
                               t_max=10 * const.blowup_time_bound(eps))
    traj = integrate(state, cfg)
    if traj.stop_reason != "gap_collapse":
        raise RuntimeError(f"seed {seed}: no collapse ({traj.stop_reason})")
    report = detect_blowup_sets(traj, t_hat_method=t_hat_method)
    nested = nested_membership(traj, const, eps)
    return SeedOutcome(
        seed, report.t_hat, report.quantization_verdict,
        all(s.classification == "strong" for s in report.sets),
        [s.size for s in report.sets],
        report.t_hat <= const.blowup_time_bound(eps),
        bool(nested.all()), len(nested), report,
        traj if keep_trajectory else None,
    )


def stability_experiment(n: int, chi: float, k: int, eps: float, seed_count: int,
                         master_seed: int = 0, keep_trajectories: bool = False,
                         **kwargs) -> ExperimentSummary:
    """Run `seed_count` perturbed basin initial data to blow-up.

    Each run records whether exactly k particles blow up strongly, whether
    the blow-up time respects ``T <= eps/alpha`` and whether every frame
    stays in the drifting nested basins.
    """
    const = stability_constants(n, chi, k)
    seeds = np.random.SeedSequence(master_seed).generate_state(seed_count)
    outcomes = [run_seed(n, chi, k, eps, int(s), keep_trajectory=keep_trajectories,
                         **kwargs) for s in seeds]
    return ExperimentSummary(n, chi, k, eps, const, outcomes)
