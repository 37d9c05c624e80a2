"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed at the end of the session. Running the file as a script prints
them directly.
"""
from __future__ import annotations

import functools
import time

import numpy as np
import pytest
from scipy.optimize import minimize

from kspart import (IndexWindow, IntegratorConfig, ParticleState, critical_ladder,
                    detect_blowup_sets, estimate_blowup_time, flow_rhs, integrate,
                    lemma32_residuals, local_rescaled_gradient, log_hls_functional,
                    stability_experiment, t1_sum, to_rescaled)
from kspart.rescaled import check_conditions_r1_r6, corollary36_monitor
from kspart.threebody import (CHI_BAR, SYMMETRIC_POINT, curve_point, fixed_points,
                              integrate_v, pair_collapse_analysis, restricted_eigenvalue)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


# independent oracles -------------------------------------------------------

def oracle_energy(x, chi):
    """Free energy by explicit loops."""
    n = len(x)
    e = 0.0
    for i in range(n - 1):
        e -= np.log(x[i + 1] - x[i])
    for i in range(n):
        for j in range(n):
            if i != j:
                e += chi / (n + 1) * np.log(abs(x[i] - x[j]))
    return e


def oracle_local_rescaled_energy(yi, n, chi, alpha):
    """Inner-window rescaled energy by explicit loops; mass 1/(n+1)."""
    k = len(yi)
    e = 0.0
    for i in range(k - 1):
        e -= np.log(yi[i + 1] - yi[i])
    for i in range(k):
        for j in range(k):
            if i != j:
                e += chi / (n + 1) * np.log(abs(yi[i] - yi[j]))
    return e - 0.5 * alpha * sum(v * v for v in yi)


def central_gradient(f, x, h):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def random_positions(rng, n, spread=2.0, min_gap=0.02):
    gaps = min_gap + rng.exponential(spread / n, n - 1)
    x = np.concatenate([[0.0], np.cumsum(gaps)])
    return x - x.mean() + rng.normal()


# shared runs ---------------------------------------------------------------

CRITERION1_CASES = [(3, 2.5, 11), (10, 1.5, 12), (49, 1.64, 13)]


@functools.lru_cache(maxsize=None)
def criterion1_run(n, chi, seed):
    x0 = np.sort(np.random.default_rng(seed).uniform(-1.0, 1.0, n))
    t0 = time.perf_counter()
    traj = integrate(ParticleState(x0, chi), IntegratorConfig())
    return traj, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def criterion6_experiment():
    t0 = time.perf_counter()
    summary = stability_experiment(49, 1.64, 31, 1e-3, 20, master_seed=2024,
                                   keep_trajectories=True)
    return summary, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def criterion6_rescaled():
    summary, _ = criterion6_experiment()
    out = []
    for o in summary.outcomes:
        s = max(o.report.sets, key=lambda b: b.size)
        series = to_rescaled(o.trajectory, s.window, o.t_hat, s.x_bar, summary.constants.alpha)
        out.append(series)
    return out


# criteria ------------------------------------------------------------------

def test_criterion_1_second_moment_law():
    worst, slowest, reasons = 0.0, 0.0, set()
    for n, chi, seed in CRITERION1_CASES:
        assert critical_ladder(n, chi).supercritical
        traj, elapsed = criterion1_run(n, chi, seed)
        reasons.add(traj.stop_reason)
        keep = traj.min_gaps >= 10 * traj.gap_stop
        pi2 = np.sum(traj.positions ** 2, axis=1)
        law = pi2[0] + 2 * (n - 1) * (1 - chi * n / (n + 1)) * traj.times
        dev = float(np.max(np.abs(pi2[keep] - law[keep]) / pi2[keep]))
        worst = max(worst, dev)
        slowest = max(slowest, elapsed)
    ok = worst <= 1e-6 and slowest <= 10.0 and reasons == {"gap_collapse"}
    record(1, "exact second-moment law", ok,
           f"max rel dev {worst:.2e}, slowest case {slowest:.1f}s")
    assert ok


def test_criterion_2_gradient_consistency():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst_flow = worst_local = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 16))
        chi = float(rng.uniform(0.2, 6.0))
        x = random_positions(rng, n)
        h = 1e-5 * np.diff(x).min()
        fd = central_gradient(lambda y: oracle_energy(y, chi), x, h)
        v = flow_rhs(ParticleState(x, chi))
        worst_flow = max(worst_flow, np.linalg.norm(v + fd) / np.linalg.norm(fd))
    for _ in range(100):
        n = int(rng.integers(3, 16))
        chi = float(rng.uniform(0.2, 6.0))
        alpha = float(rng.uniform(0.05, 2.0))
        y = random_positions(rng, n)
        q = int(rng.integers(1, n))
        p = int(rng.integers(q + 1, n + 1))
        w = IndexWindow(q, p)
        yi = y[w.sl]
        h = 1e-5 * np.diff(yi).min()
        fd = central_gradient(lambda z: oracle_local_rescaled_energy(z, n, chi, alpha), yi, h)
        g = local_rescaled_gradient(y, w, chi, alpha)
        worst_local = max(worst_local, np.linalg.norm(g - fd) / np.linalg.norm(fd))
    elapsed = time.perf_counter() - t0
    ok = worst_flow <= 1e-6 and worst_local <= 1e-6 and elapsed <= 5.0
    record(2, "gradient-flow consistency", ok,
           f"flow {worst_flow:.1e}, local rescaled {worst_local:.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_3_closed_form_blowup_times():
    cfg = IntegratorConfig(tol=1e-11)
    two = integrate(ParticleState([0.0, 1.0], 3.0), cfg)
    t_two = estimate_blowup_time(two).t_hat
    three = integrate(ParticleState([-0.5, 0.0, 0.5], 2.0), cfg)
    t_three = estimate_blowup_time(three, IndexWindow(1, 3),
                                   method="variance_linear_fit").t_hat
    ok_two = abs(t_two - 0.25) <= 1e-4
    ok_three = abs(t_three - 0.5) <= 1e-3
    record(3, "closed-form blow-up times", ok_two and ok_three,
           f"two-particle T={t_two:.8f} (target 0.25), "
           f"symmetric three-particle T={t_three:.8f} (target 0.5)")
    assert ok_two, t_two
    assert ok_three, t_three


def test_criterion_4_three_particle_profile():
    errs_sym = []
    for v1 in (0.2, 0.5, 1.0, 1.15):
        sol = integrate_v(curve_point(v1), 1.5, 80.0, stabilize=True)
        errs_sym.append(np.abs(sol.y[:, -1] - SYMMETRIC_POINT).max())
    target = np.array([0.154801, 1.139985])
    errs_asym = []
    for v1 in (0.1, 0.3, 0.55, 0.9, 1.1, 1.2):
        sol = integrate_v(curve_point(v1), 1.9, 40.0, stabilize=True)
        end = np.sort(sol.y[:, -1])
        errs_asym.append(np.abs(end - target).max())
    merged = []
    for chi in (float(CHI_BAR) - 1e-6, float(CHI_BAR) + 1e-6):
        fps = fixed_points(chi)
        lam = restricted_eigenvalue(fps.symmetric, chi)
        merged.append(fps.merged and fps.asymmetric is None and abs(lam) < 1e-4)
    ok = max(errs_sym) <= 1e-6 and max(errs_asym) <= 1e-5 and all(merged)
    record(4, "three-particle profile selection", ok,
           f"chi=1.5 err {max(errs_sym):.1e}, chi=1.9 err {max(errs_asym):.1e}, "
           f"merge at 16/9 {all(merged)}")
    assert ok


def test_criterion_5_pair_collapse():
    pa = pair_collapse_analysis(2.5)
    ab = pa.alpha_bar
    ok_eig = pa.eigenvalues == (2 * ab, -ab) and ab == 0.5
    ok_v1 = abs(pa.v1_final - 1.0) <= 1e-3
    ok_rate = abs(pa.escape_rate - ab) <= 0.05 * ab
    ok = ok_eig and ok_v1 and ok_rate
    record(5, "pair collapse", ok,
           f"v1 {pa.v1_final:.6f}, escape rate {pa.escape_rate:.6f}, "
           f"eigenvalues {pa.eigenvalues}")
    assert ok


def test_criterion_6_mass_quantization():
    summary, elapsed = criterion6_experiment()
    bound = 1e-3 / 0.504
    outs = summary.outcomes
    good = sum(o.quantized and o.strong and o.sizes == [31] and o.t_hat <= bound
               and o.nested_ok for o in outs)
    ok = len(outs) == 20 and good == 20 and elapsed <= 120.0
    record(6, "mass quantization in the basin", ok,
           f"{good}/20 runs with one strong 31-set, T within bound and nested membership; "
           f"max T {max(o.t_hat for o in outs):.3e} <= {bound:.3e}; {elapsed:.0f}s")
    assert ok


def test_criterion_7_log_hls():
    rng = np.random.default_rng(7)
    low = np.inf
    p2_max = 0.0
    for _ in range(10_000):
        p = int(rng.integers(2, 9))
        x = np.sort(rng.standard_cauchy(p) if rng.random() < 0.3 else rng.normal(size=p))
        if np.any(np.diff(x) <= 0):
            continue
        val = log_hls_functional(x)
        low = min(low, val)
        if p == 2:
            p2_max = max(p2_max, abs(val))

    def in_gaps(z):
        return log_hls_functional(np.concatenate([[0.0], np.cumsum(np.exp(z))]))

    low_min = np.inf
    for p in (2, 3, 4, 5):
        for _ in range(100):
            res = minimize(in_gaps, rng.normal(size=p - 1), method="BFGS")
            low_min = min(low_min, in_gaps(res.x))
    ok = low >= -1e-9 and low_min >= -1e-9 and p2_max == 0.0
    record(7, "discrete log-HLS", ok,
           f"min over random {low:.2e}, min over minimizers {low_min:.2e}, "
           f"max |p=2 value| {p2_max:.1e}")
    assert ok


def test_criterion_8_rigidity_monitors():
    summary, _ = criterion6_experiment()
    a = summary.constants.alpha
    bad = []
    worst_osc = worst_grad = worst_rate = 0.0
    for o, series in zip(summary.outcomes, criterion6_rescaled()):
        rep = check_conditions_r1_r6(series)
        rate_err = abs(rep.witnesses["h_rate"] - 2 * a) / (2 * a)
        worst_osc = max(worst_osc, rep.tail_oscillation)
        worst_grad = max(worst_grad, rep.final_grad_norm)
        worst_rate = max(worst_rate, rate_err)
        if not (rep.tail_oscillation <= 1e-4 and rep.final_grad_norm <= 1e-3
                and rep.all_hold and rate_err <= 0.1):
            bad.append(o.seed)
    ok = not bad
    record(8, "rigidity monitors", ok,
           f"tail osc {worst_osc:.1e}, final grad {worst_grad:.1e}, "
           f"H-rate rel err {worst_rate:.1e}, failing seeds {bad}")
    assert ok


def _windows_for(traj, rng, extra=12):
    n = traj.n
    wins = {IndexWindow(1, n)}
    if traj.stop_reason == "gap_collapse":
        for s in detect_blowup_sets(traj).sets:
            wins.add(s.window)
    for _ in range(extra):
        q = int(rng.integers(1, n + 1))
        p = int(rng.integers(q, n + 1))
        wins.add(IndexWindow(q, p))
    return sorted(wins, key=lambda w: (w.q, w.p))


def test_criterion_9_certificates():
    rng = np.random.default_rng(9)
    viol = {"variance": 0, "variance_about": 0, "exterior": 0}
    checked = 0
    trajs = [criterion1_run(*c)[0] for c in CRITERION1_CASES]
    summary, _ = criterion6_experiment()
    trajs += [o.trajectory for o in summary.outcomes]
    for traj in trajs:
        for w in _windows_for(traj, rng):
            r = lemma32_residuals(traj, w)
            for key, v in r.violations.items():
                viol[key] += v
            checked += 1
    cor_viol, cor_fired = 0, 0
    for series in criterion6_rescaled():
        inner = series.window
        for w in {inner, IndexWindow(1, series.n), IndexWindow(inner.q + 1, inner.p),
                  IndexWindow(inner.q, inner.p - 1), IndexWindow(inner.q - 1, inner.p),
                  IndexWindow(inner.q - 1, inner.p + 1), IndexWindow(inner.q + 5, inner.p - 5)}:
            v = corollary36_monitor(series, w)
            cor_fired += v.firing_frames
            cor_viol += int(np.sum(v.margin[v.fired] < 0))
    t1_err = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        x = random_positions(rng, n, min_gap=1e-3)
        q = int(rng.integers(1, n + 1))
        p = int(rng.integers(q, n + 1))
        m = p - q + 1
        t1_err = max(t1_err, abs(t1_sum(x[q - 1:p]) + m * (m - 1) / 2))
    ok = sum(viol.values()) == 0 and cor_viol == 0 and t1_err <= 1e-10
    record(9, "variance and exterior certificates", ok,
           f"{checked} windows, violations {viol}; rescaled checks fired on "
           f"{cor_fired} frames with {cor_viol} violations; T1 max err {t1_err:.1e}")
    assert ok


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                pass
