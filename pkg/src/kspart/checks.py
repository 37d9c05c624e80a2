"""Quick invariant suite behind ``kspart check``.

Each check returns ``(name, ok, detail)``. The suite runs in a few seconds
and exercises the energy, the flow, the certificates and the reduced
three-particle dynamics against closed-form values.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import approx_fprime

from .diagnostics import t1_sum
from .dynamics import IntegratorConfig, estimate_blowup_time, integrate, second_moment_law_check
from .model import (ParticleState, dilation_shift, energy, flow_rhs, log_hls_functional)
from .threebody import fixed_points, pair_linearization


def _random_state(rng, n, chi):
    return ParticleState(np.sort(rng.uniform(-1, 1, n)) + np.linspace(0, n, n) * 0.05, chi)


def check_gradient(rng, trials=20):
    worst = 0.0
    for _ in range(trials):
        s = _random_state(rng, int(rng.integers(2, 12)), float(rng.uniform(0.5, 4)))
        g0 = np.diff(s.positions).min()
        fd = approx_fprime(s.positions, lambda x: energy(s.with_positions(x)), 1e-7 * g0)
        v = flow_rhs(s)
        worst = max(worst, np.linalg.norm(fd + v) / np.linalg.norm(v))
    return "flow is minus the energy gradient", worst < 1e-4, f"max rel err {worst:.2e}"


def check_momentum(rng, trials=200):
    worst = 0.0
    for _ in range(trials):
        s = _random_state(rng, int(rng.integers(2, 30)), float(rng.uniform(0.1, 10)))
        v = flow_rhs(s)
        worst = max(worst, abs(v.sum()) / np.abs(v).sum())
    return "velocities sum to zero", worst < 1e-12, f"max rel sum {worst:.2e}"


def check_dilation(rng, trials=50):
    worst = 0.0
    for _ in range(trials):
        s = _random_state(rng, int(rng.integers(2, 20)), float(rng.uniform(0.1, 5)))
        lam = float(rng.uniform(0.2, 5))
        d = energy(s.with_positions(lam * s.positions)) - energy(s)
        worst = max(worst, abs(d - dilation_shift(s.n, s.chi, lam)) / (1 + abs(d)))
    return "energy dilation law", worst < 1e-10, f"max err {worst:.2e}"


def check_hls(rng, trials=2000):
    low = np.inf
    for _ in range(trials):
        low = min(low, log_hls_functional(np.sort(rng.normal(size=int(rng.integers(2, 8))))))
    return "log-HLS functional nonnegative", low >= -1e-9, f"min {low:.3e}"


def check_t1(rng, trials=200):
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(2, 40))
        x = np.sort(rng.uniform(-3, 3, m))
        worst = max(worst, abs(t1_sum(x) + m * (m - 1) / 2) / m ** 2)
    return "inner moment identity", worst < 1e-10, f"max err {worst:.2e}"


def check_second_moment():
    s = ParticleState(np.array([-0.7, -0.1, 0.2, 0.9, 1.3]), 2.5)
    traj = integrate(s, IntegratorConfig(tol=1e-11))
    dev = second_moment_law_check(traj, until_gap=10 * traj.gap_stop)
    return "second-moment law", dev < 1e-6, f"max rel dev {dev:.2e}"


def check_two_particle_time():
    traj = integrate(ParticleState([0.0, 1.0], 3.0), IntegratorConfig(tol=1e-11))
    t_hat = estimate_blowup_time(traj).t_hat
    return "two-particle blow-up time", abs(t_hat - 0.25) < 1e-6, f"T={t_hat:.10f}"


def check_three_body():
    fps = fixed_points(1.9)
    p = fps.asymmetric[0]
    err = max(abs(p[0] - 0.15480077878), abs(p[1] - 1.13998514493))
    ev = np.sort(np.linalg.eigvals(pair_linearization(2.5)).real)
    ok = err < 1e-9 and np.allclose(ev, [-0.5, 1.0])
    return "three-particle fixed points", bool(ok), f"point err {err:.1e}, eig {ev}"


def run_checks(seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    out = [check_gradient(rng), check_momentum(rng), check_dilation(rng), check_hls(rng),
           check_t1(rng), check_second_moment(), check_two_particle_time(),
           check_three_body()]
    return [(name, bool(ok), detail) for name, ok, detail in out]
