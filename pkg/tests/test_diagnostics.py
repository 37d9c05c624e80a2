import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kspart import (IndexWindow, IntegratorConfig, ParticleState, exterior_potential,
                    integrate, lemma32_residuals, stability_constants, stability_membership,
                    t1_sum, window_stats)
from kspart.diagnostics import (centered_derivative, exact_variance_rate, in_basin,
                                window_scan)


def test_window_stats_examples():
    s = ParticleState([-1.0, 0.0, 1.0], 1.0)
    w = window_stats(s, IndexWindow(1, 3))
    assert w.mean == 0.0 and w.variance == 2.0
    single = window_stats(s, IndexWindow(2, 2))
    assert single.variance == 0.0 and single.mean == 0.0
    about = window_stats(ParticleState([0.0, 1.0, 2.0, 10.0], 1.0), IndexWindow(1, 3), about=1.0)
    assert about.variance_about == 2.0


def test_exterior_potential_examples():
    s = ParticleState([0.0, 1.0, 2.0, 10.0], 1.0)
    h2 = exterior_potential(s, IndexWindow(1, 3), 2).value
    h4 = exterior_potential(s, IndexWindow(1, 3), 4).value
    assert h2 == pytest.approx(1 / 100 + 1 / 81 + 1 / 64, rel=1e-15)
    assert h2 == pytest.approx(0.0379707, abs=5e-8)
    assert h4 == pytest.approx(1e-4 + 9.0 ** -4 + 8.0 ** -4, rel=1e-15)
    assert h4 == pytest.approx(0.00049655, abs=1e-8)


def test_exterior_potential_errors():
    s = ParticleState([0.0, 1.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        exterior_potential(s, IndexWindow(1, 3), 2)
    with pytest.raises(ValueError):
        exterior_potential(s, IndexWindow(1, 2), 3)


def test_stability_constants_examples():
    c = stability_constants(49, 1.64, 31)
    assert c.alpha == pytest.approx(30 * (1.64 * 31 / 50 - 1), abs=1e-13)
    assert c.alpha == pytest.approx(0.504, abs=1e-12)
    # gamma = 12 + 14 chi + 4 N^(1/4), K = 2 + 2 chi / sqrt(N)
    gamma = 12 + 14 * 1.64 + 4 * 49 ** 0.25
    kk = 2 + 2 * 1.64 / 7
    assert c.c_n == pytest.approx(min(0.504 / (2 * gamma), 0.504 ** 2 / (8 * kk)), rel=1e-12)
    assert c.c_n == pytest.approx(0.005533, abs=1e-6)
    assert c.beta == pytest.approx(4 * gamma * c.c_n ** 2, rel=1e-12)
    assert c.blowup_time_bound(1e-3) == pytest.approx(1e-3 / 0.504)
    assert stability_constants(3, 1.5, 3).alpha == pytest.approx(0.25)


def _basin_state(eps, c_n, n=49, k=31):
    w = np.sqrt(eps) / 10
    inner = np.linspace(-w / 2, w / 2, k)
    d = 10 * np.sqrt(eps * k / c_n)
    n_left = (n - k) // 2
    left = inner[0] - d * np.arange(n_left, 0, -1)
    right = inner[-1] + d * np.arange(1, n - k - n_left + 1)
    return ParticleState(np.concatenate([left, inner, right]), 1.64)


def test_membership_examples():
    eps = 1e-3
    c = stability_constants(49, 1.64, 31)
    s = _basin_state(eps, c.c_n)
    win = stability_membership(s, 31, eps)
    assert win is not None and win.size == 31
    var, h2 = window_scan(s.positions, 31)
    s0 = win.q - 1
    # shrinking eps loosens the exterior bound but breaks the variance bound
    assert stability_membership(s, 31, eps / 100) is None
    assert var[s0] > eps / 100 and h2[s0] < c.c_n / (eps / 100)
    # growing eps keeps the variance bound and breaks the exterior bound
    assert stability_membership(s, 31, eps * 100) is None
    assert var[s0] <= eps * 100 and h2[s0] >= c.c_n / (eps * 100)


def test_membership_needs_rung_interval():
    from kspart import RungError
    s = ParticleState(np.linspace(0, 1, 49), 1.64)
    with pytest.raises(RungError):
        stability_membership(s, 20, 1e-3)
    with pytest.raises(ValueError):
        stability_membership(s, 31, 0.0)


def test_window_scan_matches_direct():
    x = np.sort(np.random.default_rng(1).uniform(-1, 1, 12))
    var, h2 = window_scan(x, 4)
    for s in range(9):
        w = IndexWindow(s + 1, s + 4)
        st_ = window_stats(x, w)
        assert var[s] == pytest.approx(st_.variance, rel=1e-12)
        assert h2[s] == pytest.approx(exterior_potential(x, w, 2).value, rel=1e-12)
    assert in_basin(x, 4, 0.0, np.inf) is None


def test_centered_derivative_exact_for_quadratics():
    t = np.cumsum(np.random.default_rng(0).uniform(0.1, 1.0, 20))
    f = 3 * t ** 2 - 2 * t + 1
    assert np.allclose(centered_derivative(t, f), 6 * t[1:-1] - 2, rtol=1e-10)


def test_variance_rate_full_window_is_exact():
    # with no outer particles the variance rate is the constant p (1 - chi (p+1)/(N+1))
    traj = integrate(ParticleState([-0.5, 0.0, 0.5], 1.5), IntegratorConfig())
    r = lemma32_residuals(traj, IndexWindow(1, 3))
    assert r.ok
    x = traj.positions[len(traj) // 2]
    assert exact_variance_rate(x, 1.5, IndexWindow(1, 3)) == pytest.approx(
        2 * (1 - 1.5 * 3 / 4), rel=1e-12)


def test_variance_rate_on_collapsing_run():
    x0 = np.sort(np.random.default_rng(8).uniform(-1, 1, 10))
    traj = integrate(ParticleState(x0, 1.5), IntegratorConfig())
    for q in range(1, 11):
        for p in range(q, 11, 3):
            r = lemma32_residuals(traj, IndexWindow(q, p))
            assert r.ok, (q, p, r.violations)


def test_variance_rate_needs_frames():
    from kspart.dynamics import Trajectory
    tr = Trajectory(np.array([0.0, 1.0]), np.array([[0.0, 1.0], [0.0, 0.9]]), 1.0,
                    "horizon", 1e-6)
    with pytest.raises(ValueError):
        lemma32_residuals(tr, IndexWindow(1, 2))


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(1e-3, 2.0), min_size=1, max_size=40), st.floats(-10, 10))
def test_t1_identity(gaps, x0):
    x = x0 + np.concatenate([[0.0], np.cumsum(gaps)])
    m = x.size
    assert t1_sum(x) == pytest.approx(-m * (m - 1) / 2, abs=1e-10 * max(1, m * m))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-2, 2.0), min_size=2, max_size=20), st.data())
def test_h4_bounded_by_h2_squared(gaps, data):
    x = np.concatenate([[0.0], np.cumsum(gaps)])
    n = x.size
    q = data.draw(st.integers(1, n))
    p = data.draw(st.integers(q, n))
    if q == 1 and p == n:
        return
    w = IndexWindow(q, p)
    h2 = exterior_potential(x, w, 2).value
    h4 = exterior_potential(x, w, 4).value
    assert h4 <= h2 ** 2 * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-2, 2.0), min_size=2, max_size=15), st.floats(0.1, 5.0),
       st.data())
def test_variance_rate_inequality_pointwise(gaps, chi, data):
    # the variance rate differs from its drift by at most K sqrt(Pi^2 H)
    x = np.concatenate([[0.0], np.cumsum(gaps)])
    n = x.size
    q = data.draw(st.integers(1, n))
    p = data.draw(st.integers(q, n))
    w = IndexWindow(q, p)
    rate = exact_variance_rate(x, chi, w)
    k = w.size - 1
    drift = k * (1 - chi * (k + 1) / (n + 1))
    pi2 = window_stats(x, w).variance
    h2 = exterior_potential(x, w, 2).value if w.size < n else 0.0
    kk = 2 + 2 * chi / np.sqrt(n)
    assert abs(rate - drift) <= kk * np.sqrt(pi2 * h2) + 1e-9 * (1 + abs(drift))
