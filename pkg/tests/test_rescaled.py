import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kspart import (IndexWindow, IntegratorConfig, ParticleState, estimate_blowup_time,
                    flow_rhs, integrate)
from kspart.rescaled import (check_conditions_r1_r6, corollary36_monitor, integrate_rescaled,
                             local_gap, local_gap_bound, local_rescaled_energy,
                             local_rescaled_gradient, rescaled_energy, rescaled_flow_rhs,
                             to_rescaled)
from kspart.cli import RESCALE_CUTOFF
from kspart.dynamics import Trajectory


def _collapse(x0, chi):
    return integrate(ParticleState(x0, chi), IntegratorConfig(tol=1e-12))


def test_to_rescaled_identity_at_unit_scale():
    traj = _collapse([-0.5, 0.0, 0.5], 1.5)
    alpha = 0.25
    t_hat = 1.0 / (2 * alpha)  # R(0) = 1
    keep = traj.times < t_hat
    sub = Trajectory(traj.times[keep], traj.positions[keep], traj.chi, traj.stop_reason,
                     traj.gap_stop)
    s = to_rescaled(sub, None, t_hat, 0.0, alpha)
    assert s.scale[0] == 1.0 and s.tau[0] == 0.0
    assert np.array_equal(s.y[0], traj.positions[0])
    with pytest.raises(ValueError):
        to_rescaled(traj, None, traj.times[-1], 0.0, alpha)
    with pytest.raises(ValueError):
        to_rescaled(sub, None, t_hat, 0.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 2.0), min_size=1, max_size=8), st.floats(0.1, 5.0),
       st.floats(0.0, 3.0))
def test_rescaled_rhs_identities(gaps, chi, alpha):
    y = np.concatenate([[0.0], np.cumsum(gaps)]) - 1.0
    f = rescaled_flow_rhs(y, chi, alpha)
    # the centre of mass drifts as alpha * sum Y
    assert f.sum() == pytest.approx(alpha * y.sum(), abs=1e-9 * (1 + np.abs(f).sum()))
    if alpha == 0.0:
        assert np.allclose(f, flow_rhs(ParticleState(y, chi)))
    full = IndexWindow(1, y.size)
    assert local_rescaled_energy(y, full, chi, alpha) == pytest.approx(
        rescaled_energy(y, chi, alpha), abs=1e-12)
    assert local_gap(y, full, chi, alpha) <= 1e-9 * (1 + np.abs(f).max())


def test_local_gradient_matches_finite_differences():
    y = np.array([-2.0, -0.3, 0.1, 0.6, 3.0])
    w = IndexWindow(2, 4)
    g = local_rescaled_gradient(y, w, 1.7, 0.4)
    h = 1e-6
    for j in range(3):
        e = np.zeros(5)
        e[j + 1] = h
        fd = (local_rescaled_energy(y + e, w, 1.7, 0.4)
              - local_rescaled_energy(y - e, w, 1.7, 0.4)) / (2 * h)
        assert g[j] == pytest.approx(fd, rel=1e-6, abs=1e-8)
    single = local_rescaled_gradient(y, IndexWindow(3, 3), 1.7, 0.4)
    assert single.tolist() == [-0.4 * 0.1]


def test_commutation_with_direct_rescaled_flow():
    chi = 1.5
    alpha = 2 * (chi * 3 / 4 - 1)  # generic rate for the full triple
    x0 = np.array([-0.7, 0.1, 0.45])
    x0 -= x0.mean()
    traj = _collapse(x0, chi)
    # the centred second moment falls at exactly 2 alpha, so T is known
    t_hat = float(x0 @ x0) / (2 * alpha)
    keep = (traj.times < t_hat * (1 - 1e-6))
    sub = Trajectory(traj.times[keep], traj.positions[keep], chi, traj.stop_reason,
                     traj.gap_stop)
    s = to_rescaled(sub, None, t_hat, 0.0, alpha)
    sel = s.tau <= 5.0
    assert s.tau[sel][-1] > 4.5
    tau, y = integrate_rescaled(s.y[0], chi, alpha, float(s.tau[sel][-1]),
                                tau_eval=s.tau[sel])
    assert np.abs(y - s.y[sel]).max() <= 1e-4


def _triple_series():
    traj = _collapse([-0.5, 0.1, 0.5], 1.5)
    est = estimate_blowup_time(traj, IndexWindow(1, 3), method="variance_linear_fit")
    keep = traj.times < est.t_hat * (1 - RESCALE_CUTOFF)
    sub = Trajectory(traj.times[keep], traj.positions[keep], 1.5, traj.stop_reason,
                     traj.gap_stop)
    x_bar = float(traj.positions[0].mean())
    return to_rescaled(sub, IndexWindow(1, 3), est.t_hat, x_bar, 0.25)


def test_rigidity_conditions_on_collapsing_triple():
    s = _triple_series()
    rep = check_conditions_r1_r6(s)
    assert rep.all_hold, rep.conditions
    assert rep.tail_oscillation < 1e-6
    # the inner configuration settles at a rescaled critical point
    assert rep.final_grad_norm <= 1e-5
    d = rep.as_dict()
    assert set(d["conditions"]) == {"R1", "R2", "R3", "R4", "R5", "R6"}
    ok, c = local_gap_bound(rep, 0.25)
    assert ok and c >= 0


def test_rigidity_needs_window_and_frames():
    s = _triple_series()
    s.window = None
    with pytest.raises(ValueError):
        check_conditions_r1_r6(s)


def test_rescaled_variance_monitor_vacuous_for_single_particle():
    s = _triple_series()
    v = corollary36_monitor(s, IndexWindow(2, 2))
    assert v.firing_frames == 0 and v.ok
    full = corollary36_monitor(s, IndexWindow(1, 3))
    assert full.case == 2 and full.ok
    assert full.firing_frames > 0
