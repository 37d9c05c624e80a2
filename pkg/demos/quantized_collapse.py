"""
Quantized collapse of 49 particles
==================================

At ``chi = 1.64`` the smallest set that can collapse has ``k* = 31``
particles. Starting from 31 particles packed at variance ``1e-3`` and the
rest far away, the cluster collapses alone, on time, and settles in the
parabolic frame. Run time is a few seconds.
"""
import numpy as np

from kspart import (IndexWindow, IntegratorConfig, ParticleState, check_conditions_r1_r6,
                    clustered_initial, critical_ladder, detect_blowup_sets, integrate,
                    stability_constants, to_rescaled)
from kspart.blowup import nested_membership
from kspart.dynamics import Trajectory

n, chi, eps = 49, 1.64, 1e-3
ladder = critical_ladder(n, chi)
k = ladder.k_star
c = stability_constants(n, chi, k)
print(f"k* = {k}, alpha = {c.alpha:.4f}, C_N = {c.c_n:.6f}, "
      f"time bound eps/alpha = {c.blowup_time_bound(eps):.6f}")

x0 = clustered_initial(n, chi, k, eps, rng=np.random.default_rng(1))
traj = integrate(ParticleState(x0, chi), IntegratorConfig())
rep = detect_blowup_sets(traj, ladder=ladder, t_hat_method="variance_linear_fit")
print(f"stop: {traj.stop_reason}, T = {rep.t_hat:.6f}")
for s in rep.sets:
    print(f"set {s.window.as_list()} size {s.size} {s.classification}")
print(f"quantized: {rep.quantization_verdict}")

member = nested_membership(traj, c, eps)
print(f"stays in the shrinking basin on all {member.size} frames: {bool(member.all())}")

# parabolic rescaling about the collapsing window
win = rep.sets[0].window
keep = traj.times < rep.t_hat * (1 - 1e-8)
sub = Trajectory(traj.times[keep], traj.positions[keep], chi, traj.stop_reason, traj.gap_stop)
x_bar = float(traj.positions[-1, win.sl].mean())
series = to_rescaled(sub, win, rep.t_hat, x_bar, c.alpha)
rig = check_conditions_r1_r6(series)
print(f"rescaled conditions: {rig.conditions}")
print(f"local rescaled energy tail oscillation: {rig.tail_oscillation:.2e}")
