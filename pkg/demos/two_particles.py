"""
Two particles: the closed-form collapse
=======================================

With two particles the gap obeys ``d(u^2)/dt = 4 (1 - 2 chi / 3)``, so the
pair collapses at ``T = 3 u0^2 / (4 (2 chi - 3))`` once ``chi > 3/2`` and
spreads like ``sqrt(t)`` below. This script checks both against the
integrator.
"""
import numpy as np

from kspart import IntegratorConfig, ParticleState, estimate_blowup_time, integrate

# supercritical: chi = 3, unit gap, T = 1/4
traj = integrate(ParticleState([0.0, 1.0], 3.0), IntegratorConfig())
est = estimate_blowup_time(traj)
u2 = np.diff(traj.positions, axis=1)[:, 0] ** 2
print(f"stop: {traj.stop_reason} after {traj.n_steps} steps")
print(f"estimated T = {est.t_hat:.12f} (exact 0.25)")
print(f"max |u^2 - (1 - 4t)| = {np.abs(u2 - (1 - 4 * traj.times)).max():.2e}")

# subcritical: chi = 1, the gap grows as u^2 = 1 + 4t/3
traj = integrate(ParticleState([0.0, 1.0], 1.0), IntegratorConfig(t_max=3.0))
u2 = np.diff(traj.positions, axis=1)[:, 0] ** 2
print(f"\nsubcritical stop: {traj.stop_reason} at t = {traj.times[-1]}")
print(f"max |u^2 - (1 + 4t/3)| = {np.abs(u2 - (1 + 4 * traj.times / 3)).max():.2e}")
