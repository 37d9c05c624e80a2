"""Deterministic particle approximation of the 1D Keller-Segel equation.

Particles of mass ``1/(N+1)`` follow the euclidean gradient flow of a
discrete free energy. The package integrates the flow to blow-up, detects
and classifies the collapsing sets, certifies the basin-of-stability
inequalities, rescales the collapse and studies the reduced three-particle
dynamics.
"""
from .blowup import (BlowUpReport, BlowUpSet, clustered_initial, detect_blowup_sets,
                     minimal_cardinality_check, stability_experiment)
from .diagnostics import (exterior_potential, lemma32_residuals, stability_constants,
                          stability_membership, t1_sum, window_stats)
from .dynamics import (IntegratorConfig, Trajectory, estimate_blowup_time, integrate,
                       second_moment_law_check)
from .model import (CriticalLadder, IndexWindow, OrderingError, ParticleState, RungError,
                    SingularityError, critical_ladder, dilation_shift, energy, flow_rhs,
                    log_hls_functional, second_moment_slope, velocity)
from .rescaled import (RescaledSeries, RescaledState, check_conditions_r1_r6,
                       corollary36_monitor, local_rescaled_energy, local_rescaled_gradient,
                       rescaled_energy, rescaled_flow_rhs, to_rescaled)

__version__ = "0.1.0"

__all__ = [
    "BlowUpReport", "BlowUpSet", "CriticalLadder", "IndexWindow", "IntegratorConfig",
    "OrderingError", "ParticleState", "RescaledSeries", "RescaledState", "RungError",
    "SingularityError", "Trajectory", "check_conditions_r1_r6", "clustered_initial",
    "corollary36_monitor", "critical_ladder", "detect_blowup_sets", "dilation_shift",
    "energy", "estimate_blowup_time", "exterior_potential", "flow_rhs", "integrate",
    "lemma32_residuals", "local_rescaled_energy", "local_rescaled_gradient",
    "log_hls_functional", "minimal_cardinality_check", "rescaled_energy",
    "rescaled_flow_rhs", "second_moment_law_check", "second_moment_slope",
    "stability_constants", "stability_experiment", "stability_membership", "t1_sum",
    "to_rescaled", "velocity", "window_stats",
]
