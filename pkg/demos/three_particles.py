"""
Three particles: regimes, stationary profiles and pair collapse
================================================================

The three-particle system changes behaviour at ``chi = 4/3`` (collapse
begins), ``16/9`` (the symmetric profile loses stability along the
constraint curve) and ``2`` (pairs collapse without the third particle).
"""
from kspart.threebody import (classify_regime, fixed_points, liouville_check,
                              pair_collapse_analysis, restricted_eigenvalue)

for chi in (1.2, 1.5, 1.8, 1.9, 2.5):
    print(f"chi = {chi}: {classify_regime(chi)}")

for chi in (1.5, 1.9):
    fps = fixed_points(chi)
    print(f"\nchi = {chi}: stationary points on the curve")
    for p in fps.points:
        lam = restricted_eigenvalue(p, chi)
        print(f"  ({p[0]:.6f}, {p[1]:.6f})  along-curve eigenvalue {lam:+.4f}")
    v = liouville_check(chi)
    print(f"  every curve trajectory converges to an attractor: {v.ok} "
          f"(worst limit error {max(v.limit_errors):.1e})")

pa = pair_collapse_analysis(2.5)
print(f"\nchi = 2.5: linearization eigenvalues {pa.eigenvalues}")
print(f"  rescaled pair gap -> {pa.v1_final:.6f}, third particle escapes at rate "
      f"{pa.escape_rate:.5f} (chi - 2 = 0.5)")
