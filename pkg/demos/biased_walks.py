"""Biased domain-wall walks: classical vs intrinsically quantum T breaking.

All four preset generators protect the same sigma = exp(mu sum Z Z) while
transporting domain walls.  The classical walks move population between
stabilizer configurations; the quantum walk moves *superpositions* of
domain walls, which shows up in the hop-operator correlator
<O_{x-2}(t) O_x(0)> - <O_{x+2}(t) O_x(0)> (identically zero classically)
and is suppressed by extra measurement (the Zeno effect).
"""

import numpy as np

from stabsteer import (
    drift_correlator,
    merge_models,
    preset_models,
    stationarity_residual,
    superposition_correlator,
    zeno_dephasing,
)

L = 6
mu = 0.25 * np.log(2)
times = np.linspace(0.0, 2.5, 6)

for name in ("classical_biased_walk", "quantum_biased_walk",
             "classical_flocking"):
    model = preset_models(name, L, mu)
    print(f"{name}: residual {stationarity_residual(model):.2e}")

single = preset_models("quantum_biased_walk", L, mu, sites=[2])
print(f"single-site quantum walk (local protection): "
      f"residual {stationarity_residual(single):.2e}")

print("\nsuperposition-drift correlator (max |.| over t):")
for name in ("classical_biased_walk", "classical_flocking",
             "quantum_biased_walk"):
    model = preset_models(name, L, mu)
    val = np.abs(superposition_correlator(model, 2, times)).max()
    print(f"  {name}: {val:.3e}")

print("\nZeno suppression of the quantum drift (peak of the S-correlator):")
for alpha in (0.0, 2.0, 4.0):
    model = preset_models("zeno", L, mu, alpha=alpha)
    peak = np.abs(drift_correlator(model, 2, times)).max()
    print(f"  alpha = {alpha}: {peak:.3e}")

classical = preset_models("classical_biased_walk", L, mu)
base = np.abs(drift_correlator(classical, 2, times)).max()
damped = merge_models(classical, zeno_dephasing(L, mu, 4.0))
after = np.abs(drift_correlator(damped, 2, times)).max()
print(f"\nclassical drift peak {base:.3e} is untouched by the same "
      f"dephasing ({after:.3e})")
