# # Fits converge to the population maximiser as n grows
#
# The reference is the best multi-start fit on 200 000 draws. Each row fits a
# fresh sample and reports its label-switching invariant distance to it.

# %%
import numpy as np

from esdmix import FitConfig, GaussianLaw, ShiftedMixtureSpec, run_consistency_experiment

spec = ShiftedMixtureSpec(
    laws=[GaussianLaw(np.eye(2))] * 2,
    xi=[0.5, 0.5],
    shifts=np.array([[[-3.0, 0.0], [3.0, 0.0]]]),
    epsilon=4.0,
    eta=0.01,
)
cfg = FitConfig(K=2, gamma=100.0)

# %%
for seed in range(3):
    rep = run_consistency_experiment(spec, 0, [200, 2000, 20000], cfg, reference_M=200_000, seed=seed,
                                     check_validity=seed == 0)
    if seed == 0:
        print("population checks:", rep.validity)
    print(f"seed {seed}:", "  ".join(f"n={r.n}: d={r.param_distance:.4f}" for r in rep.rows))

# %% [markdown]
# Distances fall roughly like 1/sqrt(n): a tenfold sample cuts them by about 3.
