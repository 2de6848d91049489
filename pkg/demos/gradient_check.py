"""Check the factored policy-gradient formulas against finite differences.

Every analytic gradient (mean factors, sigma factors, critic factors and the two
Gaussian scores) is compared with a central difference of the corresponding
scalar objective on random small instances. The per-entry accumulation is also
compared with the dense matrix products S R^T and L^T S it is meant to equal.
"""

import numpy as np

from lrpg.gradcheck import GRADIENT_NAMES, check_instance, dense_oracle_errors, random_instance, run_gradcheck

rng = np.random.default_rng(7)
inst = random_instance(rng, factored_sigma=True)
print(f"one instance: {inst.policy.x_mu.n_rows}x{inst.policy.x_mu.n_cols} grid, "
      f"rank {inst.policy.x_mu.rank}, {len(inst.traj.actions)} steps")
for name, err in check_instance(inst).items():
    print(f"  {name:14s} rel err {err:.2e}")
for name, err in dense_oracle_errors(inst).items():
    print(f"  {name:14s} |per-entry - dense| {err:.2e}")

worst = run_gradcheck(instances=100, seed=0)
print("\nworst over 100 random instances:")
for name in GRADIENT_NAMES:
    print(f"  {name:14s} {worst[name]:.2e}")
