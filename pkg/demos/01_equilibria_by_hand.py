"""Two users, one unit: list every pure Nash equilibrium and compare the
exact averages with belief propagation at the same presence pattern.

Run: python3 demos/01_equilibria_by_hand.py
"""

import numpy as np

from nashbp import (BPParams, Instance, best_response_dynamics, compute_exact,
                    compute_from_marginals, enumerate_nash, exact_observables, run_fixed_t)

# both users put workload 3 on a unit of capacity 5, so only one fits
inst = Instance(n_users=2, n_units=1,
                edge_user=np.array([0, 1]), edge_unit=np.array([0, 0]),
                w_us=np.array([7, 7]), w_su=np.array([3, 3]),
                capacity=np.array([5]), cost=np.array([1.0]), p=np.array([1.0, 1.0]),
                omega=10.0, alpha=0.0, w_max=10)
x, t = np.array([1]), np.array([1, 1])

print("equilibria as edge labels (-1 saturated, 0 free, 1 used):")
for y in enumerate_nash(inst, x, t):
    print("  ", y.tolist())

z = best_response_dynamics(inst, x, t, seed=0)
print("best-response dynamics from a random start lands on", z)

exact = compute_exact(inst, x, exact_observables(inst, x, t))
marg, rep = run_fixed_t(inst, x, t, BPParams(tol=1e-12))
bp = compute_from_marginals(inst, x, marg, source="fixed-t-bp")
print(f"exact: W={exact.W:.3f} N={exact.N:.3f} Osat={exact.Osat:.3f}")
print(f"BP   : W={bp.W:.3f} N={bp.N:.3f} Osat={bp.Osat:.3f} "
      f"({rep.iterations} sweeps, residual {rep.residual:.1e})")
