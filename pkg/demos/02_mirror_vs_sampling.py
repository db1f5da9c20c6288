"""Mirror BP averages over presence in one run.  Here it is checked against
Monte Carlo over presence patterns with exact enumeration inside, on a
small random instance, as the sample grows.

Run: python3 demos/02_mirror_vs_sampling.py
"""

import numpy as np

from nashbp import (GeneratorParams, compute_from_marginals, full_average, generate_instance,
                    run_mirror, sampled_average)

inst = generate_instance(GeneratorParams(n_users=12, n_units=4, k=2, c_uniform=8, w_max=10,
                                         seed=11))
x = np.ones(inst.n_units, dtype=np.int64)

marg, rep = run_mirror(inst, x)
mirror = compute_from_marginals(inst, x, marg)
print(f"mirror BP      W={mirror.W:8.3f}  N={mirror.N:6.3f}  "
      f"(converged={rep.converged}, {rep.iterations} sweeps)")

for S in (10, 100, 1000, 10000):
    r = sampled_average(inst, x, S, seed=0)
    print(f"sampled S={S:<5d} W={r.W:8.3f}+-{r.W_se:.3f}  N={r.N:6.3f}+-{r.N_se:.3f}")

full = full_average(inst, x)
print(f"all 2^12 patterns W={full.W:8.3f}  N={full.N:6.3f}")
