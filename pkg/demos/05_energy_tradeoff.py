"""Exhaustive search over which units to keep on, for a growing price per
unit of energy.  With free energy only units that add nothing are off (ties
go to the lexicographically smallest x); a high price turns everything off.

Run: python3 demos/05_energy_tradeoff.py
"""

from nashbp import Estimator, GeneratorParams, exhaustive_x, generate_instance

base = generate_instance(GeneratorParams(n_users=12, n_units=5, k=2, c_uniform=8, w_max=10,
                                         seed=9))
for alpha in (0.0, 1.0, 5.0, 10.0, 40.0, 200.0):
    res = exhaustive_x(base.replace(alpha=alpha), Estimator("exact"))
    print(f"alpha={alpha:6.1f}  best x={''.join(map(str, res.x_best))}  F={res.F_best:9.3f}")
