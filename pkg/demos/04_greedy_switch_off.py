"""Switch service units off one by one, each time the unit whose loss costs
the least expected satisfaction, and read off where a 1% budget on lost
satisfaction would stop.

Run: python3 demos/04_greedy_switch_off.py   (a few minutes)
"""

from nashbp import Estimator, GeneratorParams, StopRule, generate_instance, greedy_decimation

inst = generate_instance(GeneratorParams(n_users=150, n_units=20, k=3, c_uniform=15, w_max=10,
                                         seed=4))
rule = StopRule("rel_drop", 0.01)
traj = greedy_decimation(inst, Estimator("mirror"), rule,
                         progress=lambda s: print(f"  off {s.switched_off:2d}  Osat {s.O_after:8.2f}  "
                                                  f"drop {s.drop_abs:7.2f}  "
                                                  f"cumulative {s.drop_rel_cumulative:6.2%}"))
print(f"all on: Osat {traj.initial.Osat:.2f}")
print(f"1% rule keeps {traj.chosen_stop} switch-offs; active units left: "
      f"{int(traj.x_chosen.sum())} of {inst.n_units}")
