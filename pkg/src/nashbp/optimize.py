"""Search over unit activation vectors: greedy switch-off and exhaustive."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bp import BPParams, DegenerateMessageError, run_mirror
from .enumerate import ResourceError, full_average, sampled_average
from .instance import Instance
from .observables import ObservableSet, UndefinedObservablesError, compute_exact, compute_from_marginals

ESTIMATORS = ("mirror", "sampled", "exact")


class DecimationError(RuntimeError):
    """Every candidate of a greedy step failed to evaluate."""


@dataclass(frozen=True)
class Estimator:
    """Evaluates an activation vector to an ``ObservableSet``.

    Returns ``None`` when the estimate is unusable (BP failed to converge or
    hit a degenerate message, or no equilibrium exists).
    """

    kind: str = "mirror"
    bp_params: BPParams = BPParams()
    sample_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.kind!r}")

    def __call__(self, inst: Instance, x) -> ObservableSet | None:
        x = np.asarray(x, dtype=np.int64)
        if self.kind == "mirror":
            try:
                marg, rep = run_mirror(inst, x, self.bp_params)
            except DegenerateMessageError:
                return None
            obs = compute_from_marginals(inst, x, marg, "mirror-bp", rep.converged)
            return obs if rep.converged else None
        if self.kind == "sampled":
            res = sampled_average(inst, x, self.sample_size, self.seed)
        else:
            res = full_average(inst, x)
        try:
            return compute_exact(inst, x, res, "sampled" if self.kind == "sampled" else "exact")
        except UndefinedObservablesError:
            return None


@dataclass(frozen=True)
class StopRule:
    """``kind`` is ``"max_steps"``, ``"rel_drop"`` or ``"none"``."""

    kind: str = "rel_drop"
    value: float = 0.005

    def stop_index(self, steps) -> int:
        """Number of leading steps kept under this rule."""
        if self.kind == "none":
            return len(steps)
        if self.kind == "max_steps":
            return min(int(self.value), len(steps))
        if self.kind == "rel_drop":
            kept = 0
            for st in steps:
                if st.drop_rel_cumulative > self.value:
                    break
                kept += 1
            return kept
        raise ValueError(f"unknown stop rule {self.kind!r}")


@dataclass(frozen=True)
class DecimationStep:
    switched_off: int
    x_after: np.ndarray
    observables: ObservableSet
    O_before: float
    O_after: float
    drop_abs: float
    drop_rel_cumulative: float
    n_failed: int = 0


@dataclass
class DecimationTrajectory:
    initial: ObservableSet
    steps: list = field(default_factory=list)
    chosen_stop: int = 0

    @property
    def x_chosen(self) -> np.ndarray:
        if self.chosen_stop == 0:
            return np.ones(len(self.steps[0].x_after) if self.steps else 0, dtype=np.int64)
        return self.steps[self.chosen_stop - 1].x_after


def _evaluate_many(inst, xs, estimator, workers):
    if workers > 1 and len(xs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(estimator, [inst] * len(xs), xs))
    return [estimator(inst, x) for x in xs]


def greedy_decimation(inst: Instance, estimator: Estimator = Estimator(),
                      stop_rule: StopRule = StopRule(), max_steps: int | None = None,
                      stop_early: bool = False, workers: int = 1,
                      progress=None) -> DecimationTrajectory:
    """Switch units off one at a time, each time the one whose removal costs
    the least expected satisfaction ``Osat``.

    Starts from every unit on.  The full trajectory is computed unless
    ``max_steps`` is given or ``stop_early`` halts it as soon as
    ``stop_rule`` would; ``chosen_stop`` always records where the rule cuts.
    Ties go to the lowest unit id.
    """
    x = np.ones(inst.n_units, dtype=np.int64)
    start = estimator(inst, x)
    if start is None:
        raise DecimationError("estimator failed on the all-on configuration")
    traj = DecimationTrajectory(initial=start)
    O0 = start.Osat
    current = start
    limit = inst.n_units if max_steps is None else min(max_steps, inst.n_units)
    while len(traj.steps) < limit:
        on = np.flatnonzero(x)
        cands = []
        for s in on:
            xc = x.copy()
            xc[s] = 0
            cands.append(xc)
        results = _evaluate_many(inst, cands, estimator, workers)
        best = None
        n_failed = 0
        for s, xc, obs in zip(on, cands, results):
            if obs is None:
                n_failed += 1
                continue
            drop = current.Osat - obs.Osat
            if best is None or drop < best[0]:
                best = (drop, int(s), xc, obs)
        if best is None:
            raise DecimationError(f"all {len(on)} candidates failed at step {len(traj.steps) + 1}")
        drop, s, xc, obs = best
        rel = (O0 - obs.Osat) / O0 if O0 != 0 else 0.0
        traj.steps.append(DecimationStep(s, xc, obs, current.Osat, obs.Osat, drop, rel, n_failed))
        if progress is not None:
            progress(traj.steps[-1])
        x, current = xc, obs
        if stop_early and stop_rule.stop_index(traj.steps) < len(traj.steps):
            break
    traj.chosen_stop = stop_rule.stop_index(traj.steps)
    return traj


@dataclass
class ExhaustiveResult:
    x_best: np.ndarray
    F_best: float
    table: list  # (x, ObservableSet or None) in lexicographic order of x


def exhaustive_x(inst: Instance, estimator: Estimator = Estimator("exact"),
                 max_units: int = 15, workers: int = 1) -> ExhaustiveResult:
    """Evaluate the full objective on every activation vector.

    The lexicographically smallest maximiser wins ties.
    """
    if inst.n_units > max_units:
        raise ResourceError(f"exhaustive search needs n_units <= {max_units}, got {inst.n_units}")
    xs = [np.array(bits, dtype=np.int64)
          for bits in itertools.product((0, 1), repeat=inst.n_units)]
    results = _evaluate_many(inst, xs, estimator, workers)
    best_x, best_F = None, -np.inf
    for xv, obs in zip(xs, results):
        if obs is not None and obs.F > best_F:
            best_x, best_F = xv, obs.F
    if best_x is None:
        raise DecimationError("no activation vector could be evaluated")
    return ExhaustiveResult(best_x, float(best_F), list(zip(xs, results)))
