"""Exact oracle: exhaustive Nash-equilibrium enumeration at fixed ``(x, t)``
and averages over presence patterns by sampling or full summation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit

from .game import NONE, z_to_y
from .instance import Instance

DEFAULT_BUDGET = 10**9


class ResourceError(RuntimeError):
    """The requested computation exceeds a configured size bound."""


@dataclass(frozen=True)
class ExactResult:
    """Uniform averages over the equilibria at one ``(x, t)``.

    ``present_disconnected`` is the mean number of present users with no
    connection; it feeds the disconnection penalty of the full objective.
    """

    Z: int
    W: float
    N: float
    Osat: float
    present_disconnected: float

    @property
    def defined(self) -> bool:
        return self.Z > 0


class _Search:
    """Backtracking over present users' choices (a unit or ``NONE``).

    A branch is cut when the capacity of the chosen unit is exceeded, or when
    some already-placed user has a strictly better unit that can no longer
    become saturated even if every unplaced user adjacent to it joined.
    """

    def __init__(self, inst: Instance, x, t, budget: int):
        self.inst = inst
        self.budget = budget
        self.nodes = 0
        self.cap = [int(c) * int(xs) for c, xs in zip(inst.capacity, x)]
        self.present = [u for u in range(inst.n_users) if t[u]]
        # per user: list of (unit, w_su, w_us) over active units
        self.opts = {}
        for u in range(inst.n_users):
            row = []
            for e in inst.user_edges(u):
                s = int(inst.edge_unit[e])
                row.append((s, int(inst.w_su[e]), int(inst.w_us[e])))
            self.opts[u] = row
        self.active = [bool(v) for v in x]
        self.loads = [0] * inst.n_units
        self.rem = [0] * inst.n_units
        for u in self.present:
            for s, wsu, _ in self.opts[u]:
                if self.active[s]:
                    self.rem[s] += wsu
        self.z = [NONE] * inst.n_users
        # (user, list of (unit, w_su) that must end up saturated)
        self.watch: list[tuple[int, list]] = []

    def _ok(self) -> bool:
        loads, rem, cap = self.loads, self.rem, self.cap
        for _, must in self.watch:
            for s, wsu in must:
                top = loads[s] + rem[s]
                if top > cap[s]:
                    top = cap[s]
                if top + wsu <= cap[s]:
                    return False
        return True

    def run(self, i: int = 0):
        self.nodes += 1
        if self.nodes > self.budget:
            raise ResourceError(f"enumeration budget of {self.budget} nodes exceeded")
        if i == len(self.present):
            yield self.z
            return
        u = self.present[i]
        row = self.opts[u]
        for s, wsu, _ in row:
            if self.active[s]:
                self.rem[s] -= wsu
        loads, cap = self.loads, self.cap
        for s, wsu, wus in row + [(NONE, 0, None)]:
            if s == NONE:
                must = [(s2, w2) for s2, w2, _ in row if self.active[s2]]
            else:
                if not self.active[s] or loads[s] + wsu > cap[s]:
                    continue
                must = [(s2, w2) for s2, w2, wus2 in row if self.active[s2] and wus2 > wus]
                loads[s] += wsu
            self.z[u] = s
            self.watch.append((u, must))
            if self._ok():
                yield from self.run(i + 1)
            self.watch.pop()
            self.z[u] = NONE
            if s != NONE:
                loads[s] -= wsu
        for s, wsu, _ in row:
            if self.active[s]:
                self.rem[s] += wsu


def iter_nash_profiles(inst: Instance, x, t, budget: int = DEFAULT_BUDGET):
    """Yield every pure equilibrium as a strategy profile (copies)."""
    x = np.asarray(x)
    t = np.asarray(t)
    for z in _Search(inst, x, t, budget).run():
        yield np.array(z, dtype=np.int64)


def enumerate_nash(inst: Instance, x, t, budget: int = DEFAULT_BUDGET):
    """Yield the edge labelling of every pure equilibrium exactly once."""
    for z in iter_nash_profiles(inst, x, t, budget):
        yield z_to_y(inst, x, t, z)


def count_nash(inst: Instance, x, t, budget: int = DEFAULT_BUDGET) -> int:
    return sum(1 for _ in _Search(inst, np.asarray(x), np.asarray(t), budget).run())


def exact_observables(inst: Instance, x, t, budget: int = DEFAULT_BUDGET) -> ExactResult:
    """Average workload, disconnections and satisfaction over all equilibria."""
    x = np.asarray(x, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    cap = inst.capacity * x
    present = np.flatnonzero(t).astype(np.int64)
    Z, sw, sn, so, snd, status = _count_kernel(
        present, t, inst.user_ptr, inst.edge_unit, inst.w_su, inst.w_us, cap, budget)
    if status:
        raise ResourceError(f"enumeration budget of {budget} nodes exceeded")
    if Z == 0:
        nan = float("nan")
        return ExactResult(0, nan, nan, nan, nan)
    return ExactResult(int(Z), sw / Z, sn / Z, so / Z, snd / Z)


@njit(cache=True)
def _count_kernel(present, t, uptr, eunit, wsu, wus, cap, budget):
    # Same search as _Search, iterative, accumulating observables at leaves.
    n_users = len(uptr) - 1
    n_units = len(cap)
    n = len(present)
    loads = np.zeros(n_units, np.int64)
    rem = np.zeros(n_units, np.int64)
    for i in range(n):
        u = present[i]
        for e in range(uptr[u], uptr[u + 1]):
            if cap[eunit[e]] > 0:
                rem[eunit[e]] += wsu[e]
    chosen = np.full(n_users, -1, np.int64)  # edge index or -1
    choice = np.full(n, -1, np.int64)
    applied = np.zeros(n, np.bool_)
    Z = 0
    sw = 0
    sn = 0
    so = 0
    snd = 0
    nodes = 1
    level = 0
    if n > 0:
        u = present[0]
        for e in range(uptr[u], uptr[u + 1]):
            if cap[eunit[e]] > 0:
                rem[eunit[e]] -= wsu[e]
    while True:
        if n == 0:
            leaf = True
        else:
            u = present[level]
            deg = uptr[u + 1] - uptr[u]
            if applied[level]:
                e = chosen[u]
                loads[eunit[e]] -= wsu[e]
                applied[level] = False
            chosen[u] = -1
            choice[level] += 1
            c = choice[level]
            if c > deg:
                for e in range(uptr[u], uptr[u + 1]):
                    if cap[eunit[e]] > 0:
                        rem[eunit[e]] += wsu[e]
                choice[level] = -1
                level -= 1
                if level < 0:
                    break
                continue
            if c < deg:
                e = uptr[u] + c
                s = eunit[e]
                if cap[s] == 0 or loads[s] + wsu[e] > cap[s]:
                    continue
                loads[s] += wsu[e]
                applied[level] = True
                chosen[u] = e
            nodes += 1
            if nodes > budget:
                return Z, sw, sn, so, snd, 1
            ok = True
            for j in range(level + 1):
                v = present[j]
                ev = chosen[v]
                for e2 in range(uptr[v], uptr[v + 1]):
                    s2 = eunit[e2]
                    if cap[s2] == 0 or e2 == ev:
                        continue
                    if ev >= 0 and wus[e2] <= wus[ev]:
                        continue
                    top = loads[s2] + rem[s2]
                    if top > cap[s2]:
                        top = cap[s2]
                    if top + wsu[e2] <= cap[s2]:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            leaf = level == n - 1
            if not leaf:
                level += 1
                u = present[level]
                for e in range(uptr[u], uptr[u + 1]):
                    if cap[eunit[e]] > 0:
                        rem[eunit[e]] -= wsu[e]
                continue
        Z += 1
        for u in range(n_users):
            e = chosen[u]
            if e >= 0:
                sw += wsu[e]
                so += wus[e]
                continue
            disc = True
            for e2 in range(uptr[u], uptr[u + 1]):
                if loads[eunit[e2]] + wsu[e2] <= cap[eunit[e2]]:
                    disc = False
                    break
            if disc:
                sn += 1
                if t[u]:
                    snd += 1
        if n == 0:
            break
    return Z, sw, sn, so, snd, 0


@dataclass(frozen=True)
class AveragedResult:
    """Averages over presence patterns of per-pattern equilibrium averages.

    For sampled results the ``*_se`` fields are standard errors of the mean;
    for full summation they are zero.  Patterns without any equilibrium are
    left out of the means and counted in ``n_undefined`` (``mass_undefined``
    carries their probability under full summation).
    """

    W: float
    N: float
    Osat: float
    present_disconnected: float
    W_se: float = 0.0
    N_se: float = 0.0
    Osat_se: float = 0.0
    present_disconnected_se: float = 0.0
    n_samples: int = 0
    n_undefined: int = 0
    mass_undefined: float = 0.0
    n_unconverged: int = 0


def sample_presence(inst: Instance, size: int, seed: int) -> np.ndarray:
    """``size`` i.i.d. presence patterns, one row each."""
    rng = np.random.default_rng(seed)
    return (rng.random((size, inst.n_users)) < inst.p).astype(np.int8)


def sampled_average(inst: Instance, x, sample_size: int, seed: int,
                    inner: str = "enumerate", bp_params=None,
                    budget: int = DEFAULT_BUDGET) -> AveragedResult:
    """Monte Carlo average over presence patterns drawn from ``p``.

    ``inner`` picks the per-pattern evaluator: exhaustive enumeration, or
    fixed-presence belief propagation (``"bp"``) for instances too large to
    enumerate.
    """
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    x = np.asarray(x)
    ts = sample_presence(inst, sample_size, seed)
    cache: dict[bytes, tuple] = {}
    rows = []
    n_undef = n_unconv = 0
    for t in ts:
        key = t.tobytes()
        if key not in cache:
            cache[key] = _evaluate_pattern(inst, x, t, inner, bp_params, budget)
        vals, conv = cache[key]
        if not conv:
            n_unconv += 1
        if vals is None:
            n_undef += 1
            continue
        rows.append(vals)
    if not rows:
        nan = float("nan")
        return AveragedResult(nan, nan, nan, nan, n_samples=sample_size,
                              n_undefined=n_undef, n_unconverged=n_unconv)
    arr = np.array(rows)
    mean = arr.mean(axis=0)
    se = arr.std(axis=0, ddof=1) / np.sqrt(len(arr)) if len(arr) > 1 else np.zeros(4)
    return AveragedResult(*mean.tolist(), *se.tolist(), n_samples=sample_size,
                          n_undefined=n_undef, n_unconverged=n_unconv)


def _evaluate_pattern(inst, x, t, inner, bp_params, budget):
    if inner == "enumerate":
        r = exact_observables(inst, x, t, budget)
        if not r.defined:
            return None, True
        return (r.W, r.N, r.Osat, r.present_disconnected), True
    if inner == "bp":
        from .bp import BPParams, DegenerateMessageError, run_fixed_t
        from .observables import compute_from_marginals
        try:
            marg, rep = run_fixed_t(inst, x, t, bp_params or BPParams())
        except DegenerateMessageError:
            return None, False
        o = compute_from_marginals(inst, x, marg)
        return (o.W, o.N, o.Osat, o.present_disconnected), rep.converged
    raise ValueError(f"unknown inner evaluator {inner!r}")


def full_average(inst: Instance, x, max_users: int = 16,
                 budget: int = DEFAULT_BUDGET) -> AveragedResult:
    """Exact expectation over all ``2**U`` presence patterns."""
    if inst.n_users > max_users:
        raise ResourceError(f"full summation needs n_users <= {max_users}, got {inst.n_users}")
    x = np.asarray(x)
    acc = np.zeros(4)
    mass = 0.0
    mass_undef = 0.0
    n_undef = 0
    for bits in itertools.product((0, 1), repeat=inst.n_users):
        t = np.array(bits, dtype=np.int8)
        prob = float(np.prod(np.where(t == 1, inst.p, 1.0 - inst.p)))
        if prob == 0.0:
            continue
        r = exact_observables(inst, x, t, budget)
        if not r.defined:
            n_undef += 1
            mass_undef += prob
            continue
        acc += prob * np.array([r.W, r.N, r.Osat, r.present_disconnected])
        mass += prob
    if mass == 0.0:
        nan = float("nan")
        return AveragedResult(nan, nan, nan, nan, n_undefined=n_undef, mass_undefined=mass_undef)
    mean = acc / mass
    return AveragedResult(*mean.tolist(), n_samples=2**inst.n_users,
                          n_undefined=n_undef, mass_undefined=mass_undef)
