"""The association game between users and service units.

Conventions used throughout the package:

* ``x`` -- int array over units, 1 if the unit is active.
* ``t`` -- int array over users, 1 if the user is present.
* ``z`` -- int array over users holding the chosen unit id, or ``NONE``.
* ``y`` -- int array over edges (canonical edge order) with labels
  -1 (unit inactive or saturated for the user), 0 (available, unused),
  1 (used).
"""

from __future__ import annotations

import math

import numpy as np

from .instance import Instance

NONE = -1
NEG_INF = -math.inf


class DomainError(ValueError):
    """A strategy or assignment outside the allowed domain."""


def unit_loads(inst: Instance, z) -> np.ndarray:
    """Total workload sitting on each unit under profile ``z``."""
    loads = np.zeros(inst.n_units, dtype=np.int64)
    for u, s in enumerate(z):
        if s != NONE:
            loads[s] += inst.w_su[_edge(inst, u, s)]
    return loads


def _edge(inst: Instance, u: int, s: int) -> int:
    try:
        return inst.edge_index[(int(u), int(s))]
    except KeyError:
        raise DomainError(f"user {u} cannot select unit {s}") from None


def _check_profile(inst: Instance, z):
    if len(z) != inst.n_users:
        raise DomainError("profile length does not match number of users")
    for u, s in enumerate(z):
        if s != NONE:
            _edge(inst, u, s)


def payoff(inst: Instance, x, t, z, u: int) -> float:
    """Payoff of user ``u`` under profile ``z``; ``NEG_INF`` for infeasible moves."""
    _check_profile(inst, z)
    s = z[u]
    if not t[u]:
        return 0.0 if s == NONE else NEG_INF
    if s == NONE:
        return -inst.omega
    e = _edge(inst, u, s)
    load = 0
    for v in inst.users_of(s):
        if z[v] == s:
            load += inst.w_su[_edge(inst, v, s)]
    # load includes u
    if load <= inst.capacity[s] * x[s]:
        return float(inst.w_us[e])
    return NEG_INF


def _action_payoffs(inst: Instance, x, u: int, z, loads) -> dict:
    """Payoff of every action of a present user ``u``, others held fixed."""
    out = {NONE: -inst.omega}
    for e in inst.user_edges(u):
        s = int(inst.edge_unit[e])
        others = loads[s] - (inst.w_su[e] if z[u] == s else 0)
        if x[s] and others + inst.w_su[e] <= inst.capacity[s]:
            out[s] = float(inst.w_us[e])
        else:
            out[s] = NEG_INF
    return out


def is_nash(inst: Instance, x, t, z) -> bool:
    """True iff no present user can raise its payoff by a unilateral change."""
    _check_profile(inst, z)
    loads = unit_loads(inst, z)
    for u in range(inst.n_users):
        if not t[u]:
            if z[u] != NONE:
                return False
            continue
        pay = _action_payoffs(inst, x, u, z, loads)
        if pay[z[u]] < max(pay.values()):
            return False
    return True


def z_to_y(inst: Instance, x, t, z) -> np.ndarray:
    """Edge labels induced by a capacity-feasible profile ``z``."""
    _check_profile(inst, z)
    loads = unit_loads(inst, z)
    for u, s in enumerate(z):
        if s != NONE and (not t[u] or loads[s] > inst.capacity[s] * x[s]):
            raise DomainError(f"profile infeasible at user {u} / unit {s}")
    y = np.zeros(inst.n_edges, dtype=np.int8)
    for e in range(inst.n_edges):
        u, s = inst.edge_user[e], inst.edge_unit[e]
        if z[u] == s:
            y[e] = 1
        elif not x[s] or loads[s] + inst.w_su[e] > inst.capacity[s]:
            y[e] = -1
    return y


def y_to_z(inst: Instance, y) -> np.ndarray:
    z = np.full(inst.n_users, NONE, dtype=np.int64)
    for e in np.flatnonzero(np.asarray(y) == 1):
        u = inst.edge_user[e]
        if z[u] != NONE:
            raise DomainError(f"user {u} uses more than one unit")
        z[u] = inst.edge_unit[e]
    return z


def check_edge_constraints(inst: Instance, x, t, y) -> bool:
    """Whether edge labels ``y`` describe a Nash equilibrium at ``(x, t)``.

    Checks: one connection per present user and none for absent users;
    unit capacities; connected users use a best available unit; -1/0 labels
    agree with availability; present users with an available unit connect.
    """
    y = np.asarray(y)
    on = y == 1
    load = np.bincount(inst.edge_unit, weights=on * inst.w_su, minlength=inst.n_units)
    for u in range(inst.n_users):
        sl = slice(inst.user_ptr[u], inst.user_ptr[u + 1])
        yu, wu = y[sl], inst.w_us[sl]
        n_on = int((yu == 1).sum())
        if n_on > t[u]:
            return False
        if n_on == 1:
            best = wu[yu == 1][0]
            if np.any(wu[yu == 0] > best):
                return False
        elif t[u] and np.any(yu == 0):
            return False
    for s in range(inst.n_units):
        if load[s] > inst.capacity[s] * x[s]:
            return False
    for e in range(inst.n_edges):
        if y[e] == 1:
            continue
        s = inst.edge_unit[e]
        saturated = not x[s] or load[s] + inst.w_su[e] > inst.capacity[s]
        if saturated != (y[e] == -1):
            return False
    return True


def best_response_dynamics(inst: Instance, x, t, seed: int, max_steps: int = 1000):
    """Asynchronous best-response dynamics from the all-disconnected profile.

    Each sweep visits the present users in a fresh seeded random order.
    Among equally good actions the current one is kept, otherwise the
    lowest unit id wins (disconnection last).  Returns the equilibrium
    profile, or ``None`` if none was reached within ``max_steps`` sweeps.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    rng = np.random.default_rng(seed)
    z = np.full(inst.n_users, NONE, dtype=np.int64)
    present = np.flatnonzero(np.asarray(t) == 1)
    loads = unit_loads(inst, z)
    for _ in range(max_steps):
        for u in rng.permutation(present):
            pay = _action_payoffs(inst, x, u, z, loads)
            best = max(pay.values())
            if pay[z[u]] == best:
                continue
            new = min((s for s, v in pay.items() if v == best and s != NONE), default=NONE)
            if z[u] != NONE:
                loads[z[u]] -= inst.w_su[_edge(inst, u, z[u])]
            if new != NONE:
                loads[new] += inst.w_su[_edge(inst, u, new)]
            z[u] = new
        if is_nash(inst, x, t, z):
            return z
    return None
