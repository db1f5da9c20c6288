"""Problem instances: the bipartite user/unit graph with weights, capacities,
costs and presence probabilities.

Edges are stored as flat arrays in canonical order (sorted by user, then
unit), so the edges of user ``u`` are the contiguous slice
``user_ptr[u]:user_ptr[u + 1]``.  Units index their edges through
``unit_ptr`` / ``unit_edges``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

FORMAT_VERSION = 1


class InstanceParseError(ValueError):
    """Raised when an instance file is malformed."""


@dataclass(frozen=True)
class GeneratorParams:
    n_users: int
    n_units: int
    k: int
    c_uniform: int
    w_max: int
    omega: float = 10.0
    alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_users", "n_units", "k", "c_uniform", "w_max"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.k > self.n_units:
            raise ValueError(f"k={self.k} exceeds n_units={self.n_units}")
        if self.omega < 0 or self.alpha < 0:
            raise ValueError("omega and alpha must be non-negative")


@dataclass(frozen=True, eq=False)
class Instance:
    n_users: int
    n_units: int
    edge_user: np.ndarray
    edge_unit: np.ndarray
    w_us: np.ndarray
    w_su: np.ndarray
    capacity: np.ndarray
    cost: np.ndarray
    p: np.ndarray
    omega: float
    alpha: float
    w_max: int
    user_xy: np.ndarray = field(default=None)
    unit_xy: np.ndarray = field(default=None)

    def __post_init__(self):
        ea = lambda a, dt: np.ascontiguousarray(a, dtype=dt)  # noqa: E731
        eu = ea(self.edge_user, np.int64)
        es = ea(self.edge_unit, np.int64)
        order = np.lexsort((es, eu))
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("edge_user", eu[order])
        set_("edge_unit", es[order])
        set_("w_us", ea(self.w_us, np.int64)[order])
        set_("w_su", ea(self.w_su, np.int64)[order])
        set_("capacity", ea(self.capacity, np.int64))
        set_("cost", ea(self.cost, np.float64))
        set_("p", ea(self.p, np.float64))
        set_("omega", float(self.omega))
        set_("alpha", float(self.alpha))
        set_("w_max", int(self.w_max))
        for name, n in (("user_xy", self.n_users), ("unit_xy", self.n_units)):
            xy = getattr(self, name)
            set_(name, np.zeros((n, 2)) if xy is None else ea(xy, np.float64).reshape(n, 2))
        for arr in (self.edge_user, self.edge_unit, self.w_us, self.w_su,
                    self.capacity, self.cost, self.p, self.user_xy, self.unit_xy):
            arr.flags.writeable = False

    @property
    def n_edges(self) -> int:
        return len(self.edge_user)

    @cached_property
    def user_ptr(self) -> np.ndarray:
        counts = np.bincount(self.edge_user, minlength=self.n_users)
        return np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

    @cached_property
    def unit_edges(self) -> np.ndarray:
        return np.argsort(self.edge_unit, kind="stable").astype(np.int64)

    @cached_property
    def unit_ptr(self) -> np.ndarray:
        counts = np.bincount(self.edge_unit, minlength=self.n_units)
        return np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(u), int(s)): e
                for e, (u, s) in enumerate(zip(self.edge_user, self.edge_unit))}

    def user_edges(self, u: int) -> range:
        return range(self.user_ptr[u], self.user_ptr[u + 1])

    def units_of(self, u: int) -> np.ndarray:
        return self.edge_unit[self.user_ptr[u]:self.user_ptr[u + 1]]

    def edges_of_unit(self, s: int) -> np.ndarray:
        return self.unit_edges[self.unit_ptr[s]:self.unit_ptr[s + 1]]

    def users_of(self, s: int) -> np.ndarray:
        return self.edge_user[self.edges_of_unit(s)]

    def replace(self, **changes) -> "Instance":
        kw = {name: getattr(self, name) for name in self.__dataclass_fields__}
        kw.update(changes)
        return Instance(**kw)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        for name in self.__dataclass_fields__:
            a, b = getattr(self, name), getattr(other, name)
            if isinstance(a, np.ndarray):
                if a.shape != b.shape or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


def generate_instance(params: GeneratorParams) -> Instance:
    """Random geometric instance: users and units uniform in the unit square,
    each user linked to its ``k`` nearest units.

    Workloads are ``ceil(gamma * d**2)`` with ``gamma`` normalising the
    longest edge to ``w_max``; satisfaction is ``w_max - w_su``.
    """
    rng = np.random.default_rng(params.seed)
    user_xy = rng.random((params.n_users, 2))
    unit_xy = rng.random((params.n_units, 2))
    p = 1.0 - rng.random(params.n_users)

    d2 = ((user_xy[:, None, :] - unit_xy[None, :, :]) ** 2).sum(axis=2)
    # stable sort: equal distances resolved by lower unit id
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :params.k]
    edge_user = np.repeat(np.arange(params.n_users), params.k)
    edge_unit = nearest.ravel()
    dist2 = d2[edge_user, edge_unit]

    dmax = dist2.max()
    if dmax > 0:
        w_su = np.ceil(params.w_max / dmax * dist2).astype(np.int64)
    else:
        w_su = np.full(len(dist2), params.w_max, dtype=np.int64)
    w_su = np.clip(w_su, 1, params.w_max)
    w_su[np.argmax(dist2)] = params.w_max
    w_us = params.w_max - w_su

    return Instance(
        n_users=params.n_users,
        n_units=params.n_units,
        edge_user=edge_user,
        edge_unit=edge_unit,
        w_us=w_us,
        w_su=w_su,
        capacity=np.full(params.n_units, params.c_uniform),
        cost=np.ones(params.n_units),
        p=p,
        omega=params.omega,
        alpha=params.alpha,
        w_max=params.w_max,
        user_xy=user_xy,
        unit_xy=unit_xy,
    )


class Violation(NamedTuple):
    field: str
    index: object
    message: str

    def __str__(self):
        return f"{self.field}[{self.index}]: {self.message}"


def validate(inst: Instance) -> list[Violation]:
    """Check the structural invariants of ``inst``; empty list means valid."""
    out: list[Violation] = []
    deg = np.diff(inst.user_ptr)
    for u in np.flatnonzero(deg == 0):
        out.append(Violation("users", int(u), "user has no edges"))
    for e in range(inst.n_edges):
        u, s = int(inst.edge_user[e]), int(inst.edge_unit[e])
        if not (0 <= u < inst.n_users) or not (0 <= s < inst.n_units):
            out.append(Violation("edges", (u, s), "endpoint out of range"))
        if inst.w_su[e] < 1 or inst.w_su[e] > inst.w_max:
            out.append(Violation("w_su", (u, s), f"{inst.w_su[e]} not in [1, {inst.w_max}]"))
        if inst.w_us[e] < 0:
            out.append(Violation("w_us", (u, s), f"{inst.w_us[e]} is negative"))
    pairs = set()
    for u, s in zip(inst.edge_user.tolist(), inst.edge_unit.tolist()):
        if (u, s) in pairs:
            out.append(Violation("edges", (u, s), "duplicate edge"))
        pairs.add((u, s))
    for u in range(inst.n_users):
        if not (0.0 < inst.p[u] <= 1.0):
            out.append(Violation("p", u, f"{inst.p[u]!r} not in (0, 1]"))
    for s in range(inst.n_units):
        if inst.capacity[s] < 1:
            out.append(Violation("capacity", s, f"{inst.capacity[s]} is not positive"))
        if not inst.cost[s] >= 0:
            out.append(Violation("cost", s, f"{inst.cost[s]!r} is negative"))
    if inst.omega < 0:
        out.append(Violation("omega", None, "negative"))
    if inst.alpha < 0:
        out.append(Violation("alpha", None, "negative"))
    return out


def is_acyclic(inst: Instance) -> bool:
    """True if the bipartite user/unit graph is a forest."""
    parent = list(range(inst.n_users + inst.n_units))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for u, s in zip(inst.edge_user.tolist(), inst.edge_unit.tolist()):
        a, b = find(u), find(inst.n_users + s)
        if a == b:
            return False
        parent[a] = b
    return True


# ---------------------------------------------------------------- persistence

_TOP_KEYS = {"version", "n_users", "n_units", "omega", "alpha", "w_max",
             "units", "users", "edges"}
_UNIT_KEYS = {"id", "x", "y", "capacity", "cost"}
_USER_KEYS = {"id", "x", "y", "p"}
_EDGE_KEYS = {"u", "s", "w_us", "w_su"}


def instance_to_dict(inst: Instance) -> dict:
    return {
        "version": FORMAT_VERSION,
        "n_users": inst.n_users,
        "n_units": inst.n_units,
        "omega": inst.omega,
        "alpha": inst.alpha,
        "w_max": inst.w_max,
        "units": [
            {"id": s, "x": float(inst.unit_xy[s, 0]), "y": float(inst.unit_xy[s, 1]),
             "capacity": int(inst.capacity[s]), "cost": float(inst.cost[s])}
            for s in range(inst.n_units)
        ],
        "users": [
            {"id": u, "x": float(inst.user_xy[u, 0]), "y": float(inst.user_xy[u, 1]),
             "p": float(inst.p[u])}
            for u in range(inst.n_users)
        ],
        "edges": [
            {"u": int(u), "s": int(s), "w_us": int(a), "w_su": int(b)}
            for u, s, a, b in zip(inst.edge_user, inst.edge_unit, inst.w_us, inst.w_su)
        ],
    }


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def _check_keys(obj, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise InstanceParseError(f"{where}: expected an object")
    missing = allowed - obj.keys()
    if missing:
        raise InstanceParseError(f"{where}: missing key {sorted(missing)[0]!r}")
    extra = obj.keys() - allowed
    if extra:
        raise InstanceParseError(f"{where}: unknown key {sorted(extra)[0]!r}")


def _int(obj, key, where):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise InstanceParseError(f"{where}.{key}: expected integer, got {v!r}")
    return v


def _real(obj, key, where):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InstanceParseError(f"{where}.{key}: expected number, got {v!r}")
    return float(v)


def instance_from_dict(doc: dict) -> Instance:
    _check_keys(doc, _TOP_KEYS, "instance")
    if doc["version"] != FORMAT_VERSION:
        raise InstanceParseError(f"instance.version: unsupported {doc['version']!r}")
    n_users = _int(doc, "n_users", "instance")
    n_units = _int(doc, "n_units", "instance")
    for key in ("units", "users", "edges"):
        if not isinstance(doc[key], list):
            raise InstanceParseError(f"instance.{key}: expected a list")
    if len(doc["units"]) != n_units:
        raise InstanceParseError(f"instance.units: expected {n_units} entries")
    if len(doc["users"]) != n_users:
        raise InstanceParseError(f"instance.users: expected {n_users} entries")

    unit_xy = np.zeros((n_units, 2))
    capacity = np.zeros(n_units, dtype=np.int64)
    cost = np.zeros(n_units)
    for i, rec in enumerate(doc["units"]):
        where = f"units[{i}]"
        _check_keys(rec, _UNIT_KEYS, where)
        s = _int(rec, "id", where)
        if s != i:
            raise InstanceParseError(f"{where}.id: expected {i}, got {s}")
        unit_xy[s] = _real(rec, "x", where), _real(rec, "y", where)
        capacity[s] = _int(rec, "capacity", where)
        cost[s] = _real(rec, "cost", where)

    user_xy = np.zeros((n_users, 2))
    p = np.zeros(n_users)
    for i, rec in enumerate(doc["users"]):
        where = f"users[{i}]"
        _check_keys(rec, _USER_KEYS, where)
        u = _int(rec, "id", where)
        if u != i:
            raise InstanceParseError(f"{where}.id: expected {i}, got {u}")
        user_xy[u] = _real(rec, "x", where), _real(rec, "y", where)
        p[u] = _real(rec, "p", where)

    eu, es, wus, wsu = [], [], [], []
    for i, rec in enumerate(doc["edges"]):
        where = f"edges[{i}]"
        _check_keys(rec, _EDGE_KEYS, where)
        u, s = _int(rec, "u", where), _int(rec, "s", where)
        if not (0 <= u < n_users and 0 <= s < n_units):
            raise InstanceParseError(f"{where}: endpoint ({u}, {s}) out of range")
        eu.append(u)
        es.append(s)
        wus.append(_int(rec, "w_us", where))
        wsu.append(_int(rec, "w_su", where))

    return Instance(
        n_users=n_users, n_units=n_units,
        edge_user=np.array(eu, dtype=np.int64), edge_unit=np.array(es, dtype=np.int64),
        w_us=np.array(wus, dtype=np.int64), w_su=np.array(wsu, dtype=np.int64),
        capacity=capacity, cost=cost, p=p,
        omega=_real(doc, "omega", "instance"), alpha=_real(doc, "alpha", "instance"),
        w_max=_int(doc, "w_max", "instance"),
        user_xy=user_xy, unit_xy=unit_xy,
    )


def loads_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(doc)


def load_instance(path) -> Instance:
    try:
        return loads_instance(Path(path).read_text())
    except InstanceParseError as exc:
        raise InstanceParseError(f"{path}: {exc}") from exc
