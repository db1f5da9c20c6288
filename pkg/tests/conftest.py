import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nashbp.instance import GeneratorParams, Instance, generate_instance

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_instance(edges, capacity, p=None, n_users=None, n_units=None, w_max=10,
                  omega=10.0, alpha=0.0, w_us=None, cost=None):
    """Hand-built instance from ``(user, unit, w_su)`` triples.

    ``w_us`` defaults to ``w_max - w_su``.
    """
    edges = list(edges)
    eu = np.array([e[0] for e in edges], dtype=np.int64)
    es = np.array([e[1] for e in edges], dtype=np.int64)
    wsu = np.array([e[2] for e in edges], dtype=np.int64)
    if n_users is None:
        n_users = int(eu.max()) + 1 if len(edges) else 0
    if n_units is None:
        n_units = len(capacity)
    wus = w_max - wsu if w_us is None else np.asarray(w_us, dtype=np.int64)
    return Instance(n_users=n_users, n_units=n_units, edge_user=eu, edge_unit=es,
                    w_us=wus, w_su=wsu, capacity=np.asarray(capacity),
                    cost=np.ones(n_units) if cost is None else np.asarray(cost, dtype=float),
                    p=np.ones(n_users) if p is None else np.asarray(p, dtype=float),
                    omega=omega, alpha=alpha, w_max=w_max)


@pytest.fixture
def two_users_one_unit():
    """Two users of weight 3 on one unit of capacity 5: only one fits."""
    return make_instance([(0, 0, 3), (1, 0, 3)], capacity=[5])


@pytest.fixture
def s1_instance():
    return generate_instance(GeneratorParams(12, 4, 2, 5, 10, 10.0, 0.0, seed=7))


def small_random_instance(seed, max_users=6, max_units=4, max_k=4):
    rng = np.random.default_rng(seed)
    U = int(rng.integers(1, max_users + 1))
    S = int(rng.integers(1, max_units + 1))
    k = int(rng.integers(1, min(S, max_k) + 1))
    c = int(rng.integers(2, 12))
    return generate_instance(GeneratorParams(U, S, k, c, 10, 10.0, 0.0, seed=int(seed)))


def random_tree_instance(seed, max_users=12):
    """Random acyclic instance: each new user links to one existing unit and
    possibly one fresh unit, so the bipartite graph stays a forest."""
    rng = np.random.default_rng(seed)
    U = int(rng.integers(1, max_users + 1))
    edges = []
    n_units = 1
    for u in range(U):
        s = int(rng.integers(0, n_units))
        edges.append((u, s, int(rng.integers(1, 11))))
        if rng.random() < 0.5:
            edges.append((u, n_units, int(rng.integers(1, 11))))
            n_units += 1
    cap = rng.integers(2, 16, size=n_units)
    p = rng.uniform(0.05, 1.0, size=U)
    return make_instance(edges, capacity=cap, p=p, n_users=U, n_units=n_units)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        passed, summary = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {summary}")
