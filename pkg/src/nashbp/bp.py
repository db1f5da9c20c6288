"""Belief propagation over the edge-label factor graph.

Two entry points:

``run_fixed_t``
    equilibrium averages at a known presence pattern ``t``;
``run_mirror``
    the joint average over equilibria and presence, where per-user
    presence messages ``nu``/``nu_hat`` are tuned so that each user's
    presence marginal matches ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .instance import Instance


class DegenerateMessageError(ArithmeticError):
    """A factor produced an all-zero message (contradictory constraints)."""

    def __init__(self, kind: str, index: int, iteration: int | None = None):
        self.kind = kind
        self.index = index
        self.iteration = iteration
        where = f" at iteration {iteration}" if iteration is not None else ""
        super().__init__(f"all-zero message from {kind} {index}{where}")


@dataclass(frozen=True)
class BPParams:
    damping: float = 0.5
    tol: float = 1e-8
    max_iters: int = 10_000
    floor: float = 1e-12
    seed: int = 0
    schedule: str = "sequential"

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if not self.tol > 0 or not self.floor > 0:
            raise ValueError("tol and floor must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.schedule not in ("random", "sequential"):
            raise ValueError(f"unknown schedule {self.schedule!r}")


@dataclass
class MessageSet:
    mu: np.ndarray       # unit -> user, (E, 3)
    mu_hat: np.ndarray   # user -> unit, (E, 3)
    nu: np.ndarray       # presence prior side, (U, 2)
    nu_hat: np.ndarray   # user factor -> presence, (U, 2)

    @classmethod
    def uniform(cls, inst: Instance, nu: np.ndarray) -> "MessageSet":
        E, U = inst.n_edges, inst.n_users
        return cls(np.full((E, 3), 1 / 3), np.full((E, 3), 1 / 3),
                   np.ascontiguousarray(nu, dtype=np.float64), np.full((U, 2), 0.5))

    def copy(self) -> "MessageSet":
        return MessageSet(self.mu.copy(), self.mu_hat.copy(), self.nu.copy(), self.nu_hat.copy())


@dataclass(frozen=True)
class ConvergenceReport:
    iterations: int
    residual: float
    converged: bool
    n_floored: int = 0

    def as_dict(self) -> dict:
        return {"iterations": self.iterations, "residual": self.residual,
                "converged": self.converged, "n_floored": self.n_floored}


@dataclass
class Marginals:
    """Beliefs at the end of a run.

    ``edge[e]`` is the label distribution over (-1, 0, 1).  The per-user
    arrays come from the user factor's local joint: probability that every
    edge is -1, that the user is present with every edge -1, and that the
    user is present.
    """

    edge: np.ndarray
    user_disconnected: np.ndarray
    user_present_disconnected: np.ndarray
    user_present: np.ndarray
    messages: MessageSet = field(repr=False)


# ------------------------------------------------------------ single factors

def unit_factor_sweep(inst: Instance, x_s: int, s: int, mu_hat: np.ndarray) -> np.ndarray:
    """Outgoing messages of unit ``s`` to each of its edges.

    ``mu_hat`` is the full (E, 3) array of user-to-unit messages; rows of the
    result follow ``inst.edges_of_unit(s)``.
    """
    edges = inst.edges_of_unit(s)
    C = int(inst.capacity[s]) * int(x_s)
    n = len(edges)
    pre = np.empty((n + 1, C + 1, C + 1))
    suf = np.empty((n + 1, C + 1, C + 1))
    out = np.empty((n, 3))
    if not K.unit_messages(edges, inst.w_su, C, np.ascontiguousarray(mu_hat, dtype=np.float64),
                           out, pre, suf):
        raise DegenerateMessageError("unit", s)
    return out


def user_factor_sweep(inst: Instance, u: int, mu: np.ndarray, nu_u) -> tuple:
    """Outgoing messages of user ``u``.

    Returns ``(mu_hat_rows, nu_hat_u, traces)`` where rows follow
    ``inst.user_edges(u)``, ``nu_hat_u`` is normalised over t = 0, 1, and
    ``traces`` holds the local probabilities of disconnection, present
    disconnection, and presence.
    """
    lo, hi = int(inst.user_ptr[u]), int(inst.user_ptr[u + 1])
    d = hi - lo
    out = np.empty((d, 3))
    nh = np.empty(2)
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    all_off = K.user_messages(lo, hi, inst.w_us, mu, float(nu_u[0]), float(nu_u[1]), out, nh,
                              np.empty(d), np.empty(d + 1), np.empty(d + 1), np.empty((d, d)))
    zloc = nu_u[0] * nh[0] + nu_u[1] * nh[1]
    tot_rows = out.sum(axis=1)
    if not (zloc > 0) or np.any(~(tot_rows > 0)) or not (nh.sum() > 0):
        raise DegenerateMessageError("user", u)
    traces = {
        "disconnected": (nu_u[0] + nu_u[1]) * all_off / zloc,
        "present_disconnected": nu_u[1] * all_off / zloc,
        "present": nu_u[1] * nh[1] / zloc,
    }
    return out / tot_rows[:, None], nh / nh.sum(), traces


def nu_update(nu_hat_u, p_u: float, floor: float = 1e-12) -> tuple[np.ndarray, bool]:
    """Presence message making ``nu * nu_hat`` proportional to the prior.

    Returns the new message and whether the floor was hit.
    """
    prior = np.array([1.0 - p_u, p_u])
    nh = np.asarray(nu_hat_u, dtype=np.float64)
    floored = bool(np.any((prior > 0) & (nh < floor)))
    v = prior / np.maximum(nh, floor)
    return v / v.sum(), floored


# ------------------------------------------------------------------- drivers

def _run(inst: Instance, x, nu0: np.ndarray, prob: np.ndarray, mirror: bool,
         params: BPParams, init: MessageSet | None):
    x = np.asarray(x, dtype=np.int64)
    if init is None:
        msgs = MessageSet.uniform(inst, nu0)
    else:
        msgs = init.copy()
        if not mirror:
            msgs.nu = np.ascontiguousarray(nu0, dtype=np.float64)
    # start forced messages at their exact values so damping leaves no residue
    off = x[inst.edge_unit] == 0
    msgs.mu[off] = (1.0, 0.0, 0.0)
    if not mirror:
        absent = prob[inst.edge_user] == 0
        msgs.mu_hat[absent] = (0.5, 0.5, 0.0)
    cap = (inst.capacity * x).astype(np.int64)
    floored = np.zeros(inst.n_users, dtype=np.bool_)
    schedule = K.RANDOM if params.schedule == "random" else K.SEQUENTIAL
    it, res, status, where = K.run_bp(
        inst.user_ptr, inst.unit_ptr, inst.unit_edges, inst.w_su, inst.w_us, cap,
        np.ascontiguousarray(prob, dtype=np.float64),
        msgs.mu, msgs.mu_hat, msgs.nu, msgs.nu_hat, mirror,
        params.damping, params.tol, params.max_iters, params.floor,
        params.seed, schedule, floored)
    if status == K.DEGENERATE_UNIT:
        raise DegenerateMessageError("unit", int(where), int(it))
    if status == K.DEGENERATE_USER:
        raise DegenerateMessageError("user", int(where), int(it))
    report = ConvergenceReport(int(it), float(res), bool(res < params.tol), int(floored.sum()))
    return _beliefs(inst, msgs), report


def _beliefs(inst: Instance, msgs: MessageSet) -> Marginals:
    E, U = inst.n_edges, inst.n_users
    edge = np.empty((E, 3))
    disc, pdisc, pres = np.empty(U), np.empty(U), np.empty(U)
    status, where = K.beliefs(inst.user_ptr, inst.w_us, msgs.mu, msgs.mu_hat, msgs.nu,
                              edge, disc, pdisc, pres)
    if status == K.DEGENERATE_EDGE:
        raise DegenerateMessageError("edge", int(where))
    if status == K.DEGENERATE_USER:
        raise DegenerateMessageError("user", int(where))
    return Marginals(edge, disc, pdisc, pres, msgs)


def run_fixed_t(inst: Instance, x, t, params: BPParams = BPParams(),
                init: MessageSet | None = None):
    """Equilibrium-averaged marginals at presence pattern ``t``.

    Returns ``(Marginals, ConvergenceReport)``.  ``init`` warm-starts from a
    previous message set (its presence messages are replaced by ``t``).
    """
    t = np.asarray(t, dtype=np.float64)
    nu0 = np.stack([1.0 - t, t], axis=1)
    return _run(inst, x, nu0, t, False, params, init)


def run_mirror(inst: Instance, x, params: BPParams = BPParams(),
               init: MessageSet | None = None):
    """Marginals averaged over equilibria and over presence drawn from ``p``."""
    nu0 = np.stack([1.0 - inst.p, inst.p], axis=1)
    return _run(inst, x, nu0, inst.p, True, params, init)
