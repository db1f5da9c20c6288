"""Scalar observables and objectives from BP marginals or exact averages."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .instance import Instance

SOURCES = ("mirror-bp", "fixed-t-bp", "exact", "sampled")


class UndefinedObservablesError(ValueError):
    """No equilibrium exists for any evaluated presence pattern."""


@dataclass(frozen=True)
class ObservableSet:
    """Expected connected workload ``W``, disconnected users ``N``, total
    satisfaction ``Osat``, and the full objective
    ``F = Osat - omega * present_disconnected - alpha * energy``.
    """

    W: float
    N: float
    Osat: float
    F: float
    energy: float
    present_disconnected: float
    source: str
    converged: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


def energy(inst: Instance, x) -> float:
    return float(np.dot(inst.cost, np.asarray(x, dtype=np.float64)))


def _assemble(inst, x, W, N, Osat, pdisc, source, converged=True):
    en = energy(inst, x)
    F = Osat - inst.omega * pdisc - inst.alpha * en
    return ObservableSet(float(W), float(N), float(Osat), float(F), en, float(pdisc),
                         source, bool(converged))


def compute_from_marginals(inst: Instance, x, marginals, source: str = "mirror-bp",
                           converged: bool = True) -> ObservableSet:
    on = marginals.edge[:, 2]
    return _assemble(
        inst, x,
        W=np.dot(on, inst.w_su),
        N=marginals.user_disconnected.sum(),
        Osat=np.dot(on, inst.w_us),
        pdisc=marginals.user_present_disconnected.sum(),
        source=source, converged=converged,
    )


def compute_exact(inst: Instance, x, result, source: str | None = None) -> ObservableSet:
    """Observables from an ``ExactResult`` (one pattern) or ``AveragedResult``.

    Raises ``UndefinedObservablesError`` when no equilibrium was found.
    """
    if not np.isfinite(result.W):
        raise UndefinedObservablesError("no Nash equilibrium for any evaluated pattern")
    if source is None:
        source = "sampled" if getattr(result, "W_se", 0.0) else "exact"
    return _assemble(inst, x, result.W, result.N, result.Osat,
                     result.present_disconnected, source)
