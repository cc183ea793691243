"""Split the interleaved-XEB error of a CZ gate into its sources.

All errors are depolarizing-parameter errors ``1 - p``:

* ``eps_theta``: coherent conditional-phase error, from ``CPhase(theta)`` vs CZ
* ``eps_d``: decoherence during the gate, the single-qubit layer error scaled
  by the ratio of gate durations
* ``eps_o``: whatever remains of the total
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .channels import CZ, cphase
from .xeb import XebRun, fidelity_to_depolarizing, refit_target_phase

__all__ = ["ErrorBudget", "cphase_depolarizing_error", "budget_from_values", "error_budget"]

SINGLE_QUBIT_DURATION_NS = 26.6
CZ_DURATION_NS = 44.0


@dataclass(frozen=True)
class ErrorBudget:
    eps_theta: float
    eps_d: float
    eps_o: float
    eps_total: float
    theta: float
    eps_1: float

    @property
    def consistent(self) -> bool:
        """False when the named sources already exceed the measured total."""
        return self.eps_o >= 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["theta_over_pi"] = self.theta / np.pi
        out["consistent"] = self.consistent
        return out


def cphase_depolarizing_error(theta: float) -> float:
    """``1 - p`` of ``CPhase(theta)`` relative to CZ, with ``p`` from the average fidelity."""
    u = cphase(theta)
    overlap = abs(np.trace(CZ.conj().T @ u)) ** 2
    f_avg = (4 + overlap) / 20
    return 1.0 - fidelity_to_depolarizing(f_avg)


def budget_from_values(
    theta: float,
    p_ref: float,
    p_int: float,
    single_qubit_dur: float = SINGLE_QUBIT_DURATION_NS,
    cz_dur: float = CZ_DURATION_NS,
) -> ErrorBudget:
    if single_qubit_dur <= 0 or cz_dur <= 0:
        raise ValueError("durations must be positive")
    eps_total = 1.0 - p_int / p_ref
    eps_theta = cphase_depolarizing_error(theta)
    eps_1 = 1.0 - p_ref
    eps_d = eps_1 * cz_dur / single_qubit_dur
    budget = ErrorBudget(
        eps_theta=eps_theta,
        eps_d=eps_d,
        eps_o=eps_total - eps_theta - eps_d,
        eps_total=eps_total,
        theta=float(theta),
        eps_1=eps_1,
    )
    if not budget.consistent:
        warnings.warn(
            f"error budget inconsistent: phase and decoherence errors ({eps_theta + eps_d:.4g}) "
            f"exceed the measured total ({eps_total:.4g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return budget


def error_budget(
    xeb: XebRun,
    single_qubit_dur: float = SINGLE_QUBIT_DURATION_NS,
    cz_dur: float = CZ_DURATION_NS,
    thetas=None,
) -> ErrorBudget:
    """Budget of an interleaved run; the phase is refitted from the data."""
    if xeb.int_fit is None:
        raise ValueError("error budget needs an interleaved XEB run")
    theta, _, _ = refit_target_phase(xeb, thetas)
    return budget_from_values(theta, xeb.p_ref, xeb.p_int, single_qubit_dur, cz_dur)
