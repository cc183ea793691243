"""Fidelity landscape over the transition-frequency mismatches.

Every grid cell is an independent CZ design problem: the four coupler
transitions are generated from the two mismatches, the drive is fixed at
``(w11 + 3 w00) / 4`` and amplitude and duration are optimised. Cells are
written into preallocated slots by index, so the result does not depend on
the number of workers or on scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .design import MEASURED, TransitionSet, gate_report, optimize_pulse, quarter_point_drive
from .model import RectPulse
from .units import mhz, to_mhz

__all__ = ["SweepGrid", "SweepResult", "default_grid", "run_sweep", "INFIDELITY_FLOOR"]

# log10(1 - F) is clipped here so that exact gates stay finite in the output
INFIDELITY_FLOOR = 1e-16


@dataclass(frozen=True)
class SweepGrid:
    """Grid over ``|w10 - w01|`` (axis1) and ``|w11 - w00|`` (axis2), rad/ns.

    For a cell ``(d1, d2)`` the transitions are::

        w00 = ref_w00
        w11 = w00 + d2
        w10, w01 = (w00 + w11 + sum_defect) / 2 +- d1 / 2

    ``sum_defect = w01 + w10 - w00 - w11`` is zero for any device obeying the
    dispersive model, which puts the ideal gate on the whole ``d1 = 0`` row.
    """

    axis1: np.ndarray
    axis2: np.ndarray
    ref_w00: float = MEASURED.w00
    sum_defect: float = 0.0

    def __post_init__(self):
        for name in ("axis1", "axis2"):
            ax = np.asarray(getattr(self, name), dtype=float)
            if ax.ndim != 1 or ax.size < 2:
                raise ValueError(f"{name} needs at least two points")
            if np.any(np.diff(ax) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            if ax[0] < 0:
                raise ValueError(f"{name} holds absolute differences and cannot be negative")
            object.__setattr__(self, name, ax)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.axis1.size, self.axis2.size)

    def transitions(self, i: int, j: int) -> TransitionSet:
        d1, d2 = self.axis1[i], self.axis2[j]
        w00 = self.ref_w00
        w11 = w00 + d2
        centre = (w00 + w11 + self.sum_defect) / 2
        return TransitionSet(w00, centre - d1 / 2, centre + d1 / 2, w11)


def default_grid(n1=41, n2=41, axis1_max_mhz=10.0, axis2_max_mhz=80.0, anchor="model") -> SweepGrid:
    """0-10 MHz x 0-80 MHz grid.

    ``anchor="measured"`` uses the measured sum-rule defect so that the
    experimental point is exactly representable.
    """
    if anchor == "model":
        defect = 0.0
    elif anchor == "measured":
        defect = MEASURED.sum_rule_defect
    else:
        raise ValueError(f"unknown anchor {anchor!r}")
    return SweepGrid(
        axis1=mhz(np.linspace(0.0, axis1_max_mhz, n1)),
        axis2=mhz(np.linspace(0.0, axis2_max_mhz, n2)),
        sum_defect=defect,
    )


@dataclass
class SweepResult:
    grid: SweepGrid
    fidelity: np.ndarray
    log_infidelity: np.ndarray
    opt_amp: np.ndarray
    opt_tau: np.ndarray
    converged: np.ndarray
    annotations: list = field(default_factory=list)
    n_evaluated: int = 0

    def rows(self):
        """One dict per cell, in lab units, axis1-major order."""
        for i, d1 in enumerate(self.grid.axis1):
            for j, d2 in enumerate(self.grid.axis2):
                yield {
                    "axis1_mhz": to_mhz(d1),
                    "axis2_mhz": to_mhz(d2),
                    "fidelity": self.fidelity[i, j],
                    "log10_infidelity": self.log_infidelity[i, j],
                    "amp_mhz": to_mhz(self.opt_amp[i, j]),
                    "tau_ns": self.opt_tau[i, j],
                    "converged": bool(self.converged[i, j]),
                }

    def nearest_cell(self, d1: float, d2: float) -> tuple[int, int]:
        return (
            int(np.argmin(np.abs(self.grid.axis1 - d1))),
            int(np.argmin(np.abs(self.grid.axis2 - d2))),
        )


def _evaluate_cell(transitions: TransitionSet):
    drive = quarter_point_drive(transitions)
    try:
        design = optimize_pulse(transitions, drive)
    except ValueError:
        # degenerate splitting: no drive produces a conditional phase
        idle = gate_report(transitions, RectPulse(drive, 0.0, 0.0))
        return idle.fidelity, 0.0, 0.0, False
    if not design.converged:
        # the map reports the fixed-drive optimum even when the closed form beats it
        design = next(d for d in design.alternatives if d.pulse.omega_d == drive)
        return design.predicted.fidelity, design.pulse.amp, design.pulse.tau, False
    return design.predicted.fidelity, design.pulse.amp, design.pulse.tau, True


def run_sweep(grid: SweepGrid, workers: int = 1, reference: TransitionSet = MEASURED) -> SweepResult:
    """Optimise the CZ pulse in every cell of ``grid``.

    ``reference`` is the measured device marked on the map.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n1, n2 = grid.shape
    cells = [grid.transitions(i, j) for i in range(n1) for j in range(n2)]
    if workers == 1:
        outputs = [_evaluate_cell(c) for c in cells]
    else:
        chunk = max(1, math.ceil(len(cells) / (4 * workers)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_evaluate_cell, cells, chunksize=chunk))

    fid = np.empty(grid.shape)
    amp = np.empty(grid.shape)
    tau = np.empty(grid.shape)
    conv = np.empty(grid.shape, dtype=bool)
    for k, (f, a, t, c) in enumerate(outputs):
        i, j = divmod(k, n2)
        fid[i, j], amp[i, j], tau[i, j], conv[i, j] = f, a, t, c
    log_inf = np.log10(np.maximum(1.0 - fid, INFIDELITY_FLOOR))

    result = SweepResult(grid, fid, log_inf, amp, tau, conv, n_evaluated=len(outputs))
    result.annotations = _annotations(result, reference)
    return result


def _annotations(result: SweepResult, reference: TransitionSet) -> list:
    notes = []
    star = optimize_pulse(reference, quarter_point_drive(reference))
    d1 = abs(reference.w10 - reference.w01)
    d2 = abs(reference.w11 - reference.w00)
    i, j = result.nearest_cell(d1, d2)
    notes.append({
        "name": "experimental star",
        "axis1_mhz": to_mhz(d1),
        "axis2_mhz": to_mhz(d2),
        "fidelity": star.predicted.fidelity,
        "amp_mhz": to_mhz(star.pulse.amp),
        "tau_ns": star.pulse.tau,
        "nearest_cell": [i, j],
        "nearest_cell_fidelity": float(result.fidelity[i, j]),
    })
    i, j = result.nearest_cell(0.0, d2)
    notes.append({
        "name": "ideal point",
        "axis1_mhz": 0.0,
        "axis2_mhz": to_mhz(result.grid.axis2[j]),
        "nearest_cell": [i, j],
        "fidelity": float(result.fidelity[i, j]),
    })
    notes.append({
        "name": "non-converged cells",
        "count": int(np.count_nonzero(~result.converged)),
    })
    return notes
