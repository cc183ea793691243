"""Rectangular-pulse design for the coupler-driven CZ gate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    LABELS,
    DeviceParams,
    RectPulse,
    extract_blocks,
    rwa_blocks,
    subspace_frequencies,
)
from .units import ghz, mhz, to_ghz, to_mhz, wrap_phase

__all__ = [
    "TransitionSet",
    "GateReport",
    "PulseDesign",
    "MEASURED",
    "CZ_DIAG",
    "average_gate_fidelity",
    "report_from_blocks",
    "report_from_propagator",
    "computational_block",
    "gate_report",
    "symmetric_pulse",
    "optimize_pulse",
    "quarter_point_drive",
]

CZ_DIAG = np.array([1.0, 1.0, 1.0, -1.0])


@dataclass(frozen=True)
class TransitionSet:
    """Coupler transition frequencies per computational state (rad/ns).

    Measured sets are free to violate the sum rule ``w00 + w11 = w01 + w10``.
    """

    w00: float
    w01: float
    w10: float
    w11: float
    sigmas: tuple | None = None

    def __post_init__(self):
        if min(self.w00, self.w01, self.w10, self.w11) <= 0:
            raise ValueError("transition frequencies must be positive")
        if self.sigmas is not None and len(self.sigmas) != 4:
            raise ValueError("sigmas must hold four standard errors (00, 01, 10, 11)")

    @property
    def omegas(self) -> np.ndarray:
        return np.array([self.w00, self.w01, self.w10, self.w11])

    @classmethod
    def from_omegas(cls, omegas, sigmas=None) -> "TransitionSet":
        w = [float(x) for x in omegas]
        return cls(*w, sigmas=None if sigmas is None else tuple(float(s) for s in sigmas))

    @classmethod
    def from_device(cls, params: DeviceParams) -> "TransitionSet":
        return cls.from_omegas(subspace_frequencies(params))

    @classmethod
    def from_lab_units(cls, w00_ghz, w01_ghz, w10_ghz, w11_ghz, sigmas_mhz=None) -> "TransitionSet":
        sig = None if sigmas_mhz is None else tuple(mhz(s) for s in sigmas_mhz)
        return cls(ghz(w00_ghz), ghz(w01_ghz), ghz(w10_ghz), ghz(w11_ghz), sigmas=sig)

    def to_lab_units(self) -> dict:
        out = {f"w{lab}_ghz": to_ghz(w) for lab, w in zip(LABELS, self.omegas)}
        if self.sigmas is not None:
            out.update({f"sigma{lab}_mhz": to_mhz(s) for lab, s in zip(LABELS, self.sigmas)})
        return out

    @property
    def sum_rule_defect(self) -> float:
        return self.w01 + self.w10 - self.w00 - self.w11


# Measured coupler transitions of the two-qubit device (GHz, MHz errors).
MEASURED = TransitionSet.from_lab_units(
    w00_ghz=3.4098, w01_ghz=3.43605, w10_ghz=3.44009, w11_ghz=3.4660,
    sigmas_mhz=(0.1, 0.08, 0.07, 0.2),
)


@dataclass(frozen=True)
class GateReport:
    phases: tuple
    cond_phase: float
    residual_pop: tuple
    fidelity: float
    local_z: tuple

    def to_dict(self) -> dict:
        return {
            "phases_rad": dict(zip((f"phi{lab}" for lab in LABELS), self.phases)),
            "cond_phase_rad": self.cond_phase,
            "cond_phase_over_pi": self.cond_phase / math.pi,
            "residual_pop": dict(zip((str(lab) for lab in LABELS), self.residual_pop)),
            "fidelity": self.fidelity,
            "local_z_rad": list(self.local_z),
        }


@dataclass(frozen=True)
class PulseDesign:
    pulse: RectPulse
    predicted: GateReport
    method: str
    converged: bool = True
    alternatives: tuple = field(default=())
    history: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        p = self.pulse
        out = {
            "method": self.method,
            "converged": self.converged,
            "pulse": {
                "drive_freq_ghz": to_ghz(p.omega_d),
                "amp_mhz": to_mhz(p.amp),
                "tau_ns": p.tau,
                "carrier_phase_rad": p.carrier_phase,
            },
            "predicted": self.predicted.to_dict(),
            "alternatives": [alt.to_dict() for alt in self.alternatives],
        }
        if self.history:
            out["history"] = [
                {"step": h.kind, "amp_mhz": to_mhz(h.pulse.amp), "drive_freq_ghz": to_ghz(h.pulse.omega_d),
                 "tau_ns": h.pulse.tau, **h.detail}
                for h in self.history
            ]
        return out


def average_gate_fidelity(m: np.ndarray, target: np.ndarray) -> float:
    """Average gate fidelity of a possibly sub-unitary ``m`` against unitary ``target``.

    ``F = (Tr(M^dag M) + |Tr(V^dag M)|^2) / (D (D + 1))``; leakage out of the
    computational space lowers ``Tr(M^dag M)`` below ``D``.
    """
    m = np.asarray(m)
    target = np.asarray(target)
    if m.ndim == 1:
        m, target = np.diag(m), np.diag(target)
    d = m.shape[0]
    tr_mm = np.real(np.trace(m.conj().T @ m))
    overlap = abs(np.trace(target.conj().T @ m)) ** 2
    return float((tr_mm + overlap) / (d * (d + 1)))


def report_from_blocks(blocks: np.ndarray) -> GateReport:
    """Gate metrics from the four coupler blocks (ordered 00, 01, 10, 11)."""
    g = blocks[:, 0, 0]
    phases = np.angle(g)
    residual = np.abs(blocks[:, 1, 0]) ** 2
    p00, p01, p10, p11 = phases
    theta = wrap_phase(p00 - p10 - p01 + p11)
    # single-qubit Z corrections aligning 01 and 10 with 00
    a, b = wrap_phase(p00 - p10), wrap_phase(p00 - p01)
    corrected = g * np.exp(1j * np.array([0.0, b, a, a + b]))
    fid = average_gate_fidelity(corrected, CZ_DIAG)
    return GateReport(
        phases=tuple(float(x) for x in phases),
        cond_phase=float(theta),
        residual_pop=tuple(float(min(max(x, 0.0), 1.0)) for x in residual),
        fidelity=float(min(max(fid, 0.0), 1.0)),
        local_z=(float(a), float(b)),
    )


def _cz_fidelity(omegas, omega_d, amp, tau):
    """Same number as ``report_from_blocks(...).fidelity``, without the bookkeeping."""
    delta = omega_d - omegas
    omega_r = np.hypot(delta, amp)
    half = omega_r * tau / 2
    s = np.where(omega_r > 0, np.sin(half) / np.where(omega_r > 0, omega_r, 1.0), tau / 2)
    g = np.cos(half) + 1j * delta * s
    r = np.abs(g)
    ph = np.angle(g)
    theta = ph[0] - ph[1] - ph[2] + ph[3]
    overlap = abs(r[0] + r[1] + r[2] - r[3] * np.exp(1j * theta)) ** 2
    return float((np.dot(r, r) + overlap) / 20)


def report_from_propagator(u: np.ndarray) -> GateReport:
    return report_from_blocks(extract_blocks(u))


def _omegas_of(source):
    if isinstance(source, DeviceParams):
        return subspace_frequencies(source), source.zeta12
    if isinstance(source, TransitionSet):
        return source.omegas, 0.0
    return np.asarray(source, dtype=float), 0.0


def gate_report(source, pulse: RectPulse) -> GateReport:
    """Evaluate a pulse under the RWA model.

    ``source`` is a :class:`DeviceParams`, a :class:`TransitionSet` or an
    array ``[w00, w01, w10, w11]`` in rad/ns.
    """
    omegas, zeta12 = _omegas_of(source)
    return report_from_blocks(rwa_blocks(omegas, pulse, zeta12))


def computational_block(source, pulse: RectPulse, local_z: bool = True) -> np.ndarray:
    """4x4 gate on the computational states (coupler in and out of its ground state).

    With ``local_z`` the single-qubit Z corrections of the gate report are
    applied. The matrix is sub-unitary when the coupler keeps population.
    """
    omegas, zeta12 = _omegas_of(source)
    g = rwa_blocks(omegas, pulse, zeta12)[:, 0, 0]
    if local_z:
        a, b = report_from_blocks(rwa_blocks(omegas, pulse, zeta12)).local_z
        g = g * np.exp(1j * np.array([0.0, b, a, a + b]))
    return np.diag(g)


def _closed_form(omega_d, splitting):
    amp = math.sqrt(5 / 12) * splitting
    tau = math.sqrt(6) * math.pi / splitting
    return RectPulse(omega_d=omega_d, amp=amp, tau=tau)


def symmetric_pulse(transitions: TransitionSet) -> PulseDesign:
    """Closed-form CZ pulse, exact when ``w10 = w01 = (w00 + w11) / 2``.

    One full Rabi cycle in the 00, 01 and 10 subspaces and two in 11.
    """
    splitting = transitions.w10 - transitions.w00
    if splitting <= 0:
        raise ValueError(f"w10 - w00 must be positive, got {to_mhz(splitting):.6g} MHz")
    pulse = _closed_form((transitions.w10 + transitions.w00) / 2, splitting)
    return PulseDesign(pulse, gate_report(transitions, pulse), "closed-form")


def quarter_point_drive(transitions: TransitionSet) -> float:
    """Drive at ``(w11 + 3 w00) / 4``, the operating point used for mismatched devices."""
    return (transitions.w11 + 3 * transitions.w00) / 4


def pattern_search(func, x0, scales, step=0.05, floor=1e-8, max_evals=20000):
    """Maximise ``func`` by compass search.

    Polls ``x +- step * scale`` along each coordinate, moves to the best
    strict improvement, halves the step otherwise. Stops once the relative
    step drops below ``floor``.

    Returns ``(x_best, f_best, n_evals)``.
    """
    x = np.array(x0, dtype=float)
    scales = np.asarray(scales, dtype=float)
    fx = func(x)
    evals = 1
    while step >= floor and evals < max_evals:
        best_x, best_f = None, fx
        for i in range(len(x)):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[i] += sign * step * scales[i]
                ft = func(trial)
                evals += 1
                if ft > best_f:
                    best_x, best_f = trial, ft
        if best_x is None:
            step *= 0.5
        else:
            # keep stepping in the same direction while it pays off
            direction = best_x - x
            x, fx = best_x, best_f
            while evals < max_evals:
                trial = x + direction
                ft = func(trial)
                evals += 1
                if ft > fx:
                    x, fx = trial, ft
                else:
                    break
    return x, fx, evals


def optimize_pulse(transitions: TransitionSet, fixed_drive_freq: float | None = None) -> PulseDesign:
    """Maximise the CZ fidelity over the rectangular-pulse parameters.

    With ``fixed_drive_freq`` only amplitude and duration are optimised;
    otherwise the drive frequency is free as well. The search is seeded at the
    closed-form symmetric solution.

    If the optimum does not beat the closed-form baseline the better of the
    two is returned with ``converged=False`` and the other kept in
    ``alternatives``.
    """
    baseline = symmetric_pulse(transitions)
    omegas = transitions.omegas
    splitting = transitions.w10 - transitions.w00

    def fidelity(pulse_args):
        omega_d, amp, tau = pulse_args
        if amp < 0 or tau <= 0:
            return -np.inf
        return _cz_fidelity(omegas, omega_d, amp, tau)

    if fixed_drive_freq is not None:
        wd = float(fixed_drive_freq)
        splits = [splitting, transitions.w01 - transitions.w00, 2 * abs(wd - transitions.w00)]
        seeds = []
        for s in splits:
            if s > 0 and not any(abs(s - t) <= 1e-12 * abs(s) for t in seeds):
                seeds.append(s)
        best = None
        for s in seeds:
            seed = _closed_form(wd, s)
            x, f, _ = pattern_search(
                lambda v: fidelity((wd, v[0], v[1])),
                [seed.amp, seed.tau],
                scales=[seed.amp, seed.tau],
            )
            if best is None or f > best[1]:
                best = (x, f)
        pulse = RectPulse(wd, float(best[0][0]), float(best[0][1]))
    else:
        seed = baseline.pulse
        x, f, _ = pattern_search(
            fidelity,
            [seed.omega_d, seed.amp, seed.tau],
            scales=[splitting, seed.amp, seed.tau],
        )
        pulse = RectPulse(float(x[0]), float(x[1]), float(x[2]))

    design = PulseDesign(pulse, gate_report(transitions, pulse), "optimized")
    if design.predicted.fidelity + 1e-12 < baseline.predicted.fidelity:
        return PulseDesign(baseline.pulse, baseline.predicted, "closed-form", converged=False, alternatives=(design,))
    return design
