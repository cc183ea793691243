"""Effective model of two fluxonium qubits coupled through a driven coupler.

The coupler is dispersively coupled to both qubits, so its 0-1 transition
frequency depends on the computational state ``mn``::

    omega_mn = omega_c + (-1)**m * zeta1c / 2 + (-1)**n * zeta2c / 2

Under a rectangular drive the Hilbert space splits into four independent
two-level problems (one per computational state). Within the rotating-wave
approximation each of them has the Hamiltonian::

    H = -delta / 2 * sz + amp / 2 * (cos(phi) * sx + sin(phi) * sy)

with ``delta = omega_d - omega_mn``. The three-qubit basis is ordered as
``|m n c>`` with index ``4 m + 2 n + c``.

Phase convention
----------------
The closed-form Rabi solution used here puts ``+i delta / omega_r * sin`` on
the ground amplitude. The physically integrated lab-frame evolution of the
driven Hamiltonian has the opposite sign of every phase; the two are related
by complex conjugation in the computational basis followed by a coupler
``sz`` frame flip (``U -> sz U* sz``). :func:`labframe_propagator` applies
that map, so both propagators are directly comparable. Populations, the
magnitude of the conditional phase and all fidelities against real targets
such as CZ are unaffected by the choice.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .units import TWO_PI, ghz, mhz, to_ghz, to_mhz

__all__ = [
    "DeviceParams",
    "RectPulse",
    "Label",
    "LABELS",
    "SubspaceDetuning",
    "subspace_frequencies",
    "detunings",
    "rabi_state",
    "rabi_blocks",
    "rwa_blocks",
    "rwa_propagator",
    "labframe_propagator",
    "embed_blocks",
    "extract_blocks",
    "fit_device_params",
    "unitarity_defect",
]


class Label(NamedTuple):
    """Computational state ``|mn>`` of the two qubits."""

    m: int
    n: int

    @property
    def index(self) -> int:
        return 2 * self.m + self.n

    def __str__(self) -> str:
        return f"{self.m}{self.n}"


LABELS = (Label(0, 0), Label(0, 1), Label(1, 0), Label(1, 1))


@dataclass(frozen=True)
class DeviceParams:
    """Effective device parameters, angular frequencies in rad/ns."""

    omega1: float
    omega2: float
    omega_c: float
    zeta1c: float
    zeta2c: float
    zeta12: float = 0.0

    def __post_init__(self):
        if min(self.omega1, self.omega2, self.omega_c) <= 0:
            raise ValueError("all frequencies must be strictly positive")
        if self.omega_c <= max(self.omega1, self.omega2):
            raise ValueError("coupler must lie above both computational qubits")
        if self.zeta12 and abs(self.zeta12) >= 0.1 * min(abs(self.zeta1c), abs(self.zeta2c)):
            warnings.warn(
                "zeta12 is not small compared to the qubit-coupler couplings; "
                "the four-subspace picture becomes approximate",
                stacklevel=2,
            )

    @classmethod
    def from_lab_units(cls, omega1_ghz, omega2_ghz, omega_c_ghz, zeta1c_mhz, zeta2c_mhz, zeta12_mhz=0.0):
        return cls(
            omega1=ghz(omega1_ghz),
            omega2=ghz(omega2_ghz),
            omega_c=ghz(omega_c_ghz),
            zeta1c=mhz(zeta1c_mhz),
            zeta2c=mhz(zeta2c_mhz),
            zeta12=mhz(zeta12_mhz),
        )

    def to_lab_units(self) -> dict:
        return {
            "omega1_ghz": to_ghz(self.omega1),
            "omega2_ghz": to_ghz(self.omega2),
            "omega_c_ghz": to_ghz(self.omega_c),
            "zeta1c_mhz": to_mhz(self.zeta1c),
            "zeta2c_mhz": to_mhz(self.zeta2c),
            "zeta12_mhz": to_mhz(self.zeta12),
        }


@dataclass(frozen=True)
class RectPulse:
    """Rectangular coupler drive ``amp * sx * cos(omega_d t + carrier_phase)``."""

    omega_d: float
    amp: float
    tau: float
    carrier_phase: float = 0.0

    def __post_init__(self):
        if self.amp < 0:
            raise ValueError(f"drive amplitude must be non-negative, got {self.amp}")
        if self.tau < 0:
            raise ValueError(f"pulse duration must be non-negative, got {self.tau}")

    def replace(self, **changes) -> "RectPulse":
        fields = dict(omega_d=self.omega_d, amp=self.amp, tau=self.tau, carrier_phase=self.carrier_phase)
        fields.update(changes)
        return RectPulse(**fields)


@dataclass(frozen=True)
class SubspaceDetuning:
    label: Label
    omega_mn: float
    delta: float
    omega_r: float


def subspace_frequencies(params: DeviceParams) -> np.ndarray:
    """Coupler transition frequencies ``[w00, w01, w10, w11]`` in rad/ns."""
    out = np.empty(4)
    for lab in LABELS:
        out[lab.index] = (
            params.omega_c
            + (-1) ** lab.m * params.zeta1c / 2
            + (-1) ** lab.n * params.zeta2c / 2
        )
    return out


def detunings(omegas, pulse: RectPulse) -> list[SubspaceDetuning]:
    omegas = np.asarray(omegas, dtype=float)
    out = []
    for lab in LABELS:
        w = float(omegas[lab.index])
        delta = pulse.omega_d - w
        out.append(SubspaceDetuning(lab, w, delta, math.hypot(delta, pulse.amp)))
    return out


def rabi_state(detuning: SubspaceDetuning, amp: float, t: float) -> np.ndarray:
    """Coupler state after driving for ``t`` ns from the ground state."""
    omega_r = math.hypot(detuning.delta, amp)
    if omega_r == 0.0:
        return np.array([1.0 + 0j, 0.0 + 0j])
    s, c = math.sin(omega_r * t / 2), math.cos(omega_r * t / 2)
    return np.array([c + 1j * detuning.delta / omega_r * s, -1j * amp / omega_r * s])


def rabi_blocks(delta, amp, t, carrier_phase=0.0) -> np.ndarray:
    """Closed-form 2x2 propagators ``exp(-i H t)``, vectorised over ``delta``."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    omega_r = np.hypot(delta, amp)
    half = omega_r * t / 2
    c = np.cos(half)
    safe = np.where(omega_r > 0, omega_r, 1.0)
    # sin(x)/omega_r, with the omega_r -> 0 limit t/2
    s = np.where(omega_r > 0, np.sin(half) / safe, t / 2)
    ex = np.exp(1j * carrier_phase)
    u = np.empty(delta.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = c + 1j * delta * s
    u[..., 1, 1] = c - 1j * delta * s
    u[..., 0, 1] = -1j * amp * s * np.conj(ex)
    u[..., 1, 0] = -1j * amp * s * ex
    return u


def rwa_blocks(omegas, pulse: RectPulse, zeta12: float = 0.0) -> np.ndarray:
    """Per-subspace RWA propagators, shape (4, 2, 2), ordered 00, 01, 10, 11."""
    omegas = np.asarray(omegas, dtype=float)
    blocks = rabi_blocks(pulse.omega_d - omegas, pulse.amp, pulse.tau, pulse.carrier_phase)
    if zeta12:
        blocks = blocks * _zz_phases(zeta12, pulse.tau)[:, None, None]
    return blocks


def _zz_phases(zeta12, tau):
    signs = np.array([(-1) ** (lab.m + lab.n) for lab in LABELS], dtype=float)
    # sign follows the conjugated convention described in the module docstring
    return np.exp(-1j * zeta12 * signs * tau / 4)


def embed_blocks(blocks: np.ndarray) -> np.ndarray:
    """Assemble four coupler blocks into the 8x8 ``|m n c>`` propagator."""
    u = np.zeros((8, 8), dtype=complex)
    for k in range(4):
        u[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = blocks[k]
    return u


def extract_blocks(u: np.ndarray) -> np.ndarray:
    return np.stack([u[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] for k in range(4)])


def rwa_propagator(params: DeviceParams, pulse: RectPulse) -> np.ndarray:
    """8x8 block-diagonal propagator in the frame of the drive and the bare qubits."""
    return embed_blocks(rwa_blocks(subspace_frequencies(params), pulse, params.zeta12))


def labframe_propagator(params: DeviceParams, pulse: RectPulse, steps_per_period: int = 160) -> np.ndarray:
    """Propagator of the full time-dependent Hamiltonian, no rotating-wave approximation.

    The Schroedinger equation is integrated with a fixed-step fourth-order
    Magnus scheme in the interaction picture of the static Hamiltonian, then
    expressed in the same rotating frame and phase convention as
    :func:`rwa_propagator`.

    Parameters
    ----------
    params : DeviceParams
    pulse : RectPulse
    steps_per_period : int
        Integration steps per drive period; at least 40.

    Returns
    -------
    numpy.ndarray
        Unitary 8x8 matrix.
    """
    if steps_per_period < 40:
        raise ValueError(f"steps_per_period must be >= 40 for the accuracy contract, got {steps_per_period}")
    omegas = subspace_frequencies(params)
    tau = pulse.tau
    delta = pulse.omega_d - omegas

    if pulse.amp == 0.0 or tau == 0.0:
        u_int = np.broadcast_to(np.eye(2, dtype=complex), (4, 2, 2))
    else:
        n_steps = max(1, math.ceil(tau * pulse.omega_d / TWO_PI * steps_per_period))
        u_int = _magnus4(omegas, pulse, n_steps)

    # back to the drive frame: diag(exp(-i delta tau/2), exp(+i delta tau/2)) per block
    frame = np.zeros((4, 2, 2), dtype=complex)
    frame[:, 0, 0] = np.exp(-0.5j * delta * tau)
    frame[:, 1, 1] = np.exp(0.5j * delta * tau)
    phys = frame @ u_int
    if params.zeta12:
        phys = phys * np.conj(_zz_phases(params.zeta12, tau))[:, None, None]
    mapped = np.conj(phys)
    mapped[:, 0, 1] *= -1
    mapped[:, 1, 0] *= -1
    return embed_blocks(mapped)


def _magnus4(omegas, pulse, n_steps):
    """Interaction-picture propagators for the four blocks, shape (4, 2, 2)."""
    h = pulse.tau / n_steps
    t0 = np.arange(n_steps) * h
    g = math.sqrt(3) / 6
    t1 = t0 + h * (0.5 - g)
    t2 = t0 + h * (0.5 + g)

    def bloch(t):
        # H_I = hx sx + hy sy ; <g|H_I|e> = hx - i hy
        drive = pulse.amp * np.cos(pulse.omega_d * t + pulse.carrier_phase)
        c = drive[None, :] * np.exp(-1j * omegas[:, None] * t[None, :])
        return c.real, -c.imag

    x1, y1 = bloch(t1)
    x2, y2 = bloch(t2)
    vx = h / 2 * (x1 + x2)
    vy = h / 2 * (y1 + y2)
    vz = -math.sqrt(3) / 6 * h**2 * (x1 * y2 - y1 * x2)
    norm = np.sqrt(vx**2 + vy**2 + vz**2)
    s = np.where(norm > 0, np.sin(norm) / np.where(norm > 0, norm, 1.0), 1.0)
    c = np.cos(norm)
    steps = np.empty(norm.shape + (2, 2), dtype=complex)
    steps[..., 0, 0] = c - 1j * s * vz
    steps[..., 1, 1] = c + 1j * s * vz
    steps[..., 0, 1] = -1j * s * (vx - 1j * vy)
    steps[..., 1, 0] = -1j * s * (vx + 1j * vy)
    return _ordered_product(steps)


def _ordered_product(steps):
    """Time-ordered product U_N ... U_1 along axis 1, by pairwise reduction."""
    while steps.shape[1] > 1:
        if steps.shape[1] % 2:
            pad = np.broadcast_to(np.eye(2, dtype=complex), (steps.shape[0], 1, 2, 2))
            steps = np.concatenate([steps, pad], axis=1)
        steps = steps[:, 1::2] @ steps[:, 0::2]
    return steps[:, 0]


def fit_device_params(transitions, sigmas=None, omega1=None, omega2=None) -> DeviceParams:
    """Weighted least-squares inversion of the state-dependent coupler frequencies.

    ``transitions`` are ``[w00, w01, w10, w11]`` in rad/ns. Measured values
    need not obey the sum rule ``w00 + w11 = w01 + w10``; the returned
    parameters reproduce the closest sum-rule-consistent set.
    """
    w = np.asarray(transitions, dtype=float)
    design = np.array([[1.0, (-1) ** lab.m / 2, (-1) ** lab.n / 2] for lab in LABELS])
    weights = np.ones(4) if sigmas is None else 1.0 / np.asarray(sigmas, dtype=float)
    coef, *_ = np.linalg.lstsq(design * weights[:, None], w * weights, rcond=None)
    omega_c, z1, z2 = coef
    return DeviceParams(
        omega1=ghz(0.66964) if omega1 is None else omega1,
        omega2=ghz(0.69435) if omega2 is None else omega2,
        omega_c=float(omega_c),
        zeta1c=float(z1),
        zeta2c=float(z2),
    )


def unitarity_defect(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
