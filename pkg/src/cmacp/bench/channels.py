"""Two-qubit channels, noise model and Pauli transfer matrices.

Channels are lists of Kraus operators acting on the 4-dimensional
computational space ordered ``|q1 q2>``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .clifford import PAULI

__all__ = [
    "PAULI_LABELS",
    "pauli_basis",
    "cphase",
    "CZ",
    "unitary_kraus",
    "depolarizing_kraus",
    "dephasing_kraus",
    "compose",
    "apply_kraus",
    "choi_matrix",
    "is_cptp",
    "NoiseModel",
    "PauliProcessMatrix",
    "ptm",
    "process_tomography",
    "ptm_fidelity",
    "effective_depolarizing",
]

PAULI_LABELS = tuple(a + b for a, b in itertools.product("IXYZ", repeat=2))


def pauli_basis() -> np.ndarray:
    """Two-qubit Paulis in the order II, IX, IY, IZ, XI, ..., ZZ; shape (16, 4, 4)."""
    return np.stack([np.kron(PAULI[a], PAULI[b]) for a, b in PAULI_LABELS])


def cphase(theta: float) -> np.ndarray:
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * theta)])


CZ = cphase(np.pi)


def unitary_kraus(u) -> list:
    return [np.asarray(u, dtype=complex)]


def depolarizing_kraus(p: float) -> list:
    """``rho -> (1 - p) rho + p I / 4``."""
    paulis = pauli_basis()
    ops = [np.sqrt(1 - 15 * p / 16) * paulis[0]]
    ops += [np.sqrt(p / 16) * P for P in paulis[1:]]
    return ops


def dephasing_kraus(q: float) -> list:
    """``rho -> (1 - q) rho + q diag(rho)``: full dephasing with probability q."""
    ops = [np.sqrt(1 - q) * np.eye(4, dtype=complex)]
    for k in range(4):
        proj = np.zeros((4, 4), dtype=complex)
        proj[k, k] = np.sqrt(q)
        ops.append(proj)
    return ops


def compose(*channels) -> list:
    """Kraus list of ``channels[-1] o ... o channels[0]`` (first applied first)."""
    out = [np.eye(4, dtype=complex)]
    for ch in channels:
        out = [k @ o for k in ch for o in out]
    return out


def apply_kraus(kraus, rho: np.ndarray) -> np.ndarray:
    """Apply a channel to one density matrix or a stack of them (..., 4, 4)."""
    return sum(k @ rho @ k.conj().T for k in kraus)


def choi_matrix(kraus) -> np.ndarray:
    """Unnormalised Choi matrix ``sum_ij |i><j| (x) E(|i><j|)``."""
    d = kraus[0].shape[1]
    choi = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            choi[i * d : (i + 1) * d, j * d : (j + 1) * d] = apply_kraus(kraus, e)
    return choi


def is_cptp(kraus, psd_tol=1e-10, tp_tol=1e-12) -> bool:
    choi = choi_matrix(kraus)
    d = kraus[0].shape[1]
    if np.min(np.linalg.eigvalsh((choi + choi.conj().T) / 2)) < -psd_tol:
        return False
    # partial trace over the output leg must be the identity
    reduced = np.einsum("iaja->ij", choi.reshape(d, d, d, d))
    return bool(np.max(np.abs(reduced - np.eye(d))) < tp_tol)


@dataclass(frozen=True)
class NoiseModel:
    """Noise for benchmarking simulations.

    depol1
        Two-qubit depolarizing probability after every layer of simultaneous
        single-qubit Cliffords.
    depol2
        Depolarizing probability after every two-qubit gate.
    phase_error
        Conditional-phase offset of the implemented gate, ``theta - pi`` for CZ.
    coupler_leak
        Probability per gate that the coupler is left excited; modelled as full
        dephasing of the computational qubits with that probability.
    """

    depol1: float = 0.0
    depol2: float = 0.0
    phase_error: float = 0.0
    coupler_leak: float = 0.0

    def __post_init__(self):
        for name in ("depol1", "depol2", "coupler_leak"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be a probability, got {value}")
        for kraus in (self.layer_kraus(), self.gate_kraus(np.eye(4))):
            if not is_cptp(kraus):
                raise ValueError("noise model does not produce a CPTP channel")

    def layer_kraus(self) -> list:
        return depolarizing_kraus(self.depol1)

    def gate_kraus(self, target) -> list:
        """Noisy implementation of the ideal two-qubit unitary ``target``."""
        actual = np.asarray(target) @ cphase(self.phase_error)
        return compose(
            unitary_kraus(actual),
            depolarizing_kraus(self.depol2),
            dephasing_kraus(self.coupler_leak),
        )

    @classmethod
    def matching_decays(cls, p1: float, p2: float, phase_error: float = 0.0, coupler_leak: float = 0.0) -> "NoiseModel":
        """Pick ``depol1``/``depol2`` so that the reference and interleaved
        decays are ``p1`` and ``p2`` given the coherent and leak errors."""
        depol1 = 1.0 - p1
        partial = cls(phase_error=phase_error, coupler_leak=coupler_leak)
        err = compose(partial.gate_kraus(CZ), unitary_kraus(CZ.conj().T))
        f_other = effective_depolarizing(ptm(err))
        depol2 = 1.0 - (p2 / p1) / f_other
        if not 0.0 <= depol2 <= 1.0:
            raise ValueError(
                f"coherent and leak errors alone give decay {f_other:.5f}; cannot reach p2/p1 = {p2 / p1:.5f}"
            )
        return cls(depol1=depol1, depol2=depol2, phase_error=phase_error, coupler_leak=coupler_leak)


@dataclass(frozen=True)
class PauliProcessMatrix:
    entries: np.ndarray
    fidelity: float | None = None
    trace_preserving: bool = True

    labels = PAULI_LABELS


def ptm(channel) -> np.ndarray:
    """Pauli transfer matrix ``R_ij = Tr(P_i E(P_j)) / 4``.

    ``channel`` is a Kraus list, a single 4x4 matrix (treated as ``M rho M^dag``)
    or a callable acting on 4x4 matrices.
    """
    if callable(channel):
        fn = channel
    else:
        kraus = [np.asarray(channel)] if np.ndim(channel) == 2 else list(channel)
        fn = lambda rho: apply_kraus(kraus, rho)  # noqa: E731
    paulis = pauli_basis()
    out = np.stack([fn(P) for P in paulis])
    r = np.einsum("iab,jba->ij", paulis, out) / 4
    return np.real_if_close(r, tol=1e6).real


def ptm_fidelity(r: np.ndarray, r_target: np.ndarray) -> float:
    """Average gate fidelity from PTMs, ``(Tr(R_t^T R) / 4 + 1) / 5``."""
    return float((np.trace(r_target.T @ r) / 4 + 1) / 5)


def effective_depolarizing(r: np.ndarray) -> float:
    """Depolarizing parameter of the twirled channel, ``(Tr R - 1) / 15``."""
    return float((np.trace(r) - 1) / 15)


def process_tomography(channel, target=CZ) -> PauliProcessMatrix:
    """Exact PTM of ``channel`` and its average fidelity against unitary ``target``.

    A non-trace-preserving input (e.g. a leaky sub-unitary block) is flagged;
    its first row then differs from ``(1, 0, ..., 0)``.
    """
    r = ptm(channel)
    first = np.zeros(16)
    first[0] = 1.0
    tp = bool(np.max(np.abs(r[0] - first)) < 1e-10)
    fid = None if target is None else ptm_fidelity(r, ptm(np.asarray(target)))
    return PauliProcessMatrix(r, fid, tp)
