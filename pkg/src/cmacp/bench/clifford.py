"""Single-qubit Clifford group from two pi/2 pulses and virtual Z rotations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

__all__ = [
    "Step",
    "CliffordElement",
    "pulse90",
    "virtual_z",
    "build_clifford_group",
    "clifford_matrices",
    "multiplication_table",
    "element_index",
    "pauli_image",
    "PAULI",
]

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

_QUARTERS = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)


class Step(NamedTuple):
    """``kind`` is ``"x90"`` (pi/2 about the equatorial axis at ``angle``) or ``"vz"``."""

    kind: str
    angle: float


def pulse90(phase: float) -> np.ndarray:
    """pi/2 rotation about ``cos(phase) X + sin(phase) Y``."""
    axis = np.cos(phase) * X + np.sin(phase) * Y
    return (I2 - 1j * axis) / np.sqrt(2)


def virtual_z(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def _matrix_of(steps) -> np.ndarray:
    u = I2
    for step in steps:
        op = pulse90(step.angle) if step.kind == "x90" else virtual_z(step.angle)
        u = op @ u
    return u


def _phase_key(u: np.ndarray, decimals: int = 8) -> tuple:
    """Hashable representative of ``u`` modulo global phase."""
    flat = u.ravel()
    k = int(np.argmax(np.abs(flat) > 1e-6))
    v = flat * np.exp(-1j * np.angle(flat[k]))
    v = np.round(v, decimals) + 0.0  # drop negative zeros
    return tuple(np.concatenate([v.real, v.imag]))


@dataclass(frozen=True)
class CliffordElement:
    index: int
    decomposition: tuple
    matrix: np.ndarray

    @property
    def n_pulses(self) -> int:
        return sum(step.kind == "x90" for step in self.decomposition)


@lru_cache(maxsize=1)
def build_clifford_group() -> tuple[CliffordElement, ...]:
    """The 24 single-qubit Cliffords, each as ``x90(a1), x90(a2), vz(b)``.

    Index 0 is the identity (``x90(0)`` followed by ``x90(pi)``).
    """
    found: dict = {}
    order = [(0.0, np.pi, 0.0)] + list(itertools.product(_QUARTERS, repeat=3))
    for a1, a2, b in order:
        steps = (Step("x90", a1), Step("x90", a2), Step("vz", b))
        u = _matrix_of(steps)
        key = _phase_key(u)
        if key not in found:
            found[key] = (steps, u)
    if len(found) != 24:
        raise RuntimeError(f"expected 24 Clifford classes, found {len(found)}")
    return tuple(
        CliffordElement(i, steps, u) for i, (steps, u) in enumerate(found.values())
    )


@lru_cache(maxsize=1)
def clifford_matrices() -> np.ndarray:
    """Stacked 2x2 matrices, shape (24, 2, 2)."""
    return np.stack([c.matrix for c in build_clifford_group()])


@lru_cache(maxsize=1)
def _index_lookup() -> dict:
    return {_phase_key(c.matrix): c.index for c in build_clifford_group()}


def element_index(u: np.ndarray) -> int:
    """Group index of ``u`` (up to global phase); ``KeyError`` if not Clifford."""
    return _index_lookup()[_phase_key(np.asarray(u))]


def multiplication_table() -> np.ndarray:
    """``table[i, j]`` is the index of ``C_i @ C_j``."""
    mats = clifford_matrices()
    n = len(mats)
    table = np.empty((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            table[i, j] = element_index(mats[i] @ mats[j])
    return table


def pauli_image(u: np.ndarray, label: str) -> tuple[int, str]:
    """``u P u^dag = sign * P'``; returns ``(sign, P')`` or raises ``ValueError``."""
    conj = u @ PAULI[label] @ u.conj().T
    for name in "XYZ":
        overlap = np.trace(PAULI[name].conj().T @ conj) / 2
        if abs(abs(overlap) - 1) < 1e-9:
            if abs(overlap.imag) > 1e-9:
                break
            return int(np.sign(overlap.real)), name
    raise ValueError(f"{label} is not mapped onto a signed Pauli")
