"""Unit conversions.

Everything inside the package works with angular frequencies in rad/ns and
times in ns. Files and printed summaries use GHz / MHz / ns.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def ghz(value):
    """GHz -> rad/ns."""
    return TWO_PI * np.asarray(value, dtype=float) if np.ndim(value) else TWO_PI * float(value)


def mhz(value):
    """MHz -> rad/ns."""
    return ghz(value) * 1e-3


def to_ghz(omega):
    """rad/ns -> GHz."""
    return omega / TWO_PI


def to_mhz(omega):
    """rad/ns -> MHz."""
    return omega / TWO_PI * 1e3


def wrap_phase(phi):
    """Wrap angles into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), TWO_PI)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def phase_distance(a, b):
    """Absolute wrapped difference between two angles, in [0, pi]."""
    return abs(wrap_phase(np.asarray(a) - np.asarray(b)))
