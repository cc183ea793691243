"""Independent reference computations shared by several test files."""

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from cmacp.model import RectPulse, rwa_blocks


def conditional_phase(omegas, pulse):
    g = rwa_blocks(omegas, pulse)[:, 0, 0]
    return np.angle(g[0] * g[3] * np.conj(g[1] * g[2]))


def calibration_fixed_point(omegas, pulse, iterations=50, tol=1e-13):
    """Point where the calibration loop stops moving.

    Alternates: amplitude at which the conditional phase crosses pi (signed
    phase measured around pi), drive minimising the variance of the 00/10/01
    Rabi frequencies, and duration one mean Rabi period.
    """
    omegas = np.asarray(omegas, dtype=float)
    rabi = omegas[[0, 2, 1]]
    wd, amp, tau = pulse.omega_d, pulse.amp, pulse.tau
    for _ in range(iterations):
        def offset(a):
            return np.angle(-np.exp(1j * conditional_phase(omegas, RectPulse(wd, a, tau))))

        new_amp = brentq(offset, 0.8 * amp, 1.2 * amp, xtol=1e-15)
        spread = lambda w: np.var(np.hypot(w - rabi, new_amp))  # noqa: E731
        new_wd = minimize_scalar(spread, bounds=(rabi.min(), rabi.max()), method="bounded",
                                 options={"xatol": 1e-13}).x
        new_tau = 2 * np.pi / np.mean(np.hypot(new_wd - rabi, new_amp))
        done = abs(new_amp - amp) < tol * amp and abs(new_tau - tau) < tol * tau * 10
        wd, amp, tau = new_wd, new_amp, new_tau
        if done:
            break
    return RectPulse(wd, amp, tau)
