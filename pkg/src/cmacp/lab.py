"""Virtual calibration lab.

Synthetic versions of the measurements used to tune up the CZ gate:

* coupler Rabi chevrons for a fixed computational state, fitted column by
  column and then with the hyperbola ``sqrt(amp**2 + (w_d - w_mn)**2)``
* the conditional-phase experiment (second qubit in superposition, first in
  ``|0>`` or ``|1>``, phase sweep on the second qubit before an X-basis
  readout)
* the closed loop alternating amplitude and drive-frequency/duration updates

Readout is abstracted to ``p_meas = (1 - c) / 2 + c p_true`` with contrast
``c``, followed by binomial sampling of ``shots`` repetitions and optional
additive Gaussian noise. ``shots=None`` is the infinite-statistics limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit, minimize_scalar

from .design import PulseDesign, TransitionSet, gate_report
from .errors import FitError
from .model import LABELS, Label, RectPulse, rwa_blocks
from .units import TWO_PI, mhz, to_ghz, to_mhz, wrap_phase

__all__ = [
    "ChevronDataset",
    "ColumnFit",
    "ChevronFit",
    "ChevronProtocol",
    "PhaseCalibration",
    "RefineStep",
    "synthesize_chevron",
    "fit_chevron",
    "calibrate_phase",
    "calibrate_amplitude",
    "refine_gate",
    "phase_populations",
    "QUBIT1_CONTRAST",
    "QUBIT2_CONTRAST",
]

# readout visibilities 2F - 1 for assignment fidelities 0.67 and 0.62
QUBIT1_CONTRAST = 0.34
QUBIT2_CONTRAST = 0.24

# refine_gate measures only these; the 11 chevron is too faint to use
RABI_LABELS = (Label(0, 0), Label(1, 0), Label(0, 1))


def _as_label(label) -> Label:
    if isinstance(label, Label):
        return label
    if isinstance(label, str):
        if len(label) != 2 or any(ch not in "01" for ch in label):
            raise ValueError(f"label must be one of 00, 01, 10, 11, got {label!r}")
        return Label(int(label[0]), int(label[1]))
    if isinstance(label, (int, np.integer)) and 0 <= label < 4:
        return LABELS[int(label)]
    m, n = label
    return Label(int(m), int(n))


def _spawn(seed, n):
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return base.spawn(n)


def _measure(p_true, contrast, shots, noise_sigma, rng):
    p = (1 - contrast) / 2 + contrast * np.asarray(p_true, dtype=float)
    p = np.clip(p, 0.0, 1.0)
    if shots is not None:
        p = rng.binomial(int(shots), p) / shots
    if noise_sigma:
        p = np.clip(p + rng.normal(0.0, noise_sigma, size=p.shape), 0.0, 1.0)
    return p


@dataclass(frozen=True)
class ChevronDataset:
    """Excited-coupler population, shape ``(len(times), len(freqs))``."""

    label: Label
    times: np.ndarray
    freqs: np.ndarray
    population: np.ndarray
    amp: float
    noise_sigma: float = 0.0
    shots: int | None = None
    contrast: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        pop = np.asarray(self.population)
        if pop.shape != (np.size(self.times), np.size(self.freqs)):
            raise ValueError(f"population shape {pop.shape} does not match the grids")
        if np.any(pop < 0) or np.any(pop > 1):
            raise ValueError("population must lie in [0, 1]")

    def rows(self):
        """Long-format rows ``(t_ns, f_ghz, population)``, time-major."""
        for i, t in enumerate(self.times):
            for j, f in enumerate(self.freqs):
                yield {"t_ns": float(t), "f_ghz": float(to_ghz(f)), "population": float(self.population[i, j])}

    def metadata(self) -> dict:
        return {
            "label": str(self.label),
            "amp_mhz": float(to_mhz(self.amp)),
            "shots": self.shots,
            "seed": self.seed,
            "contrast": self.contrast,
            "noise_sigma": self.noise_sigma,
        }

    @classmethod
    def from_rows(cls, rows, metadata: dict) -> "ChevronDataset":
        t = np.array([float(r["t_ns"]) for r in rows])
        f = np.array([float(r["f_ghz"]) for r in rows])
        p = np.array([float(r["population"]) for r in rows])
        times, ti = np.unique(t, return_inverse=True)
        freqs, fi = np.unique(f, return_inverse=True)
        if times.size * freqs.size != p.size:
            raise ValueError("chevron rows do not form a complete time x frequency grid")
        pop = np.full((times.size, freqs.size), np.nan)
        pop[ti, fi] = p
        if np.isnan(pop).any():
            raise ValueError("chevron rows contain duplicate grid points")
        return cls(
            label=_as_label(metadata["label"]),
            times=times,
            freqs=TWO_PI * freqs,
            population=pop,
            amp=mhz(float(metadata.get("amp_mhz", 0.0))),
            noise_sigma=float(metadata.get("noise_sigma", 0.0)),
            shots=metadata.get("shots"),
            contrast=float(metadata.get("contrast", 1.0)),
            seed=metadata.get("seed"),
        )


def synthesize_chevron(
    transitions: TransitionSet,
    label,
    amp: float,
    times,
    freqs,
    noise_sigma: float = 0.0,
    shots: int | None = None,
    seed: int | None = 0,
    contrast: float = 1.0,
) -> ChevronDataset:
    """Rabi chevron of the coupler with the qubits in state ``label``.

    ``freqs`` are drive frequencies in rad/ns, ``times`` pulse lengths in ns.
    """
    label = _as_label(label)
    times = np.asarray(times, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    if times.size == 0 or freqs.size == 0:
        raise ValueError("time and frequency grids must be non-empty")
    if shots is not None and shots < 1:
        raise ValueError("shots must be >= 1")
    if not 0 < contrast <= 1:
        raise ValueError("contrast must lie in (0, 1]")
    delta = freqs[None, :] - transitions.omegas[label.index]
    omega_r = np.hypot(delta, amp)
    safe = np.where(omega_r > 0, omega_r, 1.0)
    p_true = np.where(omega_r > 0, (amp / safe) ** 2 * np.sin(omega_r * times[:, None] / 2) ** 2, 0.0)
    rng = np.random.default_rng(seed)
    pop = _measure(p_true, contrast, shots, noise_sigma, rng)
    return ChevronDataset(label, times, freqs, pop, amp, noise_sigma, shots, contrast, seed)


@dataclass(frozen=True)
class ChevronProtocol:
    """Measurement settings at the scale of the real calibration data.

    Frequency span and spacing are in MHz, times in ns.
    """

    amp_mhz: float = 8.0
    span_mhz: float = 12.0
    n_freqs: int = 25
    t_max: float = 400.0
    n_times: int = 101
    shots: int | None = 100
    contrast: float = QUBIT1_CONTRAST
    noise_sigma: float = 0.0

    def grids(self, center: float):
        freqs = center + mhz(np.linspace(-self.span_mhz, self.span_mhz, self.n_freqs))
        times = np.linspace(0.0, self.t_max, self.n_times)
        return times, freqs

    def run(self, transitions: TransitionSet, label, center: float | None = None, amp: float | None = None, seed=0):
        label = _as_label(label)
        if center is None:
            center = transitions.omegas[label.index]
        times, freqs = self.grids(center)
        return synthesize_chevron(
            transitions,
            label,
            mhz(self.amp_mhz) if amp is None else amp,
            times,
            freqs,
            noise_sigma=self.noise_sigma,
            shots=self.shots,
            seed=seed,
            contrast=self.contrast,
        )


@dataclass(frozen=True)
class ColumnFit:
    freq: float
    omega_r: float
    sigma: float
    visibility: float
    usable: bool
    reason: str = ""


@dataclass(frozen=True)
class ChevronFit:
    omega_mn: float
    amp: float
    sigma_omega: float
    sigma_amp: float
    residual_norm: float
    columns: tuple = field(default=(), repr=False)

    @property
    def excluded(self) -> list:
        return [c.freq for c in self.columns if not c.usable]

    def rabi_frequency(self, omega_d):
        return np.hypot(omega_d - self.omega_mn, self.amp)

    def to_dict(self) -> dict:
        return {
            "omega_mn_ghz": float(to_ghz(self.omega_mn)),
            "amp_mhz": float(to_mhz(self.amp)),
            "sigma_omega_mhz": float(to_mhz(self.sigma_omega)),
            "sigma_amp_mhz": float(to_mhz(self.sigma_amp)),
            "residual_norm": self.residual_norm,
            "excluded_columns_ghz": [float(to_ghz(f)) for f in self.excluded],
        }


def _damped_cosine(t, offset, a, b, gamma, w):
    env = np.exp(-gamma * t)
    return offset + env * (a * np.cos(w * t) + b * np.sin(w * t))


def _fft_peak(t, y):
    """Angular frequency of the strongest non-DC Fourier component."""
    dt = t[1] - t[0]
    n = 8 * t.size
    spec = np.abs(np.fft.rfft(y - y.mean(), n=n))
    spec[0] = 0.0
    k = int(np.argmax(spec))
    if 0 < k < spec.size - 1:
        # parabolic interpolation of the peak
        lo, mid, hi = spec[k - 1], spec[k], spec[k + 1]
        denom = lo - 2 * mid + hi
        k = k + (0.5 * (lo - hi) / denom if denom != 0 else 0.0)
    return TWO_PI * k / (n * dt), float(spec.max())


def _fit_column(t, y, freq, min_significance):
    """Rabi frequency of one chevron column."""
    if np.ptp(y) == 0:
        return ColumnFit(freq, math.nan, math.nan, 0.0, False, "flat column")
    w0, _ = _fft_peak(t, y)
    if w0 <= 0:
        return ColumnFit(freq, math.nan, math.nan, 0.0, False, "no spectral peak")
    c, s = np.cos(w0 * t), np.sin(w0 * t)
    design = np.column_stack([np.ones_like(t), c, s])
    lin, *_ = np.linalg.lstsq(design, y, rcond=None)
    p0 = [lin[0], lin[1], lin[2], 0.0, w0]
    span = t[-1] - t[0]
    try:
        popt, pcov = curve_fit(
            _damped_cosine, t, y, p0=p0,
            bounds=([-np.inf, -np.inf, -np.inf, 0.0, 0.0], [np.inf, np.inf, np.inf, np.inf, np.inf]),
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
        )
    except (RuntimeError, ValueError) as exc:
        return ColumnFit(freq, math.nan, math.nan, 0.0, False, f"fit failed: {exc}")
    _, a, b, gamma, w = popt
    err = np.sqrt(np.clip(np.diag(pcov), 0.0, None)) if np.all(np.isfinite(pcov)) else np.full(5, np.inf)
    vis = math.hypot(a, b)
    vis_err = math.hypot(err[1], err[2])
    if w * span < TWO_PI:
        return ColumnFit(freq, w, err[4], vis, False, "less than one period in the time window")
    if gamma * span > 3.0:
        return ColumnFit(freq, w, err[4], vis, False, "oscillation decays within the window")
    if vis_err > 0 and vis < min_significance * vis_err:
        return ColumnFit(freq, w, err[4], vis, False, "oscillation not significant")
    if not np.isfinite(err[4]):
        return ColumnFit(freq, w, err[4], vis, False, "singular covariance")
    return ColumnFit(freq, float(w), float(err[4]), float(vis), True)


def _hyperbola(f, omega_mn, amp):
    return np.sqrt(amp**2 + (f - omega_mn) ** 2)


def fit_chevron(data: ChevronDataset, method: str = "fit", min_columns: int = 5, min_significance: float = 5.0) -> ChevronFit:
    """Recover the transition frequency and drive strength from a chevron.

    Stage one extracts the Rabi frequency of every column (damped-cosine
    least squares seeded by the FFT peak, or the FFT peak alone with
    ``method="fft"``). Columns without a clear oscillation are excluded and
    flagged. Stage two fits the hyperbola to the usable columns, weighted by
    their standard errors; the reported errors come from its covariance.
    """
    if method not in ("fit", "fft"):
        raise ValueError(f"unknown method {method!r}")
    t = np.asarray(data.times, dtype=float)
    if t.size < 8:
        raise FitError("need at least 8 time points per column")
    columns = []
    for j, f in enumerate(data.freqs):
        y = data.population[:, j]
        if method == "fit":
            columns.append(_fit_column(t, y, float(f), min_significance))
        else:
            w, peak = _fft_peak(t, y)
            ok = peak > 0 and w * (t[-1] - t[0]) >= TWO_PI
            columns.append(ColumnFit(float(f), w, math.nan, peak, ok, "" if ok else "no spectral peak"))
    usable = [c for c in columns if c.usable]
    if len(usable) < min_columns:
        raise FitError(
            f"only {len(usable)} usable columns, need {min_columns}",
            {"columns": [(to_ghz(c.freq), c.reason) for c in columns]},
        )
    f = np.array([c.freq for c in usable])
    w = np.array([c.omega_r for c in usable])
    sig = np.array([c.sigma for c in usable])
    weighted = method == "fit" and np.all(sig > 0) and np.all(np.isfinite(sig))
    k = int(np.argmin(w))
    try:
        popt, pcov = curve_fit(
            _hyperbola, f, w, p0=[f[k], w[k]],
            sigma=sig if weighted else None,
            absolute_sigma=False,
            xtol=1e-15, ftol=1e-15, gtol=1e-15, maxfev=10000,
        )
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"hyperbola fit failed: {exc}", {"freqs": f.tolist(), "omega_r": w.tolist()}) from exc
    omega_mn, amp = float(popt[0]), abs(float(popt[1]))
    err = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    resid = (w - _hyperbola(f, *popt)) / (sig if weighted else 1.0)
    return ChevronFit(
        omega_mn=omega_mn,
        amp=amp,
        sigma_omega=float(err[0]),
        sigma_amp=float(err[1]),
        residual_norm=float(np.sqrt(np.mean(resid**2))),
        columns=tuple(columns),
    )


# conditional-phase experiment

@dataclass(frozen=True)
class PhaseCalibration:
    """Conditional-phase measurement, optionally over an amplitude sweep.

    For a single measurement ``amplitudes`` holds one entry and
    ``target_amp`` is None. For a sweep, ``theta`` and ``phi2`` refer to the
    point closest to the crossing and ``target_amp`` is where the linear fit
    of ``theta_per_amp`` crosses pi.
    """

    phi2: float
    theta: float
    sigma_theta: float
    phis: np.ndarray = field(repr=False)
    p_i: np.ndarray = field(repr=False)
    p_x: np.ndarray = field(repr=False)
    amplitudes: tuple = ()
    theta_per_amp: tuple = ()
    sigma_per_amp: tuple = ()
    target_amp: float | None = None
    target_sigma: float | None = None
    slope: float | None = None
    linear_residual: float | None = None

    def to_dict(self) -> dict:
        out = {
            "phi2_rad": self.phi2,
            "theta_rad": self.theta,
            "theta_over_pi": self.theta / math.pi,
            "sigma_theta_rad": self.sigma_theta,
            "phis_rad": [float(x) for x in self.phis],
            "p_I": [float(x) for x in self.p_i],
            "p_X": [float(x) for x in self.p_x],
            "amplitudes_mhz": [float(to_mhz(a)) for a in self.amplitudes],
            "theta_per_amp_rad": [float(x) for x in self.theta_per_amp],
            "sigma_per_amp_rad": [float(x) for x in self.sigma_per_amp],
        }
        if self.target_amp is not None:
            out["target_amp_mhz"] = float(to_mhz(self.target_amp))
            out["target_sigma_mhz"] = float(to_mhz(self.target_sigma))
            out["slope_rad_per_mhz"] = float(self.slope / to_mhz(1.0))
            out["linear_residual_rad"] = self.linear_residual
        return out


def phase_populations(blocks: np.ndarray, phis) -> tuple[np.ndarray, np.ndarray]:
    """Probability of the ``-`` outcome of the X-basis readout of qubit 2.

    Qubit 1 starts in ``|0>`` (``p_I``) or ``|1>`` (``p_X``), qubit 2 in
    ``|+>``, the coupler in its ground state. After the gate qubit 2 is
    rotated by ``phi`` about Z. Coupler population left by the gate is traced
    out.
    """
    phis = np.asarray(phis, dtype=float)
    out = []
    for m in (0, 1):
        # amplitudes a[n, c] of |m n c> after the gate, qubit 2 started in |+>
        a = np.stack([blocks[2 * m + n][:, 0] for n in (0, 1)]) / np.sqrt(2)
        rotated = a[1][None, :] * np.exp(1j * phis)[:, None]
        minus = (a[0][None, :] - rotated) / np.sqrt(2)
        out.append(np.sum(np.abs(minus) ** 2, axis=1))
    return out[0], out[1]


def _sinusoid_phase(phis, p):
    """Fit ``c0 + a cos(phi) + b sin(phi)``; return (phi2, sigma, visibility, vis_err, rms)."""
    design = np.column_stack([np.ones_like(phis), np.cos(phis), np.sin(phis)])
    coef, *_ = np.linalg.lstsq(design, p, rcond=None)
    resid = p - design @ coef
    dof = max(phis.size - 3, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(design.T @ design)
    _, a, b = coef
    # p = 1/2 (1 - V cos(phi + phi2))  =>  a = -V/2 cos(phi2), b = V/2 sin(phi2)
    phi2 = math.atan2(b, -a)
    r2 = a * a + b * b
    var = (b * b * cov[1, 1] + a * a * cov[2, 2] - 2 * a * b * cov[1, 2]) / r2**2 if r2 > 0 else math.inf
    vis_err = math.sqrt(max(cov[1, 1] + cov[2, 2], 0.0) / 2)
    return phi2, math.sqrt(max(var, 0.0)), 2 * math.sqrt(r2), 2 * vis_err, math.sqrt(s2)


def calibrate_phase(
    transitions: TransitionSet,
    pulse: RectPulse,
    phis=None,
    shots: int | None = None,
    seed: int | None = 0,
    contrast: float = 1.0,
    noise_sigma: float = 0.0,
    zeta12: float = 0.0,
    min_significance: float = 3.0,
) -> PhaseCalibration:
    """Measure the conditional phase of ``pulse`` with the phase-sweep sequence."""
    if phis is None:
        phis = np.linspace(0.0, TWO_PI, 48, endpoint=False)
    phis = np.asarray(phis, dtype=float)
    if phis.size < 4:
        raise ValueError("need at least four phase points")
    step = np.median(np.diff(np.sort(phis)))
    if np.ptp(phis) + step < TWO_PI - 1e-9:
        raise ValueError("phase grid must span a full period")
    blocks = rwa_blocks(transitions.omegas, pulse, zeta12)
    true_i, true_x = phase_populations(blocks, phis)
    rng = np.random.default_rng(seed)
    p_i = _measure(true_i, contrast, shots, noise_sigma, rng)
    p_x = _measure(true_x, contrast, shots, noise_sigma, rng)
    phi_i, sig_i, vis_i, verr_i, _ = _sinusoid_phase(phis, p_i)
    phi_x, sig_x, vis_x, verr_x, _ = _sinusoid_phase(phis, p_x)
    for name, vis, verr in (("I", vis_i, verr_i), ("X", vis_x, verr_x)):
        flat = vis < 1e-9 if verr == 0 else vis < min_significance * verr
        if flat:
            raise FitError(
                f"{name}-branch populations show no phase dependence",
                {"visibility": vis, "visibility_error": verr},
            )
    theta = wrap_phase(phi_x - phi_i)
    return PhaseCalibration(
        phi2=phi_i,
        theta=theta,
        sigma_theta=math.hypot(sig_i, sig_x),
        phis=phis,
        p_i=p_i,
        p_x=p_x,
        amplitudes=(pulse.amp,),
        theta_per_amp=(theta,),
        sigma_per_amp=(math.hypot(sig_i, sig_x),),
    )


def calibrate_amplitude(
    transitions: TransitionSet,
    pulse: RectPulse,
    span: float = 0.10,
    n_points: int = 7,
    phis=None,
    shots: int | None = None,
    seed: int | None = 0,
    contrast: float = 1.0,
    noise_sigma: float = 0.0,
) -> PhaseCalibration:
    """Sweep the amplitude by ``+-span`` (relative) and find where theta crosses pi.

    Phases are unwrapped around pi before the straight-line fit.
    """
    if n_points < 3:
        raise ValueError("need at least three amplitudes")
    if not 0 < span < 1:
        raise ValueError("span must lie in (0, 1)")
    amps = pulse.amp * (1 + np.linspace(-span, span, n_points))
    seeds = _spawn(seed, n_points)
    cals = [
        calibrate_phase(transitions, pulse.replace(amp=float(a)), phis, shots, s, contrast, noise_sigma)
        for a, s in zip(amps, seeds)
    ]
    theta = np.array([math.pi + wrap_phase(c.theta - math.pi) for c in cals])
    sig = np.array([c.sigma_theta for c in cals])
    weights = None if np.any(sig <= 0) else 1 / sig
    if weights is None:
        slope, intercept = np.polyfit(amps, theta, 1)
        cov = np.zeros((2, 2))
    else:
        (slope, intercept), cov = np.polyfit(amps, theta, 1, w=weights, cov="unscaled")
    resid = theta - (slope * amps + intercept)
    diag = {"amplitudes_mhz": to_mhz(amps).tolist(), "theta_rad": theta.tolist()}
    if slope == 0 or not np.isfinite(slope):
        raise FitError("conditional phase does not depend on the amplitude", diag)
    # refuse slopes indistinguishable from zero
    lever = np.ptp(amps) * abs(slope)
    noise = float(np.max(sig)) if np.all(sig > 0) else 0.0
    if noise > 0 and lever < 2 * noise:
        raise FitError("amplitude sweep too narrow for the phase noise", diag)
    target = (math.pi - intercept) / slope
    # delta method for target = (pi - b) / a
    grad = np.array([-target / slope, -1.0 / slope])
    target_sigma = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    closest = cals[int(np.argmin(np.abs(amps - target)))]
    return PhaseCalibration(
        phi2=closest.phi2,
        theta=closest.theta,
        sigma_theta=closest.sigma_theta,
        phis=closest.phis,
        p_i=closest.p_i,
        p_x=closest.p_x,
        amplitudes=tuple(float(a) for a in amps),
        theta_per_amp=tuple(float(x) for x in theta),
        sigma_per_amp=tuple(float(x) for x in sig),
        target_amp=float(target),
        target_sigma=target_sigma,
        slope=float(slope),
        linear_residual=float(np.sqrt(np.mean(resid**2))),
    )


# closed loop

@dataclass(frozen=True)
class RefineStep:
    kind: str
    pulse: RectPulse
    detail: dict = field(default_factory=dict)


def _equalize_rabi(fits, lo, hi):
    """Drive frequency minimising the spread of the measured Rabi frequencies."""
    def spread(wd):
        return float(np.var([f.rabi_frequency(wd) for f in fits]))

    res = minimize_scalar(spread, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def refine_gate(
    transitions: TransitionSet,
    initial: PulseDesign,
    rounds: int = 3,
    shots: int | None = 10000,
    seed: int | None = 0,
    phase_contrast: float = QUBIT2_CONTRAST,
    chevron: ChevronProtocol | None = None,
    span: float = 0.10,
    tolerance: float = 5e-3,
    min_span: float = 0.025,
) -> PulseDesign:
    """Iterative calibration starting from ``initial``.

    Sequence: amplitude update, then ``rounds`` times (drive frequency and
    duration from the 00/10/01 Rabi periods, amplitude update). Amplitude
    updates come from :func:`calibrate_amplitude`; the sweep half-width starts
    at ``span`` and halves with every update. Drive frequency and duration
    come from chevrons measured at the current amplitude around the current
    drive frequency: the drive is moved to where the three fitted Rabi
    frequencies agree best and the duration set to one mean Rabi period.

    The returned design carries the true (model) gate report. The loop counts
    as converged when the last relative amplitude update is below
    ``tolerance`` or within three standard errors of zero (the sweep noise
    sets a floor no number of rounds can beat). Otherwise, or if any
    measurement fails, the design with the smallest amplitude update seen is
    returned with ``converged=False``.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if chevron is None:
        chevron = ChevronProtocol(shots=None if shots is None else 1000)
    seeds = iter(_spawn(seed, 4 * rounds + 2))
    pulse = initial.pulse
    history = []
    candidates = []  # (relative amplitude change, pulse)
    n_amp = 0

    def amplitude_step(p):
        nonlocal n_amp
        cal = calibrate_amplitude(
            transitions, p, span=max(span / 2**n_amp, min_span), shots=shots, seed=next(seeds), contrast=phase_contrast
        )
        n_amp += 1
        new_amp = float(np.clip(cal.target_amp, 0.75 * p.amp, 1.25 * p.amp))
        change = abs(new_amp - p.amp) / p.amp
        noise = cal.target_sigma / p.amp
        new = p.replace(amp=new_amp)
        history.append(RefineStep("amplitude", new, {
            "relative_change": change, "relative_sigma": noise, "calibration": cal.to_dict(),
        }))
        candidates.append((change, new))
        return new, change, noise

    def drive_step(p):
        fits = []
        for lab in RABI_LABELS:
            data = chevron.run(transitions, lab, amp=p.amp, seed=next(seeds))
            fits.append(fit_chevron(data))
        centres = [f.omega_mn for f in fits]
        wd = _equalize_rabi(fits, min(centres) - 4 * p.amp, max(centres) + 4 * p.amp)
        tau = TWO_PI / float(np.mean([f.rabi_frequency(wd) for f in fits]))
        new = p.replace(omega_d=wd, tau=tau)
        history.append(RefineStep("drive", new, {"fits": {str(lab): f.to_dict() for lab, f in zip(RABI_LABELS, fits)}}))
        return new

    converged = True
    try:
        pulse, change, noise = amplitude_step(pulse)
        for _ in range(rounds):
            pulse = drive_step(pulse)
            pulse, change, noise = amplitude_step(pulse)
        # a last step within three standard errors of no change is statistically settled
        converged = change <= max(tolerance, 3 * math.sqrt(2) * noise)
    except FitError as exc:
        converged = False
        history.append(RefineStep("failure", pulse, {"error": str(exc)}))

    if not converged and candidates:
        pulse = min(candidates, key=lambda c: c[0])[1]
    elif not candidates:
        pulse = initial.pulse
    return PulseDesign(
        pulse,
        gate_report(transitions, pulse),
        "refined",
        converged=converged,
        alternatives=(initial,),
        history=tuple(history),
    )
