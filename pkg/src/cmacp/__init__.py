"""Coupler microwave-activated CZ gate: model, design, calibration and benchmarking."""

__version__ = "0.1.0"

from .design import (
    MEASURED,
    GateReport,
    PulseDesign,
    TransitionSet,
    gate_report,
    optimize_pulse,
    quarter_point_drive,
    symmetric_pulse,
)
from .errors import FitError
from .model import DeviceParams, RectPulse, labframe_propagator, rwa_propagator
from .sweep import SweepGrid, default_grid, run_sweep

__all__ = [
    "__version__",
    "MEASURED",
    "DeviceParams",
    "FitError",
    "GateReport",
    "PulseDesign",
    "RectPulse",
    "SweepGrid",
    "TransitionSet",
    "default_grid",
    "gate_report",
    "labframe_propagator",
    "optimize_pulse",
    "quarter_point_drive",
    "run_sweep",
    "rwa_propagator",
    "symmetric_pulse",
]
