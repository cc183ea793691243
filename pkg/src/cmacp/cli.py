"""Command-line front end.

Subcommands: ``design``, ``sweep``, ``calibrate``, ``xeb``, ``tomo``. Each
writes JSON/CSV files into ``--out``. Exit codes: 0 success, 2 configuration
error, 3 non-convergence, 4 fit failure or inconsistent fit.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bench.budget import budget_from_values
from .bench.channels import CZ, PAULI_LABELS, NoiseModel, process_tomography
from .bench.xeb import DEFAULT_DEPTHS, refit_target_phase, simulate_xeb
from .design import (
    PulseDesign,
    TransitionSet,
    computational_block,
    gate_report,
    optimize_pulse,
    quarter_point_drive,
    report_from_propagator,
    symmetric_pulse,
)
from .errors import FitError
from .io import ConfigError, load_source, provenance, read_design, write_csv, write_json
from .lab import QUBIT2_CONTRAST, refine_gate
from .model import DeviceParams, RectPulse, labframe_propagator
from .sweep import default_grid, run_sweep
from .units import ghz, mhz, to_mhz, wrap_phase

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_FIT = 4

SEED_MAX = 2**64 - 1


@dataclass
class RunConfig:
    command: str
    device_file: str | None
    output_dir: str
    seed: int
    workers: int = 1
    overrides: dict = field(default_factory=dict)

    def hashable(self) -> dict:
        """Everything that determines the output content (not where or how fast)."""
        doc = {"command": self.command, "seed": self.seed, "overrides": self.overrides}
        if self.device_file is not None:
            doc["device_sha256"] = hashlib.sha256(Path(self.device_file).read_bytes()).hexdigest()
        return doc


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _grid(text: str) -> tuple[int, int]:
    try:
        n1, n2 = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 41x41, got {text!r}") from None
    if n1 < 2 or n2 < 2:
        raise argparse.ArgumentTypeError("each grid axis needs at least two points")
    return n1, n2


def _depths(text: str) -> list[int]:
    try:
        depths = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"depths must be comma-separated integers, got {text!r}") from None
    if not depths or min(depths) < 1:
        raise argparse.ArgumentTypeError("depths must be a non-empty list of positive integers")
    return depths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmacp", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--device", help="device or measured-transitions file (YAML/JSON)")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--seed", type=_seed, default=0, help="RNG seed, unsigned 64-bit")
    common.add_argument("--workers", type=_positive_int, default=1, help="worker processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", parents=[common], help="design a CZ pulse")
    p.add_argument("--drive", choices=("quarter", "free", "symmetric"), default="quarter",
                   help="quarter: drive fixed at (w11 + 3 w00)/4; free: drive optimised too; symmetric: closed form")
    p.add_argument("--labframe", action="store_true", help="also evaluate the pulse without the RWA")

    p = sub.add_parser("sweep", parents=[common], help="fidelity map over transition mismatches")
    p.add_argument("--grid", type=_grid, default=(41, 41), help="points per axis, e.g. 41x41")
    p.add_argument("--axis1-max-mhz", type=float, default=10.0)
    p.add_argument("--axis2-max-mhz", type=float, default=80.0)
    p.add_argument("--anchor", choices=("model", "measured"), default="model",
                   help="model: sum-rule-obeying cells; measured: shift by the measured sum-rule defect")

    p = sub.add_parser("calibrate", parents=[common], help="virtual calibration loop")
    p.add_argument("--shots", type=int, default=10000, help="repetitions per point; 0 for exact populations")
    p.add_argument("--rounds", type=_positive_int, default=3)
    p.add_argument("--perturb", type=float, default=0.0, help="relative amplitude error of the starting design")
    p.add_argument("--contrast", type=float, default=QUBIT2_CONTRAST, help="readout contrast of qubit 2")

    p = sub.add_parser("xeb", parents=[common], help="interleaved cross-entropy benchmarking")
    p.add_argument("--design", help="design JSON from the design command (default: design from --device)")
    p.add_argument("--depths", type=_depths, default=list(DEFAULT_DEPTHS))
    p.add_argument("--sets", type=_positive_int, default=150)
    p.add_argument("--shots", type=_positive_int, default=10000)
    p.add_argument("--p1", type=float, default=0.990, help="target reference decay")
    p.add_argument("--p2", type=float, default=0.956, help="target interleaved decay")
    p.add_argument("--phase-error-pi", type=float, help="conditional-phase error in units of pi (default: designed gate)")
    p.add_argument("--leak", type=float, help="coupler leak probability (default: designed residual population)")
    p.add_argument("--single-qubit-ns", type=float, default=26.6)
    p.add_argument("--cz-ns", type=float, help="gate duration for the budget (default: designed duration)")

    p = sub.add_parser("tomo", parents=[common], help="Pauli transfer matrix of a gate channel")
    p.add_argument("--design", help="design JSON from the design command (default: design from --device)")
    p.add_argument("--channel", choices=("designed", "ideal", "noisy"), default="designed")
    p.add_argument("--depol2", type=float, default=0.0, help="depolarizing probability for --channel noisy")
    return parser


def _config(args) -> RunConfig:
    skip = {"command", "device", "out", "seed", "workers"}
    overrides = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    for key in ("design",):
        if overrides.get(key):
            path = Path(overrides[key])
            if not path.is_file():
                raise ConfigError(f"{path}: file not found")
            overrides[key] = hashlib.sha256(path.read_bytes()).hexdigest()
    if args.device is not None and not Path(args.device).is_file():
        raise ConfigError(f"{args.device}: file not found")
    return RunConfig(args.command, args.device, args.out, args.seed, args.workers, overrides)


def _transitions(source) -> TransitionSet:
    return TransitionSet.from_device(source) if isinstance(source, DeviceParams) else source


def _require_device(args):
    if args.device is None:
        raise ConfigError(f"'{args.command}' needs --device")
    return load_source(args.device)


def _design_for(source, drive: str = "quarter") -> PulseDesign:
    trans = _transitions(source)
    if drive == "symmetric":
        design = symmetric_pulse(trans)
    elif drive == "free":
        design = optimize_pulse(trans)
    else:
        design = optimize_pulse(trans, quarter_point_drive(trans))
    if isinstance(source, DeviceParams) and source.zeta12:
        design = PulseDesign(design.pulse, gate_report(source, design.pulse), design.method,
                             design.converged, design.alternatives)
    return design


def _pulse_and_report(args):
    """Pulse from ``--design`` or designed from ``--device``, with the model report."""
    source = _require_device(args)
    if getattr(args, "design", None):
        d = read_design(args.design)
        pulse = RectPulse(ghz(d["drive_freq_ghz"]), mhz(d["amp_mhz"]), float(d["tau_ns"]))
        return source, pulse, gate_report(source, pulse)
    design = _design_for(source)
    return source, design.pulse, design.predicted


def _summary(report, pulse) -> str:
    theta = report.cond_phase % (2 * math.pi)
    return (
        f"theta/pi={theta / math.pi:.6f} fidelity={report.fidelity:.6f} "
        f"tau={pulse.tau:.3f} ns amp={to_mhz(pulse.amp):.4f} MHz"
    )


def cmd_design(args, cfg, out: Path) -> int:
    source = _require_device(args)
    design = _design_for(source, args.drive)
    payload = {"design": design.to_dict(), "source": _source_dict(source)}
    if args.labframe:
        params = source if isinstance(source, DeviceParams) else _fit_params(source)
        u = labframe_propagator(params, design.pulse)
        lab = report_from_propagator(u)
        payload["labframe"] = {"fidelity": lab.fidelity, "cond_phase_rad": lab.cond_phase,
                               "fidelity_difference": lab.fidelity - design.predicted.fidelity}
    write_json(out / "design.json", payload, provenance(cfg.hashable(), cfg.seed))
    print(_summary(design.predicted, design.pulse))
    if not design.converged:
        print("warning: optimiser did not beat the closed-form baseline", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _fit_params(trans: TransitionSet) -> DeviceParams:
    from .model import fit_device_params

    return fit_device_params(trans.omegas, trans.sigmas)


def _source_dict(source) -> dict:
    if isinstance(source, DeviceParams):
        return {"device": source.to_lab_units()}
    return {"transitions": source.to_lab_units()}


def cmd_sweep(args, cfg, out: Path) -> int:
    reference = _transitions(load_source(args.device)) if args.device else None
    n1, n2 = args.grid
    grid = default_grid(n1, n2, args.axis1_max_mhz, args.axis2_max_mhz, anchor=args.anchor)
    result = run_sweep(grid, workers=args.workers, **({} if reference is None else {"reference": reference}))
    prov = provenance(cfg.hashable(), cfg.seed)
    columns = ["axis1_mhz", "axis2_mhz", "fidelity", "log10_infidelity", "amp_mhz", "tau_ns", "converged"]
    write_csv(out / "sweep.csv", result.rows(), columns, prov)
    write_json(out / "sweep.json", {
        "grid": {
            "axis1_mhz": to_mhz(grid.axis1),
            "axis2_mhz": to_mhz(grid.axis2),
            "ref_w00_ghz": grid.ref_w00 / (2 * math.pi),
            "sum_defect_mhz": to_mhz(grid.sum_defect),
        },
        "annotations": result.annotations,
        "cells": result.n_evaluated,
    }, prov)
    star = result.annotations[0]
    print(f"cells={result.n_evaluated} star fidelity={star['fidelity']:.6f} "
          f"nearest cell fidelity={star['nearest_cell_fidelity']:.6f}")
    return EXIT_OK


def cmd_calibrate(args, cfg, out: Path) -> int:
    source = _require_device(args)
    trans = _transitions(source)
    if args.shots < 0:
        raise ConfigError("--shots must be >= 0")
    if not 0 < args.contrast <= 1:
        raise ConfigError("--contrast must lie in (0, 1]")
    if not -0.5 < args.perturb < 0.5:
        raise ConfigError("--perturb must lie in (-0.5, 0.5)")
    start = _design_for(trans)
    pulse = start.pulse.replace(amp=start.pulse.amp * (1 + args.perturb))
    initial = PulseDesign(pulse, gate_report(trans, pulse), "perturbed" if args.perturb else start.method)
    shots = None if args.shots == 0 else args.shots
    refined = refine_gate(trans, initial, rounds=args.rounds, shots=shots, seed=args.seed,
                          phase_contrast=args.contrast)
    prov = provenance(cfg.hashable(), cfg.seed)
    write_json(out / "calibrate.json", {"initial": initial.to_dict(), "final": refined.to_dict()}, prov)
    rows, sweeps = [], []
    for k, step in enumerate(refined.history):
        cal = step.detail.get("calibration", {})
        rows.append({
            "step": k,
            "kind": step.kind,
            "amp_mhz": to_mhz(step.pulse.amp),
            "drive_freq_ghz": step.pulse.omega_d / (2 * math.pi),
            "tau_ns": step.pulse.tau,
            "relative_change": step.detail.get("relative_change", ""),
            "theta_rad": cal.get("theta_rad", ""),
        })
        for a, th, sg in zip(cal.get("amplitudes_mhz", ()), cal.get("theta_per_amp_rad", ()), cal.get("sigma_per_amp_rad", ())):
            sweeps.append({"step": k, "amp_mhz": a, "theta_rad": th, "sigma_rad": sg})
    write_csv(out / "calibrate_rounds.csv", rows,
              ["step", "kind", "amp_mhz", "drive_freq_ghz", "tau_ns", "relative_change", "theta_rad"], prov)
    write_csv(out / "calibrate_sweeps.csv", sweeps, ["step", "amp_mhz", "theta_rad", "sigma_rad"], prov)
    print(_summary(refined.predicted, refined.pulse) + f" converged={refined.converged}")
    if any(step.kind == "failure" for step in refined.history):
        return EXIT_FIT
    return EXIT_OK if refined.converged else EXIT_NOT_CONVERGED


def _noise_from(args, report) -> NoiseModel:
    phase = wrap_phase(report.cond_phase - math.pi) if args.phase_error_pi is None else args.phase_error_pi * math.pi
    leak = float(np.mean(report.residual_pop)) if args.leak is None else args.leak
    try:
        return NoiseModel.matching_decays(args.p1, args.p2, phase_error=phase, coupler_leak=leak)
    except ValueError as exc:
        raise ConfigError(f"noise settings: {exc}") from exc


def cmd_xeb(args, cfg, out: Path) -> int:
    _, pulse, report = _pulse_and_report(args)
    noise = _noise_from(args, report)
    run = simulate_xeb(noise, CZ, depths=args.depths, sets_per_depth=args.sets, shots=args.shots,
                       seed=args.seed, workers=args.workers)
    if run.p_int > run.p_ref:
        raise FitError(
            f"interleaved decay {run.p_int:.5f} exceeds reference decay {run.p_ref:.5f}",
            {"depths": run.depths.tolist(), "ref_fidelities": run.ref_fidelities.tolist(),
             "int_fidelities": run.int_fidelities.tolist()},
        )
    theta, _, _ = refit_target_phase(run)
    cz_ns = pulse.tau if args.cz_ns is None else args.cz_ns
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        budget = budget_from_values(theta, run.p_ref, run.p_int, args.single_qubit_ns, cz_ns)
    prov = provenance(cfg.hashable(), cfg.seed)
    write_json(out / "xeb.json", {
        "run": run.to_dict(),
        "noise": asdict(noise),
        "budget": budget.to_dict(),
    }, prov)
    rows = [{
        "depth": int(m),
        "ref_fidelity": float(fr),
        "int_fidelity": float(fi),
        "ref_model": run.a_ref * run.p_ref**m,
        "int_model": run.a_int * run.p_int**m,
    } for m, fr, fi in zip(run.depths, run.ref_fidelities, run.int_fidelities)]
    write_csv(out / "xeb_decay.csv", rows, ["depth", "ref_fidelity", "int_fidelity", "ref_model", "int_model"], prov)
    bars = [{"component": k, "value": getattr(budget, k)} for k in ("eps_theta", "eps_d", "eps_o", "eps_total")]
    write_csv(out / "budget.csv", bars, ["component", "value"], prov)
    print(f"p_ref={run.p_ref:.5f} p_int={run.p_int:.5f} gate fidelity={run.gate_fidelity:.5f} "
          f"theta/pi={theta / math.pi:.3f} eps_theta={budget.eps_theta:.4f} eps_d={budget.eps_d:.4f} "
          f"eps_o={budget.eps_o:.4f}")
    if not budget.consistent:
        print("error budget inconsistent: named errors exceed the total", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def cmd_tomo(args, cfg, out: Path) -> int:
    if args.channel == "ideal":
        channel = CZ
    else:
        source, pulse, report = _pulse_and_report(args)
        if args.channel == "designed":
            channel = computational_block(source, pulse)
        else:
            if not 0 <= args.depol2 <= 1:
                raise ConfigError("--depol2 must be a probability")
            noise = NoiseModel(depol2=args.depol2, phase_error=wrap_phase(report.cond_phase - math.pi),
                               coupler_leak=float(np.mean(report.residual_pop)))
            channel = noise.gate_kraus(CZ)
    result = process_tomography(channel, CZ)
    prov = provenance(cfg.hashable(), cfg.seed)
    rows = [{"row": lab, **dict(zip(PAULI_LABELS, result.entries[i]))} for i, lab in enumerate(PAULI_LABELS)]
    write_csv(out / "ptm.csv", rows, ["row", *PAULI_LABELS], prov)
    write_json(out / "ptm.json", {
        "pauli_order": list(PAULI_LABELS),
        "convention": "R[i][j] = Tr(P_i E(P_j)) / 4; first letter acts on qubit 1",
        "channel": args.channel,
        "fidelity_vs_cz": result.fidelity,
        "trace_preserving": result.trace_preserving,
        "first_row": result.entries[0],
    }, prov)
    print(f"channel={args.channel} fidelity vs CZ={result.fidelity:.6f} trace_preserving={result.trace_preserving}")
    return EXIT_OK


COMMANDS = {
    "design": cmd_design,
    "sweep": cmd_sweep,
    "calibrate": cmd_calibrate,
    "xeb": cmd_xeb,
    "tomo": cmd_tomo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which is our config-error code too
        return int(exc.code or 0)
    try:
        cfg = _config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        for key, value in exc.diagnostics.items():
            print(f"  {key}: {value}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
