"""Input files and provenance-stamped outputs.

Input files are YAML (JSON is accepted as a subset) in lab units. Two
layouts are understood::

    transitions_ghz: {w00: 3.4098, w01: 3.43605, w10: 3.44009, w11: 3.4660}
    sigmas_mhz: {w00: 0.1, w01: 0.08, w10: 0.07, w11: 0.2}   # optional

    device:
      omega1_ghz: 0.66964
      omega2_ghz: 0.69435
      omega_c_ghz: 3.437985
      zeta1c_mhz: -30.12
      zeta2c_mhz: -26.08
      zeta12_mhz: 0.0        # optional

Every output carries the tool version, a hash of the run configuration and
the seed. JSON is written with sorted keys and CSV with a fixed column order,
so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np
import yaml

from .design import TransitionSet
from .lab import ChevronDataset
from .model import DeviceParams

__all__ = [
    "ConfigError",
    "load_source",
    "read_design",
    "config_hash",
    "provenance",
    "to_jsonable",
    "write_json",
    "write_csv",
    "read_csv",
    "write_chevron",
    "read_chevron",
]

TRANSITION_KEYS = ("w00", "w01", "w10", "w11")
DEVICE_KEYS = ("omega1_ghz", "omega2_ghz", "omega_c_ghz", "zeta1c_mhz", "zeta2c_mhz")
DEVICE_OPTIONAL = ("zeta12_mhz",)


class ConfigError(ValueError):
    """Unusable configuration or input file."""


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return value


def _section(doc: dict, name: str, required, optional=(), path="") -> dict:
    sec = doc[name]
    if not isinstance(sec, dict):
        raise ConfigError(f"{path}: '{name}' must be a mapping")
    missing = [k for k in required if k not in sec]
    if missing:
        raise ConfigError(f"{path}: '{name}' is missing key(s) {', '.join(missing)}")
    unknown = sorted(set(sec) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{path}: '{name}' has unknown key(s) {', '.join(map(str, unknown))}")
    return {k: _number(sec[k], f"{path}: {name}.{k}") for k in sec}


def parse_source(doc, path: str = "<input>"):
    """Build a :class:`TransitionSet` or :class:`DeviceParams` from a parsed document."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    if "transitions_ghz" in doc and "device" in doc:
        raise ConfigError(f"{path}: give either 'transitions_ghz' or 'device', not both")
    if "transitions_ghz" in doc:
        unknown = sorted(set(doc) - {"transitions_ghz", "sigmas_mhz"})
        if unknown:
            raise ConfigError(f"{path}: unknown top-level key(s) {', '.join(map(str, unknown))}")
        w = _section(doc, "transitions_ghz", TRANSITION_KEYS, path=path)
        sig = None
        if "sigmas_mhz" in doc:
            s = _section(doc, "sigmas_mhz", TRANSITION_KEYS, path=path)
            sig = [s[k] for k in TRANSITION_KEYS]
        try:
            return TransitionSet.from_lab_units(*(w[k] for k in TRANSITION_KEYS), sigmas_mhz=sig)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if "device" in doc:
        unknown = sorted(set(doc) - {"device"})
        if unknown:
            raise ConfigError(f"{path}: unknown top-level key(s) {', '.join(map(str, unknown))}")
        d = _section(doc, "device", DEVICE_KEYS, DEVICE_OPTIONAL, path=path)
        try:
            return DeviceParams.from_lab_units(
                d["omega1_ghz"], d["omega2_ghz"], d["omega_c_ghz"],
                d["zeta1c_mhz"], d["zeta2c_mhz"], d.get("zeta12_mhz", 0.0),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}: missing key 'transitions_ghz' (or 'device')")


def load_source(path) -> TransitionSet | DeviceParams:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: file not found")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    return parse_source(doc, str(path))


def read_design(path) -> dict:
    """Pulse section of a design JSON written by the ``design`` command (lab units)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: file not found")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    pulse = doc.get("design", {}).get("pulse") if isinstance(doc, dict) else None
    if not isinstance(pulse, dict):
        raise ConfigError(f"{path}: missing key 'design.pulse'")
    for key in ("drive_freq_ghz", "amp_mhz", "tau_ns"):
        if key not in pulse:
            raise ConfigError(f"{path}: 'design.pulse' is missing key {key}")
        _number(pulse[key], f"{path}: design.pulse.{key}")
    return pulse


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples into JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def _canonical(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    """Short SHA-256 of the canonical JSON form of ``config``."""
    return hashlib.sha256(_canonical(config).encode()).hexdigest()[:16]


def provenance(config: dict, seed) -> dict:
    from . import __version__

    return {"tool": "cmacp", "version": __version__, "config_hash": config_hash(config), "seed": seed}


def write_json(path, payload: dict, prov: dict) -> Path:
    path = Path(path)
    doc = {"provenance": prov, **payload}
    path.write_text(json.dumps(to_jsonable(doc), sort_keys=True, indent=2) + "\n")
    return path


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, rows, columns, prov: dict) -> Path:
    """CSV with a leading ``#`` provenance line."""
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# tool=cmacp version={prov['version']} config_hash={prov['config_hash']} seed={prov['seed']}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> list[dict]:
    """Rows of a CSV written by :func:`write_csv` (comment lines skipped), as strings."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_chevron(path, data: ChevronDataset, prov: dict) -> tuple[Path, Path]:
    """Chevron as ``<path>.csv`` (t_ns, f_ghz, population) plus a ``<path>.json`` sidecar."""
    path = Path(path)
    csv_path = write_csv(path.with_suffix(".csv"), data.rows(), ["t_ns", "f_ghz", "population"], prov)
    json_path = write_json(path.with_suffix(".json"), {"chevron": data.metadata()}, prov)
    return csv_path, json_path


def read_chevron(path) -> ChevronDataset:
    """Inverse of :func:`write_chevron`; ``path`` may name either file or the common stem."""
    path = Path(path)
    csv_path, json_path = path.with_suffix(".csv"), path.with_suffix(".json")
    for p in (csv_path, json_path):
        if not p.is_file():
            raise ConfigError(f"{p}: file not found")
    meta = json.loads(json_path.read_text()).get("chevron")
    if not isinstance(meta, dict) or "label" not in meta:
        raise ConfigError(f"{json_path}: missing key 'chevron.label'")
    try:
        return ChevronDataset.from_rows(read_csv(csv_path), meta)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{csv_path}: {exc}") from exc
