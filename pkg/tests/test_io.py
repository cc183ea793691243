import json

import numpy as np
import pytest

from cmacp.design import MEASURED, TransitionSet
from cmacp.io import (
    ConfigError,
    config_hash,
    load_source,
    parse_source,
    provenance,
    read_chevron,
    read_csv,
    read_design,
    to_jsonable,
    write_chevron,
    write_csv,
    write_json,
)
from cmacp.lab import ChevronProtocol
from cmacp.model import DeviceParams

MEASURED_DOC = {
    "transitions_ghz": {"w00": 3.4098, "w01": 3.43605, "w10": 3.44009, "w11": 3.4660},
    "sigmas_mhz": {"w00": 0.1, "w01": 0.08, "w10": 0.07, "w11": 0.2},
}


def test_measured_document():
    t = parse_source(MEASURED_DOC)
    assert isinstance(t, TransitionSet)
    assert np.allclose(t.omegas, MEASURED.omegas, rtol=1e-15)
    assert np.allclose(t.sigmas, MEASURED.sigmas, rtol=1e-15)


def test_device_document():
    doc = {"device": {"omega1_ghz": 0.66964, "omega2_ghz": 0.69435, "omega_c_ghz": 3.437985,
                      "zeta1c_mhz": -30.12, "zeta2c_mhz": -26.08}}
    params = parse_source(doc)
    assert isinstance(params, DeviceParams)
    assert params.zeta12 == 0.0


@pytest.mark.parametrize(
    "doc, fragment",
    [
        ({"transitions_ghz": {"w00": 1, "w01": 1, "w11": 1}}, "w10"),
        ({"device": {"omega1_ghz": 1}}, "omega2_ghz"),
        ({"transitions_ghz": {**MEASURED_DOC["transitions_ghz"], "w22": 1}}, "w22"),
        ({**MEASURED_DOC, "extra": 1}, "extra"),
        ({"transitions_ghz": {**MEASURED_DOC["transitions_ghz"], "w00": "x"}}, "w00"),
        ({"transitions_ghz": {**MEASURED_DOC["transitions_ghz"], "w00": -1.0}}, "positive"),
        ({}, "transitions_ghz"),
        ([1, 2], "mapping"),
        ({**MEASURED_DOC, "device": {}}, "not both"),
    ],
)
def test_bad_documents_name_the_problem(doc, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_source(doc)


def test_load_yaml_and_json(tmp_path):
    y = tmp_path / "t.yaml"
    y.write_text("transitions_ghz: {w00: 3.4098, w01: 3.43605, w10: 3.44009, w11: 3.4660}\n")
    j = tmp_path / "t.json"
    j.write_text(json.dumps(MEASURED_DOC))
    assert np.allclose(load_source(y).omegas, load_source(j).omegas)
    with pytest.raises(ConfigError, match="not found"):
        load_source(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("transitions_ghz: {w00: [\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_source(bad)


def test_read_design(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"design": {"pulse": {"drive_freq_ghz": 3.42, "amp_mhz": 18.0, "tau_ns": 44.0}}}))
    assert read_design(path)["tau_ns"] == 44.0
    path.write_text(json.dumps({"design": {"pulse": {"drive_freq_ghz": 3.42, "amp_mhz": 18.0}}}))
    with pytest.raises(ConfigError, match="tau_ns"):
        read_design(path)
    path.write_text("{")
    with pytest.raises(ConfigError, match="JSON"):
        read_design(path)


def test_jsonable_conversion():
    out = to_jsonable({"a": np.arange(3), "b": (np.float64(1.5), np.bool_(True)), 1: np.nan})
    assert out == {"a": [0, 1, 2], "b": [1.5, True], "1": None}


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": [1.0, 2]}) == config_hash({"b": [1.0, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    prov = provenance({"a": 1}, 5)
    assert prov["seed"] == 5 and prov["tool"] == "cmacp" and len(prov["config_hash"]) == 16


def test_outputs_are_deterministic(tmp_path):
    prov = provenance({"x": 1}, 3)
    rows = [{"a": 1.0, "b": True}, {"a": np.float64(0.1), "b": False}]
    for name in ("one", "two"):
        write_csv(tmp_path / f"{name}.csv", rows, ["a", "b"], prov)
        write_json(tmp_path / f"{name}.json", {"z": 1, "y": np.arange(2)}, prov)
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()
    assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()
    text = (tmp_path / "one.csv").read_text().splitlines()
    assert text[0].startswith("# tool=cmacp") and "seed=3" in text[0]
    assert read_csv(tmp_path / "one.csv") == [{"a": "1.0", "b": "true"}, {"a": "0.1", "b": "false"}]
    doc = json.loads((tmp_path / "one.json").read_text())
    assert doc["provenance"] == prov


def test_chevron_round_trip(tmp_path):
    data = ChevronProtocol(n_freqs=5, n_times=11).run(MEASURED, "01", seed=4)
    csv_path, json_path = write_chevron(tmp_path / "chev", data, provenance({}, 4))
    assert csv_path.suffix == ".csv" and json_path.suffix == ".json"
    back = read_chevron(csv_path)
    assert np.array_equal(back.population, data.population)
    assert np.allclose(back.freqs, data.freqs, rtol=1e-14)
    assert back.label == data.label and back.shots == 100
    json_path.unlink()
    with pytest.raises(ConfigError, match="not found"):
        read_chevron(csv_path)
