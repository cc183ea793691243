import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cmacp.bench.budget import budget_from_values, cphase_depolarizing_error, error_budget
from cmacp.bench.channels import CZ, NoiseModel
from cmacp.bench.xeb import simulate_xeb


def oracle_eps_theta(theta):
    f_avg = (4 + 10 + 6 * np.cos(theta - np.pi)) / 20
    return 1 - (4 * f_avg - 1) / 3


def test_phase_error_at_0963pi():
    eps = cphase_depolarizing_error(0.963 * np.pi)
    assert eps == pytest.approx(oracle_eps_theta(0.963 * np.pi), abs=1e-12)
    assert eps == pytest.approx(0.003, abs=5e-4)


@given(st.floats(0, 2 * np.pi))
def test_phase_error_matches_oracle(theta):
    assert cphase_depolarizing_error(theta) == pytest.approx(oracle_eps_theta(theta), abs=1e-12)


def test_reported_values():
    b = budget_from_values(0.963 * np.pi, 0.99, 0.956)
    assert b.eps_d == pytest.approx(0.01654, abs=1e-5)
    assert b.eps_total == pytest.approx(1 - 0.956 / 0.99, abs=1e-15)
    assert b.eps_o == pytest.approx(0.015, abs=5e-4)
    assert b.consistent
    assert b.to_dict()["theta_over_pi"] == pytest.approx(0.963)


@given(st.floats(0.9 * np.pi, 1.1 * np.pi), st.floats(0.9, 1.0), st.floats(0.5, 1.0))
def test_budget_closure(theta, p_ref, ratio):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        b = budget_from_values(theta, p_ref, p_ref * ratio)
    assert abs(b.eps_theta + b.eps_d + b.eps_o - b.eps_total) < 1e-12


def test_inconsistent_budget_is_flagged():
    with pytest.warns(RuntimeWarning, match="inconsistent"):
        b = budget_from_values(0.9 * np.pi, 0.98, 0.975)
    assert not b.consistent and b.eps_o < 0


def test_durations_validated():
    with pytest.raises(ValueError):
        budget_from_values(np.pi, 0.99, 0.95, single_qubit_dur=0)


def test_budget_from_simulated_run():
    noise = NoiseModel.matching_decays(0.99, 0.956, phase_error=-0.037 * np.pi)
    run = simulate_xeb(noise, CZ, depths=(1, 5, 10, 20, 40, 60, 100), sets_per_depth=50, seed=5)
    b = error_budget(run)
    assert b.theta == pytest.approx(0.963 * np.pi, abs=0.005 * np.pi)
    assert b.eps_total == pytest.approx(1 - 0.956 / 0.99, abs=0.005)
    with pytest.raises(ValueError):
        error_budget(simulate_xeb(noise, depths=(1, 2, 3), sets_per_depth=2, shots=100))
