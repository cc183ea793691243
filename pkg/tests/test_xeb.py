import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cmacp.bench.channels import CZ, NoiseModel, cphase
from cmacp.bench.xeb import (
    clifford_fidelity_conventions,
    depolarizing_to_fidelity,
    fidelity_to_depolarizing,
    fit_decay,
    refit_target_phase,
    simulate_xeb,
    xeb_estimate,
    xeb_fidelity,
)
from cmacp.errors import FitError

SHORT_DEPTHS = (1, 5, 10, 20, 40, 60, 100)


def test_xeb_fidelity_arithmetic():
    assert xeb_fidelity(1.0, 1.0) == 1.0
    p = 0.956 / 0.99
    assert p == pytest.approx(0.96566, abs=1e-5)
    assert xeb_fidelity(0.99, 0.956) == pytest.approx(p + (1 - p) / 4, abs=1e-15)
    assert xeb_fidelity(0.99, 0.956) == pytest.approx(0.97424, abs=1e-5)


@pytest.mark.parametrize("p_ref, p_int", [(0.9, 0.95), (1.2, 0.9), (0.9, 0.0), (0.0, 0.0)])
def test_xeb_fidelity_rejects_unphysical(p_ref, p_int):
    with pytest.raises(ValueError):
        xeb_fidelity(p_ref, p_int)


def test_clifford_conventions():
    conv = clifford_fidelity_conventions(0.99)
    assert conv["layer_d4"] == pytest.approx(0.9925, abs=1e-12)
    assert conv["per_qubit_d2"] == pytest.approx((1 + np.sqrt(0.99)) / 2, abs=1e-12)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_fidelity_mapping_monotone_and_invertible(p, q):
    assert fidelity_to_depolarizing(depolarizing_to_fidelity(p)) == pytest.approx(p, abs=1e-12)
    if q - p > 1e-12:
        assert depolarizing_to_fidelity(p) < depolarizing_to_fidelity(q)


def test_fit_decay_recovers_exact_curve():
    m = np.array(SHORT_DEPTHS)
    fit = fit_decay(m, 0.8 * 0.97**m)
    assert fit.a == pytest.approx(0.8, abs=1e-8)
    assert fit.p == pytest.approx(0.97, abs=1e-10)


@pytest.mark.parametrize(
    "depths, values",
    [([5], [0.5]), ([1, 2, 3], [np.nan, np.nan, 0.1]), ([1, 2, 3, 4], [0.0, 0.0, 0.0, 0.0])],
)
def test_fit_decay_refuses(depths, values):
    with pytest.raises(FitError) as info:
        fit_decay(depths, values)
    assert "depths" in info.value.diagnostics


def test_xeb_estimate_ideal_sampling_is_one(rng):
    ideal = rng.dirichlet(np.ones(4), size=20)
    assert xeb_estimate(ideal, ideal * 1e6) == pytest.approx(1.0, abs=1e-12)
    assert xeb_estimate(ideal, np.full_like(ideal, 100)) == pytest.approx(0.0, abs=1e-12)


def test_zero_noise_gives_flat_unit_fidelity():
    run = simulate_xeb(NoiseModel(), CZ, depths=SHORT_DEPTHS, sets_per_depth=20, shots=2000, seed=1)
    assert run.p_ref == pytest.approx(1.0, abs=1e-3)
    assert run.p_int == pytest.approx(1.0, abs=1e-3)
    assert run.gate_fidelity == pytest.approx(1.0, abs=2e-3)
    assert np.all(np.abs(run.ref_fidelities - 1) < 0.05)


def test_planted_depolarizing_recovered():
    run = simulate_xeb(NoiseModel(depol1=0.02), depths=SHORT_DEPTHS, sets_per_depth=50, seed=3)
    assert run.p_ref == pytest.approx(0.98, abs=0.003)
    assert run.int_fit is None and run.gate_fidelity is None


@pytest.mark.slow
def test_estimator_unbiased_over_seeds():
    fits = [
        simulate_xeb(NoiseModel(depol1=0.02), depths=SHORT_DEPTHS, sets_per_depth=50, seed=s).ref_fit
        for s in range(20)
    ]
    p = np.array([f.p for f in fits])
    sem = p.std(ddof=1) / np.sqrt(p.size)
    combined = np.hypot(sem, np.sqrt(np.sum([f.sigma_p**2 for f in fits])) / p.size)
    assert abs(p.mean() - 0.98) < combined


def test_determinism_and_workers():
    kwargs = dict(depths=(1, 10, 30), sets_per_depth=10, shots=500, seed=7)
    noise = NoiseModel(depol1=0.01, depol2=0.02)
    a = simulate_xeb(noise, CZ, **kwargs)
    b = simulate_xeb(noise, CZ, workers=2, **kwargs)
    assert np.array_equal(a.ref_fidelities, b.ref_fidelities)
    assert np.array_equal(a.int_fidelities, b.int_fidelities)
    c = simulate_xeb(noise, CZ, **dict(kwargs, seed=8))
    assert not np.array_equal(a.ref_fidelities, c.ref_fidelities)


def test_records_shapes():
    run = simulate_xeb(NoiseModel(depol1=0.01, depol2=0.05), CZ, depths=(2, 4, 8), sets_per_depth=6, shots=100, seed=0)
    rec = run.int_records[1]
    assert rec.cliffords.shape == (6, 4, 2)
    assert rec.counts.shape == (6, 4) and np.all(rec.counts.sum(axis=1) == 100)
    assert np.allclose(rec.ideal.sum(axis=1), 1)
    d = run.to_dict()
    assert set(d) >= {"reference", "interleaved", "gate_fidelity", "single_qubit_clifford_fidelity"}


def test_bad_depths():
    with pytest.raises(ValueError):
        simulate_xeb(NoiseModel(), depths=())
    with pytest.raises(ValueError):
        simulate_xeb(NoiseModel(), depths=(0, 1))


def test_refit_finds_planted_phase():
    delta = -0.037 * np.pi
    run = simulate_xeb(NoiseModel(depol1=0.01, phase_error=delta), CZ, depths=SHORT_DEPTHS, sets_per_depth=50, seed=2)
    theta, thetas, score = refit_target_phase(run)
    assert thetas.size == 201
    assert theta == pytest.approx(np.pi + delta, abs=0.005 * np.pi)
    with pytest.raises(ValueError):
        refit_target_phase(simulate_xeb(NoiseModel(), depths=(1, 2), sets_per_depth=2, shots=10))


def test_interleaving_cphase_target_is_perfect():
    target = cphase(0.9 * np.pi)
    run = simulate_xeb(NoiseModel(), target, depths=(1, 10, 40), sets_per_depth=10, shots=1000, seed=4)
    assert run.p_int == pytest.approx(1.0, abs=2e-3)
