import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pseudomode.dynamics import (assemble_generator, classify_markovianity, diagonalize, evolve, fit_decay_rate,
                                 lamb_shift, oscillation_period, time_grid, trajectory_table, tune_omega0,
                                 two_mode_approx)
from pseudomode.errors import WindowTooShortError
from pseudomode.poles import Pole, PoleSet
from pseudomode.pseudomodes import EmitterSpec, PseudomodeSet


def toy_set(spec, z, g, omega0):
    """Hand-built pseudomodes with prescribed poles and couplings."""
    poles = [Pole(1, i + 1, complex(zi), 0.0) for i, zi in enumerate(z)]
    ps = PoleSet(spec, {"l_max": 1, "re_max": 20.0, "im_min": -5.0, "re_min": 0.01}, poles)
    return PseudomodeSet(spec, ps, EmitterSpec(1.0, 1.0, omega0), np.ones(len(z), dtype=complex),
                         np.asarray(g, dtype=complex))


def test_generator_is_complex_symmetric(pm10):
    gen = assemble_generator(None, pm10)
    assert gen.dim == len(pm10) + 1
    assert np.array_equal(gen.matrix, gen.matrix.T)
    assert gen.matrix[0, 0] == pm10.emitter.omega0


def test_bare_emitter():
    em = EmitterSpec(1.0, 10.0, 3.0)
    gen = assemble_generator(em, None)
    traj = evolve(gen, np.linspace(0, 10, 5), frame="lab")
    assert np.allclose(traj.c0, np.exp(-3j * traj.t))


def test_eigen_path_matches_adaptive_integration(spec):
    pm = toy_set(spec, [3.0 - 0.01j, 3.2 - 0.3j, 5.0 - 1.0j], [0.02, 0.05 + 0.01j, 0.1], 3.05)
    gen = assemble_generator(None, pm)
    t = np.linspace(0, 300, 301)
    a = evolve(gen, t, method="eigen")
    b = evolve(gen, t, method="ode")
    assert a.path == "eigen" and b.path == "ode"
    # Global error of the adaptive integrator at rtol 1e-10 over a few hundred steps.
    assert np.max(np.abs(a.c0 - b.c0)) < 1e-6
    assert np.max(np.abs(a.b - b.b)) < 1e-6


def test_eigen_decomposition_residual(pm10):
    _, _, cond, res = diagonalize(assemble_generator(None, pm10))
    assert res < 1e-12
    assert cond < 1e12


def test_frames_are_consistent(spec):
    pm = toy_set(spec, [3.0 - 0.01j, 4.0 - 0.2j], [0.05, 0.03], 3.02)
    t = np.linspace(0, 50, 101)
    rot = evolve(assemble_generator(None, pm), t)
    lab = rot.to_frame("lab")
    assert np.allclose(lab.c0, rot.c0 * np.exp(-1j * 3.02 * t))
    inter = rot.to_frame("interaction")
    assert np.allclose(inter.c0, rot.c0)
    assert np.allclose(inter.b, lab.b * np.exp(1j * np.outer(pm.z, t)))
    back = inter.to_frame("rotating")
    assert np.allclose(back.b, rot.b)
    with pytest.raises(ValueError):
        rot.to_frame("heisenberg")


@settings(max_examples=25, deadline=None)
@given(perm_seed=st.integers(0, 2**31 - 1))
def test_reordering_poles_leaves_emitter_unchanged(spec, perm_seed):
    z = np.array([3.0 - 0.01j, 3.1 - 0.2j, 4.0 - 0.5j, 2.5 - 1.0j])
    g = np.array([0.04, 0.02 + 0.01j, 0.05, 0.03 - 0.02j])
    perm = np.random.default_rng(perm_seed).permutation(4)
    t = np.linspace(0, 100, 51)
    a = evolve(assemble_generator(None, toy_set(spec, z, g, 3.0)), t)
    b = evolve(assemble_generator(None, toy_set(spec, z[perm], g[perm], 3.0)), t)
    assert np.max(np.abs(a.c0 - b.c0)) < 1e-12
    assert np.allclose(a.b[perm], b.b, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(0.1, 10.0))
def test_coupling_scale_rescales_time(spec, scale):
    # With real detuning and no decay, scaling all of M by s is the same as scaling t by s.
    z = np.array([1.0 + 0j, 1.3 + 0j])
    g = np.array([0.05, 0.02])
    t = np.linspace(0, 200, 41)
    base = evolve(assemble_generator(None, toy_set(spec, z, g, 1.1)), scale * t, frame="lab")
    scaled = evolve(assemble_generator(None, toy_set(spec, scale * z, scale * g, 1.1 * scale)), t, frame="lab")
    assert np.max(np.abs(base.c0 - scaled.c0)) < 1e-9


def test_total_probability_never_grows(spec):
    pm = toy_set(spec, [3.0 - 0.01j, 3.2 - 0.3j], [0.05, 0.05], 3.0)
    t = np.linspace(0, 400, 801)
    traj = evolve(assemble_generator(None, pm), t)
    total = traj.population + traj.mode_populations.sum(axis=0)
    assert np.all(np.diff(total) <= 1e-12)


def test_hermitian_limit_conserves_probability(spec):
    pm = toy_set(spec, [3.0 + 0j, 3.5 + 0j], [0.05, 0.1], 3.2)
    traj = evolve(assemble_generator(None, pm), np.linspace(0, 1000, 201))
    total = traj.population + traj.mode_populations.sum(axis=0)
    assert np.max(np.abs(total - 1)) < 1e-12


def test_single_resonant_mode_rabi(spec):
    g, gamma = 0.01, 1e-4
    pm = toy_set(spec, [2.0 - 1j * gamma], [g], 2.0)
    t = np.linspace(0, 3000, 30001)
    traj = evolve(assemble_generator(None, pm), t)
    period = oscillation_period(t, traj.population)
    expected = 2 * np.pi / (2 * np.sqrt(g**2 - gamma**2 / 4))
    assert abs(period / expected - 1) < 1e-4


def test_oscillation_period_on_synthetic_signal():
    t = np.linspace(0, 100, 2001)
    p = np.cos(2 * np.pi * t / 7.3) ** 2 * np.exp(-t / 200)
    # cos^2 oscillates at half the period of cos.
    assert abs(oscillation_period(t, p) - 3.65) < 1e-3
    with pytest.raises(WindowTooShortError):
        oscillation_period(t[:40], p[:40])


def test_fit_decay_rate_recovers_exponential():
    t = np.linspace(0, 50, 500)
    assert abs(fit_decay_rate(t, np.exp(-0.13 * t)) - 0.13) < 1e-10


def test_lamb_shift_conventions(spec):
    pm = toy_set(spec, [3.0 - 0.1j, 5.0 - 0.2j], [0.1 + 0.02j, 0.2], 4.0)
    sq = lamb_shift(pm, omega0=4.0)
    expected = (0.1 + 0.02j) ** 2 / (4.0 - 3.0 + 0.1j) + 0.04 / (4.0 - 5.0 + 0.2j)
    assert abs(sq - expected) < 1e-15
    mod = lamb_shift(pm, omega0=4.0, convention="modulus")
    assert abs(mod - (abs(0.1 + 0.02j) ** 2 / (1.0 + 0.1j) + 0.04 / (-1.0 + 0.2j))) < 1e-15
    assert lamb_shift(pm, excluded=[(1, 1), (1, 2)]) == 0
    with pytest.raises(ValueError):
        lamb_shift(pm, convention="other")


def test_tuning_hits_target(pm10):
    w0 = tune_omega0(pm10)
    shift = lamb_shift(pm10, excluded=[(8, 3), (5, 4)], omega0=w0).real
    assert abs(w0 + shift - pm10.z[pm10.index((8, 3))].real) < 1e-13


def test_two_mode_keeping_everything_is_exact(spec):
    pm = toy_set(spec, [3.0 - 0.01j, 3.2 - 0.3j], [0.02, 0.03], 3.0)
    t = np.linspace(0, 200, 101)
    full = evolve(assemble_generator(None, pm), t)
    red, shift = two_mode_approx(pm, keep=[(1, 1), (1, 2)], t_grid=t)
    assert shift == 0
    assert np.allclose(red.c0, full.c0, atol=1e-12)


def test_two_mode_adds_complex_shift(spec):
    pm = toy_set(spec, [3.0 - 0.01j, 8.0 - 2.0j], [0.02, 0.3], 3.0)
    _, shift = two_mode_approx(pm, keep=[(1, 1)], t_grid=np.linspace(0, 10, 3))
    assert abs(shift - 0.09 / (3.0 - 8.0 + 2.0j)) < 1e-15


def test_classification_of_toy_regimes(spec):
    # A broad, far-detuned mode follows the emitter; a narrow one rings freely.
    pm = toy_set(spec, [3.0 - 2.0j, 3.0005 - 1e-5j], [0.3, 1e-4], 3.0)
    t = np.linspace(0, 400, 4001)
    traj = evolve(assemble_generator(None, pm), t)
    gamma0, recs = classify_markovianity(traj, pm)
    assert gamma0 > 0
    kinds = {r["label"]: r["classification"] for r in recs}
    assert kinds[(1, 1)] == "adiabatic-following"
    assert kinds[(1, 2)] == "free-ringing"


def test_classification_window_checks(spec):
    pm = toy_set(spec, [3.0 - 2.0j], [0.3], 3.0)
    traj = evolve(assemble_generator(None, pm), np.linspace(0, 10, 101))
    with pytest.raises(WindowTooShortError):
        classify_markovianity(traj, pm, window=(0, 0.2))
    with pytest.raises(WindowTooShortError):
        classify_markovianity(traj, pm, rabi_period=5.0)


def test_rotating_amplitudes_at_off_grid_times(spec):
    pm = toy_set(spec, [3.0 - 0.05j], [0.05], 3.0)
    traj = evolve(assemble_generator(None, pm), np.linspace(0, 100, 11))
    c0, _ = traj.rotating_amplitudes(np.array([12.5]))
    ref = evolve(assemble_generator(None, pm), np.array([0.0, 12.5]))
    assert abs(c0[0] - ref.c0[1]) < 1e-13


def test_time_grid_and_validation():
    g = time_grid(10.0, n_lin=11, n_log=5)
    assert g[0] == 0 and g[-1] == 10.0 and np.all(np.diff(g) > 0)
    with pytest.raises(ValueError):
        time_grid(0.0)
    with pytest.raises(ValueError):
        evolve(assemble_generator(EmitterSpec(1.0, 1.0, 1.0), None), np.array([1.0, 0.5]))


def test_trajectory_table_layout(spec):
    pm = toy_set(spec, [3.0 - 0.05j, 4.0 - 0.1j], [0.05, 0.01], 3.0)
    traj = evolve(assemble_generator(None, pm), np.linspace(0, 5, 6))
    header, data = trajectory_table(traj)
    assert header == ["ct", "abs2_c0", "abs2_b_1_1", "abs2_b_1_2"]
    assert data.shape == (6, 4)
