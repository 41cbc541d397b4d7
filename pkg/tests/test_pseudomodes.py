import numpy as np
import pytest

from pseudomode.pseudomodes import (CALIBRATED_R_EMIT, EmitterSpec, build_pseudomodes, calibrate_emitter_radius,
                                    continuum_coupling_g, continuum_density, damped_rabi_period, gbar_squared,
                                    numerical_residue, pole_Z, pseudomode_radial)

# -2 pi i Res of the continued continuum density at each pole, r_emit = 0.94613,
# d = 10 D, from 40-digit mpmath contour integration on a circle around the pole.
FROZEN_GBAR2 = {
    (8, 3): 4.73625835017077e-11 + 2.8663569777683e-16j,
    (5, 4): 1.56296401433413e-11 + 2.82368462209331e-13j,
    (1, 1): 1.46161690194171e-13 - 1.08186392603427e-12j,
    (25, 4): 1.54548969509436e-9 - 2.63890298477249e-24j,
}


@pytest.mark.parametrize("label", list(FROZEN_GBAR2))
def test_pole_weights_match_contour_oracle(pm10, label):
    g2 = pm10.gbar_of(label) ** 2
    ref = FROZEN_GBAR2[label]
    assert abs(g2 - ref) < 1e-9 * abs(ref)


def test_branch_rule(pm10):
    g = pm10.gbar
    assert np.all(g.real >= 0)


def test_residue_consistency_with_numerical_contour(spec, poles):
    em = EmitterSpec(CALIBRATED_R_EMIT, 10.0, 3.668)
    for label in [(5, 4), (1, 1), (12, 2), (3, 5)]:
        p = poles.get(*label)
        radius = 0.1 * min(p.gamma, 0.05)
        res = numerical_residue(lambda z: continuum_density(spec, em, p.l, z), p.z, radius, n=128)
        closed = gbar_squared(spec, em, p.l, p.z)[0]
        assert abs(-2j * np.pi * res - closed) < 1e-6 * abs(closed)


def test_emitter_outside_sphere(spec, poles):
    em = EmitterSpec(1.3, 10.0, 3.668)
    p = poles.get(5, 4)
    res = numerical_residue(lambda z: continuum_density(spec, em, 5, z), p.z, 1e-4, n=128)
    assert abs(-2j * np.pi * res - gbar_squared(spec, em, 5, p.z)[0]) < 1e-6 * abs(res * 2 * np.pi)


def test_linear_in_dipole(pm10):
    pm100 = pm10.scaled(100.0)
    assert np.allclose(pm100.gbar, 10 * pm10.gbar, rtol=0, atol=0)


def test_zero_dipole(spec, poles):
    pm = build_pseudomodes(spec, poles.subset([(8, 3)]), EmitterSpec(CALIBRATED_R_EMIT, 0.0, 3.668))
    assert pm.gbar[0] == 0


def test_rabi_anchor_single_mode(pm10):
    # |2 gbar| of (8,3) sets the Rabi frequency 2 pi / 4.63e5 within 5 %.
    g = abs(pm10.gbar_of((8, 3)))
    assert abs(2 * g / (2 * np.pi / 4.63e5) - 1) < 0.05


def test_calibration_reproduces_constant(spec, poles):
    r = calibrate_emitter_radius(spec, poles.get(8, 3))
    assert abs(r - CALIBRATED_R_EMIT) < 1e-5
    g2 = gbar_squared(spec, EmitterSpec(r, 10.0, 3.668), 8, poles.get(8, 3).z)[0]
    assert abs(damped_rabi_period(g2, poles.get(8, 3).gamma) / 4.63e5 - 1) < 1e-9


def test_radial_function_continuous_at_surface(spec, poles):
    p = poles.get(5, 4)
    z_in = pole_Z(spec, 5, p.z, np.array([1 - 1e-10]))[0]
    z_out = pole_Z(spec, 5, p.z, np.array([1 + 1e-10]))[0]
    assert abs(z_out - spec.eps_in * z_in) < 1e-6 * abs(z_out)


def test_pseudomode_grows_outside(spec, poles):
    p = poles.get(1, 1)
    v = np.abs(pseudomode_radial(spec, p, np.array([5.0, 10.0, 20.0])))
    assert np.all(np.diff(v) > 0)


def test_branch_sign_flips_radial(spec, poles):
    p = poles.get(5, 4)
    r = np.array([0.5, 2.0])
    assert np.allclose(pseudomode_radial(spec, p, r, sign=-1.0), -pseudomode_radial(spec, p, r))


def test_real_axis_coupling_squares_to_density(spec):
    em = EmitterSpec(CALIBRATED_R_EMIT, 10.0, 3.668)
    k = np.array([1.0, 3.0, 7.5])
    g = continuum_coupling_g(spec, em, 4, k)
    assert np.allclose(g**2, continuum_density(spec, em, 4, k).real, rtol=1e-12)


def test_emitter_validation():
    with pytest.raises(ValueError):
        EmitterSpec(0.0, 10.0, 3.6)
    with pytest.raises(ValueError):
        EmitterSpec(1.0, -1.0, 3.6)
    with pytest.raises(ValueError):
        EmitterSpec(1.0, 1.0, 3.6, theta=0.3)
