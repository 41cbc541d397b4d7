import mpmath
import numpy as np
import pytest

from pseudomode.dynamics import assemble_generator, evolve
from pseudomode.errors import TrajectoryRangeError
from pseudomode.fields import (field_amplitude, intensity_map, light_cone_leakage, mode_field, pseudomode_portrait,
                               retardation, scaled_h1, surface_distance)
from pseudomode.pseudomodes import CALIBRATED_R_EMIT


@pytest.fixture(scope="module")
def small_set(pm10):
    return pm10.subset([(5, 4), (8, 3), (1, 1), (12, 2), (3, 5)])


@pytest.fixture(scope="module")
def short_traj(small_set):
    return evolve(assemble_generator(None, small_set), np.linspace(0.0, 12.0, 61))


def test_retardation_conventions(spec):
    assert surface_distance(spec, 3.0) == 2.0
    assert np.isclose(surface_distance(spec, 0.5), 3.446 * 0.5)
    assert surface_distance(spec, 0.5, "surface") == -0.5
    assert np.isclose(retardation(spec, 4.0, 0.9), 3.0 + 3.446 * 0.1)
    with pytest.raises(ValueError):
        surface_distance(spec, 1.0, "vacuum")


@pytest.mark.parametrize("l, x", [(3, 2.0 - 0.5j), (8, 40.0 - 3.0j), (12, 400.0 - 60.0j), (20, 5000.0 - 1e3j)])
def test_scaled_hankel_against_mpmath(l, x):
    mpmath.mp.dps = 40
    xm = mpmath.mpc(x.real, x.imag)
    ref = mpmath.sqrt(mpmath.pi / (2 * xm)) * mpmath.besselj(l + 0.5, xm) \
        + 1j * mpmath.sqrt(mpmath.pi / (2 * xm)) * mpmath.bessely(l + 0.5, xm)
    ref = complex(ref * mpmath.exp(-1j * xm))
    got = scaled_h1(l, np.array([x]))[l][0]
    assert abs(got / ref - 1) < 1e-11


def test_field_is_zero_before_delay(small_set, short_traj):
    r = 6.0
    D = retardation(small_set.spec, r, small_set.emitter.r_emit)
    t = np.array([0.0, D - 1e-9, D + 0.5])
    E = field_amplitude(r, t, short_traj, small_set)
    assert np.all(E[:, :2] == 0)
    assert np.any(E[:, 2] != 0)


def test_zero_map_when_filter_excludes_everything(small_set, short_traj):
    fmap = intensity_map([2.0, 4.0], np.linspace(0, 10, 11), short_traj, small_set,
                         ("only", []))
    assert np.all(fmap.intensity == 0)
    assert np.all(fmap.normalized() == 0)


def test_amplitudes_add_over_disjoint_filters(small_set, short_traj):
    r = np.linspace(0.2, 6.0, 7)
    t = np.linspace(0, 12, 25)
    total = intensity_map(r, t, short_traj, small_set, keep_amplitude=True).amplitude
    one = intensity_map(r, t, short_traj, small_set, ("only", [(8, 3), (1, 1)]), keep_amplitude=True).amplitude
    rest = intensity_map(r, t, short_traj, small_set, ("except", [(8, 3), (1, 1)]), keep_amplitude=True).amplitude
    assert np.max(np.abs(total - one - rest)) <= 1e-12 * np.max(np.abs(total))


def test_map_agrees_with_pointwise_evaluation(small_set, short_traj):
    r = np.array([0.5, 3.0])
    t = np.linspace(0, 12, 13)
    fmap = intensity_map(r, t, short_traj, small_set)
    for i, ri in enumerate(r):
        E = field_amplitude(ri, t, short_traj, small_set)
        # The two routes sum the modes in a different order; compare against the row peak.
        pointwise = np.abs(E[0]) ** 2 + np.abs(E[1]) ** 2
        assert np.max(np.abs(fmap.intensity[i] - pointwise)) < 1e-9 * pointwise.max()


def test_frame_of_trajectory_does_not_matter(small_set, short_traj):
    t = np.linspace(0, 12, 13)
    a = field_amplitude(3.0, t, short_traj, small_set)
    b = field_amplitude(3.0, t, short_traj.to_frame("lab"), small_set)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-300)


def test_interpolated_path_requires_coverage(small_set):
    traj = evolve(assemble_generator(None, small_set), np.linspace(0, 2, 21), method="ode")
    with pytest.raises(TrajectoryRangeError):
        field_amplitude(1.5, np.array([10.0]), traj, small_set)


def test_mode_field_finite_far_outside(small_set):
    mf = mode_field(small_set, 500.0)
    assert np.all(np.isfinite(mf.radial)) and np.all(np.isfinite(mf.polar))


def test_coupling_recovered_from_field_at_emitter(pm10):
    # gbar_n = d * radial field coefficient at r_emit once the retardation phase is removed.
    sub = pm10.subset([(8, 3), (5, 4), (2, 1)])
    mf = mode_field(sub, CALIBRATED_R_EMIT)
    g = sub.emitter.dipole * mf.radial * np.exp(1j * sub.z * mf.delay) / 1j
    assert np.allclose(g, sub.gbar, rtol=1e-10)


def test_light_cone_on_short_map(small_set, short_traj, spec):
    fmap = intensity_map(np.linspace(0.05, 10, 40), np.linspace(0, 12, 61), short_traj, small_set)
    assert light_cone_leakage(fmap, spec, small_set.emitter.r_emit) < 1e-10
    rows = fmap.records()
    assert rows.shape == (40 * 61, 3)


def test_map_rejects_unsorted_grid(small_set, short_traj):
    with pytest.raises(ValueError):
        intensity_map([3.0, 1.0], [0.0, 1.0], short_traj, small_set)


def test_portrait_shape_and_growth(small_set):
    r = np.array([0.5, 1.5, 5.0, 15.0])
    th = np.linspace(0.1, np.pi - 0.1, 7)
    img = pseudomode_portrait(small_set, (1, 1), r, th)
    assert img.shape == (4, 7)
    assert np.all(img >= 0)
    # Broad pseudomodes diverge outside the sphere.
    assert img[3].max() > img[2].max()
