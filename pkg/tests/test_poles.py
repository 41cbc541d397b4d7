import numpy as np
import pytest

from pseudomode.mie import pole_function
from pseudomode.poles import (count_zeros, enumerate_poles, load_catalog, poles_for_l, refine_pole,
                              save_catalog, scaled_residual)

# Pole positions from 40-digit mpmath Newton iteration on alpha + i beta.
FROZEN_POLES = {
    (8, 3): 3.6680049780912574493 - 2.2956859156319336762e-6j,
    (5, 4): 3.6643361896161295869 - 0.0091446082030908113647j,
    (1, 1): 1.0600306668209186228 - 0.48946465181701620993j,
    (25, 4): 10.44199916978349542 - 4.5877069821231240464e-16j,
}


@pytest.mark.parametrize("label", list(FROZEN_POLES))
def test_positions_match_extended_precision(poles, label):
    z = poles.get(*label).z
    ref = FROZEN_POLES[label]
    assert abs(z.real - ref.real) < 1e-13 * abs(ref)
    # The imaginary part keeps full relative accuracy even at gamma ~ 1e-16.
    assert abs(z.imag - ref.imag) < 1e-9 * abs(ref.imag)


def test_census_and_residuals(poles):
    assert len(poles) == 613
    z = poles.z
    assert np.all(z.real > 0) and np.all(z.imag < 0)
    assert max(p.residual for p in poles) < 1e-10


def test_labels_follow_increasing_real_part(poles):
    for l in range(1, 31):
        re = [p.z.real for p in poles.for_l(l)]
        assert [p.n for p in poles.for_l(l)] == list(range(1, len(re) + 1))
        assert np.all(np.diff(re) > 0)


def test_resonance_pair_near_anchor_wavelength(poles):
    for label in [(5, 4), (8, 3)]:
        assert abs(2 * np.pi / poles.get(*label).omega / 1.72 - 1) < 0.01


def test_conjugate_is_zero_of_incoming(spec, poles):
    for p in poles.for_l(6):
        from pseudomode.mie import _coefficients
        a, b = _coefficients(spec, 6, np.array([np.conj(p.z)]))
        f = pole_function(spec, 6, np.array([p.z]))
        assert abs(a[0] - 1j * b[0]) <= abs(f[0]) + 1e-10 * (abs(a[0]) + abs(b[0])) + 1e-300


def test_window_monotonicity(spec):
    small = poles_for_l(spec, 4, 6.0, -2.0)
    large = poles_for_l(spec, 4, 9.0, -4.0)
    zl = np.array([p.z for p in large])
    for p in small:
        assert np.min(np.abs(zl - p.z)) < 1e-8


def test_count_certificate_small_window(spec):
    rect = (0.01, 8.0, -3.0, 0.5)
    found = poles_for_l(spec, 3, 8.0, -3.0)
    assert count_zeros(spec, 3, rect) == len(found)


def test_empty_window(spec):
    ps = enumerate_poles(spec, 1, re_max=0.2, im_min=-0.05)
    assert len(ps) == 0


def test_refine_from_nearby_seed(spec):
    ref = FROZEN_POLES[(5, 4)]
    z = refine_pole(spec, 5, ref + 0.003).z
    assert abs(z - ref) < 1e-12


def test_scaled_residual_large_off_pole(spec):
    assert scaled_residual(spec, 5, np.array([3.0 - 0.5j]))[0] > 1e-3


def test_catalog_round_trip(spec, poles, tmp_path):
    path = tmp_path / "cat.json"
    save_catalog(poles, path)
    back = load_catalog(spec, path)
    assert back.labels == poles.labels
    assert np.array_equal(back.z, poles.z)
    from pseudomode.mie import ResonatorSpec
    with pytest.raises(ValueError):
        load_catalog(ResonatorSpec(1.0, 2.0), path)


def test_rejects_empty_window(spec):
    with pytest.raises(ValueError):
        enumerate_poles(spec, 3, re_max=0.001)
