import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import spherical_jn

from pseudomode.errors import PoleEvaluationError
from pseudomode.mie import (ResonatorSpec, _coefficients, box_norm, match_interface, matching_residuals,
                            mode_norm_IM, radial_Z, scattering_cross_section, spectrum_scan)


def test_continuity_at_random_real_k(spec, rng):
    k = rng.uniform(0.1, 20, 100)
    for l in (1, 5, 8, 30):
        res_h, res_e = matching_residuals(spec, l, k)
        assert res_h.max() < 1e-10 and res_e.max() < 1e-10


def test_continuity_off_axis(spec):
    z = np.array([3.6 - 0.01j, 10.0 - 2.0j, 0.5 - 0.3j])
    res_h, res_e = matching_residuals(spec, 8, z)
    assert res_h.max() < 1e-10 and res_e.max() < 1e-10


def test_homogeneous_limit_has_no_scattering():
    free = ResonatorSpec(1.0, 1.0)
    k = np.linspace(0.2, 15, 50)
    for l in (1, 4, 9):
        c = match_interface(free, l, k)
        assert np.max(np.abs(c.beta)) < 1e-12 * np.max(np.abs(c.alpha))
        assert np.allclose(c.alpha, c.eta)


def test_gauge_is_real_on_real_axis(spec):
    c = match_interface(spec, 5, np.linspace(0.3, 12, 40))
    assert np.max(np.abs(c.alpha.imag)) < 1e-12 * np.max(np.abs(c.alpha))
    assert np.max(np.abs(c.beta.imag)) < 1e-12 * np.max(np.abs(c.beta))


@settings(max_examples=60, deadline=None)
@given(re=st.floats(0.1, 20.0), im=st.floats(-5.0, 5.0), l=st.sampled_from([1, 3, 8, 20]))
def test_schwarz_reflection(spec, re, im, l):
    z = np.array([complex(re, im)])
    a1, b1 = _coefficients(spec, l, z)
    a2, b2 = _coefficients(spec, l, z.conj())
    assert abs(a2[0] - np.conj(a1[0])) <= 1e-12 * abs(a1[0])
    assert abs(b2[0] - np.conj(b1[0])) <= 1e-12 * abs(b1[0])


def test_radial_regular_at_origin_and_matched(spec):
    assert abs(radial_Z(spec, 5, 2.0, np.array([0.0]))[0]) == 0
    k = 3.1
    # Z and (r Z)' in the matched combination: Z continuous up to eps, (rZ)' continuous.
    inside = radial_Z(spec, 5, k, np.array([1 - 1e-9]))[0]
    outside = radial_Z(spec, 5, k, np.array([1 + 1e-9]))[0]
    assert abs(outside - spec.eps_in * inside) < 1e-6 * abs(outside)


def test_radial_norm_homogeneous_limit():
    free = ResonatorSpec(1.0, 1.0)
    k = 2.7
    r = np.linspace(0.1, 3.0, 9)
    c = match_interface(free, 4, k)
    expected = spherical_jn(4, k * r) * c.alpha.real / np.sqrt(c.alpha.real**2 / (2 * k**2))
    assert np.allclose(radial_Z(free, 4, k, r, with_norm=True).real, expected, rtol=1e-12)


def test_norm_refused_at_complex_argument(spec):
    with pytest.raises(PoleEvaluationError):
        radial_Z(spec, 8, 3.668 - 1e-6j, np.array([1.0]), with_norm=True)


def test_resonance_is_local_minimum_of_norm(spec):
    k = np.linspace(3.660, 3.675, 3001)
    IM = mode_norm_IM(spec, 8, k)
    i = np.argmin(IM)
    assert abs(2 * np.pi / k[i] - 1.72) < 0.01 * 1.72


def test_box_norm_matches_quadrature(spec):
    l, k, R = 3, 1.7, 12.0
    c = match_interface(spec, l, k)

    def integrand(r):
        if r < spec.radius:
            return spec.eps_in**2 * spherical_jn(l, spec.index * k * r) ** 2 * r**2
        from scipy.special import spherical_yn
        return (c.alpha.real * spherical_jn(l, k * r) + c.beta.real * spherical_yn(l, k * r)) ** 2 * r**2

    inner = quad(integrand, 0, 1, limit=200)[0]
    outer = quad(integrand, 1, R, limit=400)[0]
    assert abs(box_norm(spec, l, k, R) / (inner + outer) - 1) < 1e-9


def test_cross_section_converges(spec):
    cs = scattering_cross_section(spec, np.array([2.0, 3.66]), 30)
    assert np.all(cs.sigma > 0)
    assert np.all(cs.last_fraction < 1e-10)


def test_spectrum_scan_shapes(spec):
    k = np.linspace(1, 5, 11)
    s = spectrum_scan(spec, [1, 2, 3], k)
    assert s["inv_IM"].shape == (3, 11)
    assert np.allclose(s["inv_IM_total"], s["inv_IM"].sum(axis=0))


def test_rejects_invalid(spec):
    with pytest.raises(ValueError):
        match_interface(spec, 0, 1.0)
    with pytest.raises(ValueError):
        match_interface(spec, 3, 0.0)
    with pytest.raises(ValueError):
        ResonatorSpec(1.0, 0.5)
    with pytest.raises(NotImplementedError):
        ResonatorSpec(1.0, 2.0, eps_out=2.0)
