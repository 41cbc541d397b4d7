"""
TM (electric-type) Mie layer for a homogeneous dielectric sphere.

The radial function of an N-type vector harmonic is written as

    Z_l(k, r) = eta j_l(N k r)                  for r < a
    Z_l(k, r) = alpha j_l(k r) + beta y_l(k r)  for r >= a

with the gauge eta = 1, which makes alpha and beta real for real k.  Matching
the tangential electric and magnetic fields of the N-mode at r = a gives

    eps j_l(N x)         = alpha j_l(x) + beta y_l(x)                 (H_t)
    [rho j_l(rho)]'_{Nx} = alpha [x j_l(x)]' + beta [x y_l(x)]'       (E_t)

with x = k a and eps = N**2.  Solving with the Wronskian x^2 (j y' - j' y) = 1,

    alpha = x (A [x y_l]' - B y_l),   beta = x (B j_l - A [x j_l]'),

where A = eps j_l(N x) and B = [rho j_l(rho)]' at rho = N x.  Both coefficients
are evaluated separately (never through h1) so that the small imaginary part of
alpha + i beta near ultra-narrow resonances keeps full relative accuracy.
"""
from dataclasses import dataclass

import numpy as np

from .bessel import spherical_table, riccati_derivative
from .errors import PoleEvaluationError


@dataclass(frozen=True)
class ResonatorSpec:
    """Homogeneous dielectric sphere in vacuum.

    Parameters
    ----------
    radius : float
        Sphere radius in micrometres.
    index : float
        Refractive index of the sphere (``>= 1``; 1 is the homogeneous limit).
    eps_out : float
        Background permittivity.  Only vacuum (1.0) is supported.
    """

    radius: float = 1.0
    index: float = 3.446
    eps_out: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        if not self.index >= 1.0:
            raise ValueError("refractive index must be >= 1")
        if self.eps_out != 1.0:
            raise NotImplementedError("only a vacuum background (eps_out = 1) is supported")

    @property
    def eps_in(self):
        return self.index**2

    def permittivity(self, r):
        """Relative permittivity at radius ``r``."""
        r = np.asarray(r, dtype=float)
        return np.where(r < self.radius, self.eps_in, self.eps_out)


@dataclass(frozen=True)
class ModeCoefficients:
    """Interface coefficients at wavenumber(s) ``z`` (arrays broadcast with z)."""

    l: int
    z: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    eta: np.ndarray

    @property
    def outgoing(self):
        """alpha + i beta; its zeros are the natural-mode poles."""
        return self.alpha + 1j * self.beta

    @property
    def incoming(self):
        """alpha - i beta."""
        return self.alpha - 1j * self.beta


def _check_l(l):
    l = int(l)
    if l < 1:
        raise ValueError("TM modes need l >= 1 (there is no TM monopole)")
    return l


def _interface_tables(spec, l, z):
    x = np.asarray(z, dtype=complex) * spec.radius
    rho = spec.index * x
    jr = spherical_table(l + 1, "j", rho)
    jx = spherical_table(l + 1, "j", x)
    yx = spherical_table(l + 1, "y", x)
    return x, rho, jr, jx, yx


def _coefficients(spec, l, z, with_derivative=False):
    x, rho, jr, jx, yx = _interface_tables(spec, l, z)
    eps = spec.eps_in
    A = eps * jr[l]
    B = rho * jr[l - 1] - l * jr[l]
    Cj = x * jx[l - 1] - l * jx[l]
    Cy = x * yx[l - 1] - l * yx[l]
    alpha = x * (A * Cy - B * yx[l])
    beta = x * (B * jx[l] - A * Cj)
    if not with_derivative:
        return alpha, beta
    N = spec.index
    ll = l * (l + 1)
    dA = eps * N * (jr[l - 1] - (l + 1) * jr[l] / rho)
    dB = N * (ll / rho**2 - 1.0) * rho * jr[l]
    dCj = (ll / x**2 - 1.0) * x * jx[l]
    dCy = (ll / x**2 - 1.0) * x * yx[l]
    dj = jx[l - 1] - (l + 1) * jx[l] / x
    dy = yx[l - 1] - (l + 1) * yx[l] / x
    dalpha = alpha / x + x * (dA * Cy + A * dCy - dB * yx[l] - B * dy)
    dbeta = beta / x + x * (dB * jx[l] + B * dj - dA * Cj - A * dCj)
    a = spec.radius
    return alpha, beta, a * dalpha, a * dbeta


def match_interface(spec, l, z):
    """Interface coefficients (alpha, beta, eta) with the gauge eta = 1.

    Parameters
    ----------
    spec : ResonatorSpec
    l : int
        Angular momentum, ``l >= 1``.
    z : complex or array_like
        Wavenumber(s) in rad/um, real or complex, nonzero.
    """
    l = _check_l(l)
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ValueError("interface coefficients are undefined at z = 0")
    alpha, beta = _coefficients(spec, l, z)
    return ModeCoefficients(l, z, alpha, beta, np.ones_like(alpha))


def pole_function(spec, l, z):
    """alpha + i beta, whose fourth-quadrant zeros are the natural modes."""
    alpha, beta = _coefficients(spec, _check_l(l), np.asarray(z, dtype=complex))
    return alpha + 1j * beta


def pole_function_and_derivative(spec, l, z):
    """Return ``(f, f')`` with ``f = alpha + i beta`` and the exact z-derivative.

    The derivative uses the Riccati-Bessel equation
    ``psi'' = (l(l+1)/x^2 - 1) psi`` so no finite differences are involved.
    """
    alpha, beta, dalpha, dbeta = _coefficients(spec, _check_l(l), np.asarray(z, dtype=complex), True)
    return alpha + 1j * beta, dalpha + 1j * dbeta


def coefficients_and_derivatives(spec, l, z):
    """alpha, beta and their z-derivatives, for callers that need both parts."""
    return _coefficients(spec, _check_l(l), np.asarray(z, dtype=complex), True)


# Below this value of gamma / |z| the incoming coefficient at a pole is taken
# from the reflection formula of incoming_at_pole instead of direct evaluation.
NARROW_POLE = 1e-6


def incoming_at_pole(spec, l, z):
    """``alpha - i beta`` at poles ``z`` of ``alpha + i beta``.

    For a narrow resonance both coefficients nearly vanish and direct
    evaluation cancels catastrophically.  Because alpha and beta are real on
    the real axis, ``(alpha - i beta)(z) = conj(f(conj z))`` with
    ``f = alpha + i beta``; since ``f(z) = 0`` the trapezoidal rule along the
    segment from ``z`` to ``conj z`` gives

        f(conj z) = (conj z - z) (f'(z) + f'(conj z)) / 2 + O(gamma^3),

    which keeps full relative precision however small ``gamma`` is.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    l = _check_l(l)
    out = np.empty(z.shape, dtype=complex)
    narrow = np.abs(z.imag) < NARROW_POLE * np.abs(z)
    if np.any(~narrow):
        alpha, beta = _coefficients(spec, l, z[~narrow])
        out[~narrow] = alpha - 1j * beta
    if np.any(narrow):
        zn = z[narrow]
        _, d1 = pole_function_and_derivative(spec, l, zn)
        _, d2 = pole_function_and_derivative(spec, l, zn.conj())
        out[narrow] = np.conj((zn.conj() - zn) * (d1 + d2) / 2.0)
    return out


def matching_residuals(spec, l, z):
    """Relative continuity residuals of the tangential H and E quantities at r = a.

    Returns
    -------
    (res_h, res_e) : tuple of ndarray
        ``|inside - outside| / max(|inside|, |outside terms|)`` for each.
    """
    l = _check_l(l)
    coef = match_interface(spec, l, z)
    x, rho, jr, jx, yx = _interface_tables(spec, l, z)
    h_in = spec.eps_in * coef.eta * jr[l]
    h_out = coef.alpha * jx[l] + coef.beta * yx[l]
    h_scale = np.maximum.reduce([np.abs(h_in), np.abs(coef.alpha * jx[l]), np.abs(coef.beta * yx[l])])
    e_in = coef.eta * riccati_derivative(jr, rho)[l]
    djx = riccati_derivative(jx, x)[l]
    dyx = riccati_derivative(yx, x)[l]
    e_out = coef.alpha * djx + coef.beta * dyx
    e_scale = np.maximum.reduce([np.abs(e_in), np.abs(coef.alpha * djx), np.abs(coef.beta * dyx)])
    return np.abs(h_in - h_out) / h_scale, np.abs(e_in - e_out) / e_scale


def unnormalized_Z(spec, l, z, r, coef=None):
    """Radial function without normalization, vectorized over ``r`` for one ``z``."""
    l = _check_l(l)
    r = np.asarray(r, dtype=float)
    z = complex(z)
    if coef is None:
        coef = match_interface(spec, l, z)
    out = np.empty(r.shape, dtype=complex)
    inside = r < spec.radius
    if np.any(inside):
        out[inside] = complex(coef.eta) * spherical_table(l, "j", spec.index * z * r[inside])[l]
    outside = ~inside
    if np.any(outside):
        zr = z * r[outside]
        out[outside] = complex(coef.alpha) * spherical_table(l, "j", zr)[l] + complex(coef.beta) * spherical_table(l, "y", zr)[l]
    return out


def radial_Z(spec, l, z, r, with_norm=False):
    """Piecewise radial function Z_l at wavenumber ``z`` and radii ``r``.

    With ``with_norm`` the value is divided by the square root of the reduced
    norm, ``sqrt(I_M / R) = sqrt((alpha^2 + beta^2) / (2 k^2))``.  This is only
    defined on the real axis; at or near a complex pole use
    :func:`pseudomode.pseudomodes.pseudomode_radial` instead.
    """
    coef = match_interface(spec, l, z)
    value = unnormalized_Z(spec, l, z, r, coef)
    if not with_norm:
        return value
    z = complex(z)
    prod = complex(coef.outgoing * coef.incoming)
    scale = abs(complex(coef.alpha)) ** 2 + abs(complex(coef.beta)) ** 2
    if z.imag != 0.0 or abs(prod) <= 1e-10 * scale:
        raise PoleEvaluationError("pole evaluation: use pseudomode_radial")
    return value / np.sqrt(prod.real / (2.0 * z.real**2))


def mode_norm_IM(spec, l, k):
    """Reduced normalization ``I_M / R = (alpha^2 + beta^2) / (2 k^2)`` at real k > 0."""
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise ValueError("k must be positive")
    coef = match_interface(spec, l, k)
    return (coef.alpha.real**2 + coef.beta.real**2) / (2.0 * k**2)


def box_norm(spec, l, k, R):
    """Exact finite-box normalization ``int_0^R eps(r)^2 Z_l(k r)^2 r^2 dr``.

    Uses the antiderivative ``int x^2 C_l^2 dx = x^3 (C_l^2 - C_{l-1} C_{l+1}) / 2``
    valid for any fixed combination C of j and y.  The weight eps^2 makes the
    radial integral equal to the volume integral of eps |N|^2 divided by
    l(l+1).
    """
    l = _check_l(l)
    k = np.asarray(k, dtype=float)
    a, N, eps = spec.radius, spec.index, spec.eps_in
    coef = match_interface(spec, l, k)
    al, be = coef.alpha.real, coef.beta.real

    def G(table):
        return 0.5 * (table[l] ** 2 - table[l - 1] * table[l + 1])

    rho = N * k * a
    jr = spherical_table(l + 1, "j", rho).real
    inner = eps**2 * rho**3 * G(jr) / (N * k) ** 3

    def outer_at(x):
        C = al * spherical_table(l + 1, "j", x).real + be * spherical_table(l + 1, "y", x).real
        return x**3 * G(C)

    outer = (outer_at(k * R) - outer_at(k * a)) / k**3
    return inner + outer


@dataclass(frozen=True)
class CrossSection:
    """Partial-wave scattering cross-section and its convergence indicator."""

    sigma: np.ndarray
    last_fraction: np.ndarray


def scattering_term(spec, l, k):
    """Single partial wave ``(2l+1) |beta / (alpha + i beta)|^2 / k^2``."""
    k = np.asarray(k, dtype=float)
    coef = match_interface(spec, l, k)
    return (2 * l + 1) * np.abs(coef.beta / coef.outgoing) ** 2 / k**2


def scattering_terms(spec, k, l_max):
    """Per-l terms for ``l = 1..l_max``, shape (l_max, len(k))."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return np.array([scattering_term(spec, l, k) for l in range(1, l_max + 1)])


def scattering_cross_section(spec, k, l_max):
    """Partial sum of the TM scattering cross-section over ``1 <= l <= l_max``.

    Returns
    -------
    CrossSection
        ``sigma`` in um^2 and ``last_fraction``, the relative contribution of
        the l = l_max term (small values certify convergence of the sum).
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise ValueError("k must be positive")
    terms = scattering_terms(spec, k, l_max)
    sigma = terms.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        last = np.where(sigma > 0, terms[-1] / np.where(sigma > 0, sigma, 1.0), 0.0)
    if k.ndim == 0:
        return CrossSection(float(sigma[0]), float(last[0]))
    return CrossSection(sigma, last)


def spectrum_scan(spec, l_values, k):
    """Resonance-enhancement spectrum ``1/I_M`` and cross-section terms on a k grid.

    Returns
    -------
    dict
        ``k``, ``l`` (list), ``IM_reduced`` and ``inv_IM`` (arrays of shape
        (len(l), len(k))), ``sigma_terms`` (same shape) and the ``total`` rows.
    """
    k = np.asarray(k, dtype=float)
    l_values = [int(l) for l in l_values]
    IM = np.array([mode_norm_IM(spec, l, k) for l in l_values])
    sig = np.array([scattering_term(spec, l, k) for l in l_values])
    return {
        "k": k,
        "l": l_values,
        "IM_reduced": IM,
        "inv_IM": 1.0 / IM,
        "sigma_terms": sig,
        "inv_IM_total": (1.0 / IM).sum(axis=0),
        "sigma_total": sig.sum(axis=0),
    }
