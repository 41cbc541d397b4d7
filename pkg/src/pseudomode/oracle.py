"""
Independent checks of the pseudomode reduction.

Two brute-force routes are provided.

Finite box
    The radiating continuum is quantized in a sphere of radius R with the
    radial condition Z_l(k R) = 0.  Every box mode is an ordinary harmonic
    oscillator and the emitter plus all box modes form a Hermitian
    (arrowhead) single-excitation problem that is integrated directly.

Kernel quadrature
    The memory kernel of the emitter,

        I_l(r, r', tau) = int_0^inf F(k) exp(-i k tau) dk,
        F(k) = (2/pi) k Z(k r) Z(k r') / (alpha^2 + beta^2),

    is integrated along the real axis and compared with the residue sum
    sum_n w_n exp(-i z_n tau) over the fourth-quadrant poles.

Real-axis Bessel functions in this module come from scipy rather than from
the complex-argument routines used by the pole machinery, so the quadrature
side does not share code with the side under test.
"""
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import exp1, roots_legendre, spherical_jn, spherical_yn

from .bessel import spherical_table
from .errors import ConvergenceError, MissedRootError, TailConvergenceError
from .mie import _coefficients, box_norm, incoming_at_pole, match_interface, pole_function_and_derivative
from .poles import _newton, poles_for_l
from .pseudomodes import angular_weight, pole_Z
from .units import KAPPA

MIN_BOX_RATIO = 100.0
MAX_BOX_K = 25.0
SMALL_K = 0.05


# ----------------------------------------------------------------------------
# Real-axis radial functions (scipy)
# ----------------------------------------------------------------------------

def _real_coefficients(spec, l, k, with_scale=False):
    x = k * spec.radius
    rho = spec.index * x
    eps = spec.eps_in
    jr, jrm = spherical_jn(l, rho), spherical_jn(l - 1, rho)
    jl, jm = spherical_jn(l, x), spherical_jn(l - 1, x)
    yl, ym = spherical_yn(l, x), spherical_yn(l - 1, x)
    A = eps * jr
    B = rho * jrm - l * jr
    Cj = x * jm - l * jl
    Cy = x * ym - l * yl
    alpha, beta = x * (A * Cy - B * yl), x * (B * jl - A * Cj)
    if with_scale:
        # Size of the cancelling terms: the rounding floor of alpha and beta.
        scale = np.abs(x) * (np.abs(A * Cy) + np.abs(B * yl) + np.abs(B * jl) + np.abs(A * Cj))
        return alpha, beta, scale
    return alpha, beta


def _real_Z(spec, l, k, r, alpha, beta):
    if r < spec.radius:
        return spherical_jn(l, spec.index * k * r)
    return alpha * spherical_jn(l, k * r) + beta * spherical_yn(l, k * r)


def kernel_integrand(spec, l, r, r_prime, k):
    """``F(k) = (2/pi) k Z(k r) Z(k r') / (alpha^2 + beta^2)`` for real ``k > 0``."""
    k = np.asarray(k, dtype=float)
    alpha, beta = _real_coefficients(spec, l, k)
    Z1 = _real_Z(spec, l, k, r, alpha, beta)
    Z2 = _real_Z(spec, l, k, r_prime, alpha, beta)
    return (2.0 / np.pi) * k * Z1 * Z2 / (alpha**2 + beta**2)


# ----------------------------------------------------------------------------
# Residue weights and the pole list
# ----------------------------------------------------------------------------

def kernel_residue_weight(spec, l, z, r, r_prime):
    """``w = -2 pi i Res[F, z]`` at poles ``z`` (array)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    _, fp = pole_function_and_derivative(spec, l, z)
    inc = incoming_at_pole(spec, l, z)
    Z1 = np.array([pole_Z(spec, l, zi, r)[0] for zi in z])
    Z2 = np.array([pole_Z(spec, l, zi, r_prime)[0] for zi in z])
    return -4j * z * Z1 * Z2 / (inc * fp)


def _model_constants(spec, l):
    N = spec.index
    a = spec.radius
    rho = (N - 1.0) / (N + 1.0)
    damp = np.arctanh(1.0 / N)
    return N, a, rho, damp


def model_poles(spec, l, m):
    """Asymptotic interior-resonance poles ``(m pi + l pi/2 - i artanh(1/N)) / (N a)``."""
    N, a, _, damp = _model_constants(spec, l)
    m = np.asarray(m, dtype=float)
    return (m * np.pi + l * np.pi / 2 - 1j * damp) / (N * a)


def model_weights(spec, l, k, r, r_prime):
    """Asymptotic residue weights of the interior series for ``r, r' >= a``."""
    N, a, rho, _ = _model_constants(spec, l)
    omega = r + r_prime - 2 * a
    return -(1 - rho**2) / (2 * N * a * rho * k * r * r_prime) * np.exp(1j * omega * k)


@dataclass
class KernelPoles:
    """All poles of one l used by the residue side.

    ``z``/``w`` hold exact poles (certified window plus Newton-continued
    interior series) and their weights; ``tail`` describes the asymptotic
    continuation beyond the last exact pole.
    """

    l: int
    r: float
    r_prime: float
    z: np.ndarray
    w: np.ndarray
    m_next: int
    shift: complex
    scale: complex
    k_last: float


def kernel_poles(spec, l, r, r_prime, k_exact=400.0, window_re=20.0, window_im=-25.0):
    """Exact poles up to ``Re z = k_exact`` and the matching data for the tail.

    Poles with ``Re z < window_re`` come from the certified enumeration down
    to ``window_im``; beyond that the interior series is followed by Newton
    iteration from the asymptotic model.  The offset and weight ratio of the
    last exact pole relative to the model are stored so the tail can be
    corrected to first order in ``1/k``.
    """
    found = poles_for_l(spec, l, window_re, window_im)
    z = [p.z for p in found]
    N, a, _, _ = _model_constants(spec, l)
    m0 = int(np.floor((window_re * N * a - l * np.pi / 2) / np.pi)) - 2
    m1 = int(np.ceil((k_exact * N * a - l * np.pi / 2) / np.pi))
    ms = np.arange(max(m0, 0), m1 + 1)
    seeds = model_poles(spec, l, ms)
    zs, ok = _newton(spec, l, seeds)
    if not np.all(ok):
        raise ConvergenceError("interior-series continuation failed")
    if np.any(np.abs(zs - seeds) > 0.3 * np.pi / (N * a)):
        raise ConvergenceError("interior-series continuation jumped between poles")
    keep = zs.real >= window_re
    z = np.array(z + list(zs[keep]), dtype=complex)
    z = z[np.argsort(z.real)]
    w = kernel_residue_weight(spec, l, z, r, r_prime)
    # Matching data for the asymptotic tail.
    z_last, m_last = zs[-1], ms[-1]
    k_model = model_poles(spec, l, m_last)
    w_last = kernel_residue_weight(spec, l, np.array([z_last]), r, r_prime)[0]
    w_model = model_weights(spec, l, k_model, r, r_prime)
    return KernelPoles(l, r, r_prime, z, w, int(m_last) + 1, complex(z_last - k_model),
                       complex(w_last / w_model - 1.0), float(k_model.real))


def pole_tail_sum(spec, kp, tau, n_direct=200000):
    """Residue contributions of the model poles beyond the exact list.

    The leading part is a Lerch transcendent; the first-order corrections
    (pole shift ``delta K/k`` and weight change ``epsilon K/k``) decay like
    ``1/k^2`` and are summed directly.
    """
    l, r, rp = kp.l, kp.r, kp.r_prime
    N, a, rho, damp = _model_constants(spec, l)
    omega = r + rp - 2 * a
    C = -(1 - rho**2) / (2 * N * a * rho * r * rp)
    lag = tau - omega
    q = np.exp(-1j * np.pi * lag / (N * a))
    shift = kp.m_next + l / 2.0 - 1j * damp / np.pi
    k0 = model_poles(spec, l, kp.m_next)
    lead = C * (N * a / np.pi) * np.exp(-1j * k0 * lag) * complex(mpmath.lerchphi(q, 1, shift))
    m = kp.m_next + np.arange(n_direct)
    k = model_poles(spec, l, m)
    base = C / k * np.exp(-1j * k * lag)
    ratio = kp.k_last / k.real
    corr = np.sum(base * (kp.scale - 1j * lag * kp.shift) * ratio)
    return complex(lead + corr)


def residue_sum_Il(spec, l, r, r_prime, tau, kp=None, delay=None):
    """Residue side of the kernel identity, ``sum_n w_n exp(-i z_n tau)``.

    Returns exactly 0 for ``tau`` below the retardation ``(r - a) + (r' - a)``
    (or ``delay`` when given).
    """
    if kp is None:
        kp = kernel_poles(spec, l, r, r_prime)
    if delay is None:
        delay = (max(r, spec.radius) - spec.radius) + (max(r_prime, spec.radius) - spec.radius)
    if tau < delay:
        return 0j
    lag_terms = kp.w * np.exp(-1j * kp.z * tau)
    return complex(np.sum(lag_terms) + pole_tail_sum(spec, kp, tau))


def ray_integrand(spec, l, r, r_prime, k):
    """Kernel integrand ``F(k)`` continued to complex ``k`` (``r, r' >= a``).

    With ``Z = (in h1 + out h2) / 2`` and ``q = in / out`` the integrand is
    ``(k / 2 pi) (h2 + q h1)(h2' + q h1') / q``.  ``q`` is formed from Hankel
    functions directly, so nothing cancels where the incoming coefficient is
    exponentially small (deep in the lower half plane).  Below
    ``|k| a = l/2 + 2`` the Hankel combination itself cancels (it tends to
    ``2 j_l``), and the continued ``alpha, beta`` form is used instead; the
    switch keeps both pieces accurate to about 1e-9.
    """
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    out = np.empty(k.shape, dtype=complex)
    small = np.abs(k) * spec.radius < 0.5 * l + 2.0
    if np.any(small):
        ks = k[small]
        alpha, beta = _coefficients(spec, l, ks)

        def outer(rr):
            return alpha * spherical_table(l, "j", ks * rr)[l] + beta * spherical_table(l, "y", ks * rr)[l]

        out[small] = (2.0 / np.pi) * ks * outer(r) * outer(r_prime) / (alpha**2 + beta**2)
    if np.all(small):
        return out
    kl = k[~small]
    x = kl * spec.radius
    jr = spherical_table(l, "j", spec.index * x)
    A = spec.eps_in * jr[l]
    B = spec.index * x * jr[l - 1] - l * jr[l]
    ratio = B / A
    h1 = spherical_table(l, "h1", x)
    h2 = spherical_table(l, "h2", x)
    C1 = x * h1[l - 1] - l * h1[l]
    C2 = x * h2[l - 1] - l * h2[l]
    q = -(C2 - ratio * h2[l]) / (C1 - ratio * h1[l])

    def radial(rr):
        if rr == spec.radius:
            return h2[l] + q * h1[l]
        return spherical_table(l, "h2", kl * rr)[l] + q * spherical_table(l, "h1", kl * rr)[l]

    out[~small] = kl / (2 * np.pi) * radial(r) * radial(r_prime) / q
    return out


def background_ray(spec, l, r, r_prime, tau, tilt=0.05, k_max=None, n=4000):
    """Non-resonant background ``B(tau)``: the integral along a ray in the fourth quadrant.

    Rotating the half-line integration onto ``k = s exp(-i (pi/2 - tilt))``
    picks up exactly the poles between the ray and the real axis, so
    ``quadrature = residues + B``.  ``B`` decays like ``exp(-s tau)`` along the ray.
    """
    if min(r, r_prime) < spec.radius:
        raise ValueError("the ray integrand is implemented for r, r' >= a")
    direction = np.exp(-1j * (np.pi / 2 - tilt))
    if k_max is None:
        k_max = 60.0 / max(tau, 0.5) + 20.0
    x, wq = roots_legendre(64)
    edges = np.linspace(0.0, k_max, max(n // 64, 8) + 1)
    total = 0j
    for s0, s1 in zip(edges[:-1], edges[1:]):
        s = 0.5 * (s1 - s0) * x + 0.5 * (s1 + s0)
        # F vanishes like k^(2l+1) at the origin, where y_l overflows for large l.
        live = s > SMALL_K
        if not np.any(live):
            continue
        k = s[live] * direction
        F = ray_integrand(spec, l, r, r_prime, k)
        total += np.sum(wq[live] * F * np.exp(-1j * k * tau)) * 0.5 * (s1 - s0) * direction
    return complex(total)


# ----------------------------------------------------------------------------
# Direct quadrature
# ----------------------------------------------------------------------------

def _segment_pole_integral(z, tau, k0, k1):
    """``int_{k0}^{k1} exp(-i k tau) / (k - z) dk`` along the real axis."""
    if tau == 0:
        return np.log((k1 - z) / (k0 - z))
    w0 = 1j * tau * (k0 - z)
    w1 = 1j * tau * (k1 - z)
    val = exp1(w0) - exp1(w1)
    # The path w(t) = i tau (k - z) is horizontal; it crosses the branch cut of
    # E1 (negative real axis) when Re w < 0, i.e. when Im z < 0, at k = Re z.
    if z.imag < 0 and k0 < z.real < k1:
        val -= 2j * np.pi
    return np.exp(-1j * z * tau) * val


def _asymptotic_tail(spec, l, r, r_prime, tau, K, m_max=80):
    """``int_K^inf F exp(-i k tau)`` from the large-k form of ``F`` (r, r' >= a)."""
    N, a, rho, _ = _model_constants(spec, l)
    d = r - r_prime
    omega = r + r_prime - 2 * a
    terms = exp1(1j * (tau - d) * K) + exp1(1j * (tau + d) * K)
    for m in range(m_max):
        q = -rho if m == 0 else rho ** (m - 1) * (1 - rho**2)
        sgn = (-1) ** (m * l)
        s = omega + 2 * m * N * a
        terms -= q * sgn * (exp1(1j * (tau - s) * K) + exp1(1j * (tau + s) * K))
    return complex(terms / (2 * np.pi * r * r_prime))


@dataclass
class QuadratureResult:
    value: complex
    tail: complex
    tail_error: float
    k_max: float


def quadrature_Il(spec, l, r, r_prime, tau, k_max=2000.0, panel=0.02, order=16, narrow_gamma=0.05,
                  subtract=None, tail_tol=None):
    """Direct real-axis quadrature of the kernel ``I_l(r, r', tau)``.

    The integral over ``[0, k_max]`` uses Gauss-Legendre panels.  Poles with
    ``gamma < narrow_gamma`` are first subtracted as
    ``R/(k - z) + conj(R)/(k - conj z)`` and integrated in closed form, which
    keeps ultra-narrow resonances exact.  The remainder beyond ``k_max`` comes
    from the large-k form of ``F`` in terms of exponential integrals; its
    error is estimated by the change when ``k_max`` is halved.

    Parameters
    ----------
    subtract : array of complex, optional
        Poles to subtract; defaults to the narrow poles of the certified window.
    tail_tol : float, optional
        Raise :class:`TailConvergenceError` when the tail error estimate
        exceeds this absolute value.

    Returns
    -------
    QuadratureResult
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if min(r, r_prime) < spec.radius:
        raise ValueError("the asymptotic tail is implemented for r, r' >= a")
    if subtract is None:
        found = poles_for_l(spec, l, min(k_max, 40.0), -1.0)
        subtract = np.array([p.z for p in found if p.gamma < narrow_gamma], dtype=complex)
    subtract = np.asarray(subtract, dtype=complex)
    R = kernel_residue_weight(spec, l, subtract, r, r_prime) / (-2j * np.pi) if subtract.size else subtract

    x, wq = roots_legendre(order)
    edges = np.arange(0.0, k_max + 0.5 * panel, panel)
    edges[-1] = k_max
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    total = 0j
    chunk = 20000
    for i in range(0, mid.size, chunk):
        k = (mid[i:i + chunk, None] + half[i:i + chunk, None] * x[None, :]).ravel()
        F = kernel_integrand(spec, l, r, r_prime, k)
        if subtract.size:
            S = np.zeros(k.shape, dtype=complex)
            for zn, Rn in zip(subtract, R):
                S += Rn / (k - zn) + np.conj(Rn) / (k - np.conj(zn))
            F = F - S
        wk = (half[i:i + chunk, None] * wq[None, :]).ravel()
        total += np.sum(wk * F * np.exp(-1j * k * tau))
    for zn, Rn in zip(subtract, R):
        total += Rn * _segment_pole_integral(zn, tau, 0.0, k_max)
        total += np.conj(Rn) * _segment_pole_integral(np.conj(zn), tau, 0.0, k_max)
    tail = _asymptotic_tail(spec, l, r, r_prime, tau, k_max)
    # Error estimate: the tail formula's own change between K/2 and K, compared
    # with the quadrature of [K/2, K] it replaces.
    kh = 0.5 * k_max
    sub_edges = np.linspace(kh, k_max, int(np.ceil(kh / panel)) + 1)
    part = 0j
    for s0, s1 in zip(sub_edges[:-1], sub_edges[1:]):
        k = 0.5 * (s1 - s0) * x + 0.5 * (s1 + s0)
        part += np.sum(wq * kernel_integrand(spec, l, r, r_prime, k) * np.exp(-1j * k * tau)) * 0.5 * (s1 - s0)
    tail_half = _asymptotic_tail(spec, l, r, r_prime, tau, kh)
    # Tail error shrinks like 1/K^2 relative to the half-cutoff discrepancy.
    err = abs(tail_half - tail - part) / 4.0
    if tail_tol is not None and err > tail_tol:
        raise TailConvergenceError(f"tail not converged: estimated error {err:.3e}", err)
    return QuadratureResult(complex(total + tail), tail, float(err), float(k_max))


def symmetric_split_check(spec, l, r, r_prime, tau, k_max=40.0, n=20001):
    """Half-line integral versus the full-line even/odd construction.

    ``int_0^K F e^{-ik tau} = 1/2 int_{-K}^{K} F_e(k) e^{-ik tau}
    + 1/2 int_{-K}^{K} F_o(k) e^{-ik tau}``, where ``F_e`` and ``F_o`` are the
    even and odd extensions of ``F``.  Returns ``(half_line, full_line)``
    evaluated with the same trapezoidal samples.
    """
    k = np.linspace(0.0, k_max, n)
    F = np.zeros_like(k)
    F[1:] = kernel_integrand(spec, l, r, r_prime, k[1:])
    half_line = np.trapezoid(F * np.exp(-1j * k * tau), k)
    kk = np.concatenate([-k[:0:-1], k])
    Fe = np.concatenate([F[:0:-1], F])
    Fo = np.concatenate([-F[:0:-1], F])
    ph = np.exp(-1j * kk * tau)
    full = 0.5 * np.trapezoid(Fe * ph, kk) + 0.5 * np.trapezoid(Fo * ph, kk)
    return complex(half_line), complex(full)


# ----------------------------------------------------------------------------
# Finite box
# ----------------------------------------------------------------------------

@dataclass
class BoxDiscretization:
    """Box modes of one angular momentum.

    ``k`` are the wavenumbers with ``Z_l(k R) = 0`` and ``g`` the real
    couplings (rad/um) of the emitter to each box mode.
    """

    R: float
    l: int
    k: np.ndarray
    g: np.ndarray
    residual: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return self.k.size


def _phase_parts(spec, l, k, R, h):
    """``arg(alpha - i beta)`` on the line ``Im = -h`` and the connector to the real axis."""
    shifted = match_interface(spec, l, k - 1j * h).incoming
    real = match_interface(spec, l, k.astype(complex)).incoming
    connector = np.angle(real / shifted)
    hk = spherical_jn(l, k * R) + 1j * spherical_yn(l, k * R)
    return shifted, connector, hk


def _box_phase_grid(spec, l, R, k_max, h):
    step = min(np.pi / (4 * R), h / 4)
    k = np.arange(step, k_max + step, step)
    shifted, conn, hk = _phase_parts(spec, l, k, R, h)
    base = np.unwrap(np.angle(shifted))
    hphase = np.unwrap(np.angle(hk))
    return k, base + conn + hphase, shifted, hk


def discretize_box(spec, emitter, l, R_box, k_max=MAX_BOX_K, h=0.02, spacing_factor=2.0):
    """Roots of ``Z_l(k R_box) = 0`` in ``(0, k_max]`` with their couplings.

    On the real axis ``Z_l(k R) = Re[(alpha - i beta) h1_l(k R)]``, so roots
    sit where the total phase ``Phi = arg(alpha - i beta) + arg h1_l(k R)``
    equals ``pi/2 mod pi``.  The phase of ``alpha - i beta`` is unwrapped on
    the line ``Im k = -h`` (free of its zeros, which lie in the upper
    half-plane) and joined to the real axis by the principal argument of the
    ratio, which resolves arbitrarily narrow resonances.  Crossings are then
    bisected.

    Couplings follow from the exact box norm,
    ``g^2 = KAPPA^2 d^2 (k / eps_e) c_l Z(k r_e)^2 / (r_e^2 k^2 norm)``.

    Raises
    ------
    MissedRootError
        If a gap between consecutive roots exceeds ``spacing_factor`` times
        the local mean spacing.
    """
    if R_box < MIN_BOX_RATIO * spec.radius:
        raise ValueError(f"R_box must be at least {MIN_BOX_RATIO} sphere radii")
    if k_max > MAX_BOX_K:
        raise ValueError(f"k_max must not exceed {MAX_BOX_K}")
    k, phi, _, _ = _box_phase_grid(spec, l, R_box, k_max, h)
    level = np.floor((phi - np.pi / 2) / np.pi).astype(int)
    jumps = np.diff(level)
    if np.any(jumps < 0):
        raise MissedRootError("box phase decreased; grid too coarse near a resonance")
    # One bracket per phase level crossed; a narrow resonance can cross two
    # levels inside a single grid step.
    idx = np.repeat(np.nonzero(jumps)[0], jumps[jumps > 0])
    target = np.concatenate([level[i] + 1 + np.arange(j) for i, j in enumerate(jumps) if j > 0])
    target = target * np.pi + np.pi / 2
    k_left = k[idx]
    phi_left = phi[idx]
    s_left, c_left, h_left = _phase_parts(spec, l, k_left, R_box, h)

    def phase_at(kk):
        shifted, conn, hk = _phase_parts(spec, l, kk, R_box, h)
        return phi_left + np.angle(shifted / s_left) + (conn - c_left) + np.angle(hk / h_left)

    lo, hi = k_left.copy(), k[idx + 1].copy()
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        up = phase_at(mid) >= target
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= 4e-16 * hi):
            break
    roots = 0.5 * (lo + hi)
    alpha, beta, term_scale = _real_coefficients(spec, l, roots, with_scale=True)
    jR, yR = spherical_jn(l, roots * R_box), spherical_yn(l, roots * R_box)
    ZR = alpha * jR + beta * yR
    residual = np.abs(ZR) / (term_scale * np.hypot(jR, yR))
    gaps = np.diff(roots)
    if gaps.size > 8:
        local = np.convolve(gaps, np.ones(9) / 9, mode="same")
        if np.any(gaps > spacing_factor * np.maximum(local, np.pi / R_box)):
            raise MissedRootError("missed root suspected: spacing anomaly in box spectrum")
    re = emitter.r_emit
    eps_e = float(spec.permittivity(re))
    Ze = _real_Z(spec, l, roots, re, alpha, beta)
    norm = box_norm(spec, l, roots, R_box)
    g2 = (KAPPA * emitter.dipole) ** 2 * (roots / eps_e) * angular_weight(l) * Ze**2 / (re**2 * roots**2 * norm)
    g = np.sign(Ze) * np.sqrt(g2)
    return BoxDiscretization(float(R_box), int(l), roots, g, residual)


@dataclass
class OracleResult:
    t: np.ndarray
    c0: np.ndarray
    norm_error: float
    n_modes: int
    steps: int


def oracle_evolve(emitter, boxes, t_grid, rtol=1e-10, atol=1e-12):
    """Integrate the emitter coupled to every box mode.

    The state is expressed in the frame rotating at ``omega0``, where the
    generator ``[[0, g], [g, diag(k - omega0)]]`` is real symmetric.
    Integration is adaptive (DOP853).  Returns the emitter amplitude on
    ``t_grid`` and the largest deviation of the total probability from 1.
    """
    t = np.asarray(t_grid, dtype=float)
    R = min(b.R for b in boxes) if boxes else np.inf
    if t.size and t[-1] >= 2 * R:
        raise ValueError("t_grid must stay below the box recurrence time 2 R_box")
    k = np.concatenate([b.k for b in boxes]) if boxes else np.zeros(0)
    g = np.concatenate([b.g for b in boxes]) if boxes else np.zeros(0)
    det = k - emitter.omega0
    n = k.size

    def rhs(_, y):
        c0, c = y[0], y[1:]
        out = np.empty_like(y)
        out[0] = -1j * np.dot(g, c)
        out[1:] = -1j * (det * c + g * c0)
        return out

    y0 = np.zeros(n + 1, dtype=complex)
    y0[0] = 1.0
    if n == 0 or emitter.dipole == 0:
        return OracleResult(t, np.ones(t.size, dtype=complex), 0.0, n, 0)
    sol = solve_ivp(rhs, (0.0, float(t[-1])), y0, method="DOP853", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise ConvergenceError(f"step-size collapse in oracle integration: {sol.message}")
    prob = np.sum(np.abs(sol.y) ** 2, axis=0)
    return OracleResult(t, sol.y[0], float(np.max(np.abs(prob - 1.0))), n, int(sol.nfev))


def compare_c0(oracle, trajectory):
    """Relative deviations between oracle and pseudomode emitter amplitudes.

    The trajectory is taken in the rotating frame at the same ``omega0``.
    Returns ``(max |dc0| / |c0|, max |dc0| / max |1 - c0|)``; the second number
    measures the error against the part of ``c0`` that actually evolves.
    """
    rot = trajectory.to_frame("rotating")
    c0p = np.interp(oracle.t, rot.t, rot.c0.real) + 1j * np.interp(oracle.t, rot.t, rot.c0.imag)
    if trajectory.propagator is not None:
        c0p = trajectory.propagator(oracle.t)[0]
    diff = np.abs(oracle.c0 - c0p)
    rel = float(np.max(diff / np.abs(oracle.c0)))
    moving = float(np.max(np.abs(1.0 - oracle.c0)))
    return rel, float(np.max(diff) / moving) if moving > 0 else 0.0
