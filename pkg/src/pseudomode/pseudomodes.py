"""
Pseudomodes of the radiating sphere and their couplings to a radial dipole.

The emitter sits on the polar axis (theta = 0), so only m = 0 vector harmonics
couple.  On the real axis the density-weighted continuum coupling is

    g_hat(k)^2 = rho(k) g(k)^2
               = KAPPA^2 d^2 (k / eps_e) c_l (2 / pi) Z(k r_e)^2 / (r_e^2 (alpha^2 + beta^2)),

with c_l = l (l+1) Y_l0(0)^2 and eps_e the permittivity at the emitter.  The
box radius cancels between the mode density R/pi and the norm I_M.

Continuing g_hat^2 into the complex plane (alpha^2 + beta^2 becomes
(alpha + i beta)(alpha - i beta)) and closing the frequency integral in the
fourth quadrant turns the continuum kernel into a sum over poles with weights

    gbar_n^2 = -2 pi i Res[g_hat^2, z_n]
             = KAPPA^2 d^2 (z_n / eps_e) c_l V_n(r_e)^2 / (z_n r_e)^2,

where the pseudomode radial function is

    V_n(r) = P_n * Z_n(r),   P_n = 2 z_n / sqrt(i f'(z_n) (alpha - i beta)),

Z_n(r) = j_l(N z_n r) inside and (alpha - i beta) h1_l(z_n r) / 2 outside.
The outside form grows like exp(|Im z| r): pseudomodes diverge in space.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import eval_legendre

from .bessel import spherical_table
from .errors import BranchAmbiguityError
from .mie import incoming_at_pole, match_interface, pole_function_and_derivative, unnormalized_Z
from .units import KAPPA


# Emitter radius (um, inside the sphere of radius 1 um) at which a 10 D dipole
# tuned to the (8,3) resonance shows Rabi oscillations of |c0|^2 with period
# c T = 4.63e5 um; see calibrate_emitter_radius.
CALIBRATED_R_EMIT = 0.94613


@dataclass(frozen=True)
class EmitterSpec:
    """Two-level emitter with a radially oriented dipole on the polar axis.

    Parameters
    ----------
    r_emit : float
        Radial position in um.
    dipole : float
        Dipole moment in Debye.
    omega0 : float
        Bare transition frequency in rad/um.
    theta : float
        Polar angle; only 0 is supported.
    """

    r_emit: float
    dipole: float
    omega0: float
    theta: float = 0.0

    def __post_init__(self):
        if self.theta != 0.0:
            raise ValueError("only an emitter on the polar axis (theta = 0) is supported")
        if not self.r_emit > 0:
            raise ValueError("r_emit must be positive")
        if not self.dipole >= 0:
            raise ValueError("dipole moment must be non-negative")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")

    def with_dipole(self, dipole):
        return EmitterSpec(self.r_emit, dipole, self.omega0, self.theta)

    def with_omega0(self, omega0):
        return EmitterSpec(self.r_emit, self.dipole, omega0, self.theta)


def vsh_radial_component(l, m=0, theta=0.0):
    """Normalized angular amplitude of the radial field component.

    Returns ``Y_l0(theta) = sqrt((2l+1)/(4 pi)) P_l(cos theta)``, normalized so
    that the solid-angle integral of its square is 1.  The radial component of
    the normalized N-harmonic is ``sqrt(l(l+1)) Y_l0(theta) Z / (k r)``.
    """
    if m != 0:
        raise ValueError("only m = 0 is supported (Y_l^m vanishes on the axis for m != 0)")
    if l < 1:
        raise ValueError("l must be >= 1")
    return np.sqrt((2 * l + 1) / (4 * np.pi)) * eval_legendre(l, np.cos(theta))


def vsh_polar_derivative(l, theta):
    """d/dtheta of ``Y_l0(theta)``, used for the tangential field component."""
    x = np.cos(theta)
    # dP_l(cos t)/dt = l (x P_l - P_{l-1}) / sin t, which vanishes on the axis.
    s = np.sin(theta)
    with np.errstate(invalid="ignore", divide="ignore"):
        dp = np.where(
            np.abs(s) > 1e-12,
            l * (x * eval_legendre(l, x) - eval_legendre(l - 1, x)) / np.where(np.abs(s) > 1e-12, s, 1.0),
            0.0,
        )
    return np.sqrt((2 * l + 1) / (4 * np.pi)) * dp


def angular_weight(l):
    """``c_l = l(l+1) Y_l0(0)^2 = l(l+1)(2l+1)/(4 pi)``."""
    return l * (l + 1) * (2 * l + 1) / (4 * np.pi)


def continuum_coupling_g(spec, emitter, l, k):
    """Density-weighted continuum coupling ``g_hat(k) = sqrt(rho(k)) g_l(k)`` in rad/um.

    Real and signed; its square is the spectral density entering the exact
    continuum equation of motion.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(k <= 0):
        raise ValueError("k must be positive")
    re = emitter.r_emit
    eps_e = float(spec.permittivity(re))
    out = np.empty(k.shape)
    for i, ki in enumerate(k):
        coef = match_interface(spec, l, ki)
        Z = unnormalized_Z(spec, l, ki, np.array([re]), coef)[0].real
        norm = np.hypot(coef.alpha.real, coef.beta.real)
        out[i] = Z / norm
    return (KAPPA * emitter.dipole * np.sqrt(k / eps_e) * np.sqrt(angular_weight(l))
            * np.sqrt(2.0 / np.pi) * out / re)


def continuum_density(spec, emitter, l, z):
    """Analytic continuation of ``g_hat(k)^2`` to complex ``z`` (array)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    re = emitter.r_emit
    eps_e = float(spec.permittivity(re))
    coef = match_interface(spec, l, z)
    if re < spec.radius:
        Z = spherical_table(l, "j", spec.index * z * re)[l]
    else:
        Z = coef.alpha * spherical_table(l, "j", z * re)[l] + coef.beta * spherical_table(l, "y", z * re)[l]
    return (KAPPA * emitter.dipole) ** 2 * (z / eps_e) * angular_weight(l) * (2 / np.pi) * Z**2 / (
        re**2 * coef.outgoing * coef.incoming)


def _pole_data(spec, l, z):
    _, dfdz = pole_function_and_derivative(spec, l, z)
    return incoming_at_pole(spec, l, z), dfdz


def radial_prefactor(spec, l, z):
    """``P = 2 z / sqrt(i f'(z) (alpha - i beta))`` with the principal square root."""
    z = np.asarray(z, dtype=complex)
    incoming, dfdz = _pole_data(spec, l, z)
    return 2.0 * z / np.sqrt(1j * dfdz * incoming)


def pole_Z(spec, l, z, r):
    """Radial shape at a pole: ``j_l(N z r)`` inside, ``(alpha - i beta) h1_l(z r)/2`` outside."""
    z = complex(z)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty(r.shape, dtype=complex)
    inside = r < spec.radius
    if np.any(inside):
        out[inside] = spherical_table(l, "j", spec.index * z * r[inside])[l]
    if np.any(~inside):
        out[~inside] = complex(incoming_at_pole(spec, l, z)[0]) * spherical_table(l, "h1", z * r[~inside])[l] / 2.0
    return out


def pole_dZ(spec, l, z, r):
    """``d/dr [r Z(r)]`` of :func:`pole_Z`, for the tangential field component."""
    z = complex(z)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty(r.shape, dtype=complex)
    inside = r < spec.radius
    if np.any(inside):
        rho = spec.index * z * r[inside]
        t = spherical_table(l, "j", rho)
        out[inside] = rho * t[l - 1] - l * t[l]
    if np.any(~inside):
        x = z * r[~inside]
        t = spherical_table(l, "h1", x)
        out[~inside] = complex(incoming_at_pole(spec, l, z)[0]) * (x * t[l - 1] - l * t[l]) / 2.0
    return out


def pseudomode_radial(spec, pole, r, sign=1.0):
    """Pseudomode radial function ``V(r) = P Z_pole(r)`` at radii ``r``.

    ``sign`` selects the square-root branch (+1 principal, -1 the other).
    """
    P = complex(radial_prefactor(spec, pole.l, np.array([pole.z]))[0])
    return sign * P * pole_Z(spec, pole.l, pole.z, r)


@dataclass
class PseudomodeSet:
    """Poles with their radial prefactors and emitter couplings.

    ``prefactor`` already includes the branch sign chosen so that every
    coupling has a non-negative real part.
    """

    spec: object
    poles: object
    emitter: EmitterSpec
    prefactor: np.ndarray
    gbar: np.ndarray

    @property
    def z(self):
        return self.poles.z

    @property
    def labels(self):
        return self.poles.labels

    def __len__(self):
        return len(self.poles)

    def index(self, label):
        return self.labels.index(tuple(label))

    def gbar_of(self, label):
        return self.gbar[self.index(label)]

    def subset(self, labels):
        return self._reordered([self.index(lab) for lab in labels])

    def _reordered(self, idx):
        from .poles import PoleSet
        ps = PoleSet(self.spec, dict(self.poles.window), [self.poles.poles[i] for i in idx])
        return PseudomodeSet(self.spec, ps, self.emitter, self.prefactor[idx], self.gbar[idx])

    def without(self, labels):
        drop = set(map(tuple, labels))
        idx = [i for i, lab in enumerate(self.labels) if lab not in drop]
        return self._reordered(idx)

    def scaled(self, dipole):
        """Same pseudomodes for a different dipole moment (couplings are linear in d)."""
        if self.emitter.dipole == 0:
            raise ValueError("cannot rescale from a zero dipole")
        f = dipole / self.emitter.dipole
        return PseudomodeSet(self.spec, self.poles, self.emitter.with_dipole(dipole), self.prefactor, self.gbar * f)

    def with_omega0(self, omega0):
        return PseudomodeSet(self.spec, self.poles, self.emitter.with_omega0(omega0), self.prefactor, self.gbar)

    def records(self):
        """Coupling table rows ``{l, n, re_z, im_z, re_gbar, im_gbar, abs_gbar}``."""
        return [
            {"l": p.l, "n": p.n, "re_z": p.z.real, "im_z": p.z.imag,
             "re_gbar": g.real, "im_gbar": g.imag, "abs_gbar": abs(g)}
            for p, g in zip(self.poles, self.gbar)
        ]


def gbar_squared(spec, emitter, l, z):
    """Pole weights ``gbar^2 = -2 pi i Res[g_hat^2]`` evaluated in closed form."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    re = emitter.r_emit
    eps_e = float(spec.permittivity(re))
    incoming, dfdz = _pole_data(spec, l, z)
    if re < spec.radius:
        Z = spherical_table(l, "j", spec.index * z * re)[l]
    else:
        Z = incoming * spherical_table(l, "h1", z * re)[l] / 2.0
    return (KAPPA * emitter.dipole) ** 2 * (z / eps_e) * angular_weight(l) * 4.0 * Z**2 / (
        re**2 * 1j * dfdz * incoming)


def build_pseudomodes(spec, poles, emitter, check_branch=True):
    """Radial prefactors and couplings for every pole in ``poles``.

    The coupling is assembled from the radial function,
    ``gbar = KAPPA d sqrt(z/eps_e) sqrt(c_l) V(r_e) / (z r_e)``, and its branch
    sign is fixed so that ``Re gbar >= 0``.  With ``check_branch`` the square of
    the result is compared with the closed-form residue weight.
    """
    re = emitter.r_emit
    eps_e = float(spec.permittivity(re))
    n = len(poles)
    pref = np.empty(n, complex)
    gbar = np.empty(n, complex)
    plist = list(poles)
    for l in sorted({p.l for p in plist}):
        idx = [i for i, p in enumerate(plist) if p.l == l]
        z = np.array([plist[i].z for i in idx], dtype=complex)
        P = radial_prefactor(spec, l, z)
        Zr = np.array([pole_Z(spec, l, zi, re)[0] for zi in z])
        g = KAPPA * emitter.dipole * np.sqrt(z / eps_e) * np.sqrt(angular_weight(l)) * P * Zr / (z * re)
        flip = (g.real < 0) | ((g.real == 0) & (g.imag < 0))
        sgn = np.where(flip, -1.0, 1.0)
        g = g * sgn
        if check_branch and emitter.dipole > 0:
            g2 = gbar_squared(spec, emitter, l, z)
            err = np.abs(g**2 - g2) / np.abs(g2)
            if np.any(err > 1e-10):
                raise BranchAmbiguityError(f"l={l}: coupling square differs from residue weight by {err.max():.2e}")
            dev = np.abs(np.abs(g) ** 2 - np.abs(g2))
            if np.any(dev > 1e-12 * np.abs(g2) + 1e-300):
                raise BranchAmbiguityError(f"l={l}: |gbar|^2 depends on branch choice")
        pref[idx] = P * sgn
        gbar[idx] = g
    return PseudomodeSet(spec, poles, emitter, pref, gbar)


def numerical_residue(func, z0, radius, n=64):
    """Residue of ``func`` at ``z0`` by the trapezoidal rule on a circle."""
    th = 2 * np.pi * np.arange(n) / n
    w = radius * np.exp(1j * th)
    return np.mean(func(z0 + w) * w)


def damped_rabi_period(gbar_sq, gamma):
    """Period of ``|c0|^2`` for an emitter resonant with one lossy mode.

    The 2x2 generator ``[[w, g], [g, w - i gamma]]`` has eigenvalues
    ``w - i gamma/2 +- sqrt(g^2 - gamma^2/4)``, so the population beats with
    period ``pi / Re sqrt(g^2 - gamma^2/4)``.
    """
    return np.pi / np.real(np.sqrt(complex(gbar_sq) - gamma**2 / 4.0))


def calibrate_emitter_radius(spec, pole, dipole=10.0, period=4.63e5, bracket=(0.93, 0.96)):
    """Radius at which the single-mode Rabi period equals ``period``.

    Solves ``damped_rabi_period(gbar^2(r), gamma) = period`` for ``r`` inside
    ``bracket`` with Brent's method.
    """
    def mismatch(r):
        em = EmitterSpec(r, dipole, pole.z.real)
        g2 = gbar_squared(spec, em, pole.l, pole.z)[0]
        return damped_rabi_period(g2, pole.gamma) - period

    return brentq(mismatch, *bracket, xtol=1e-13)
