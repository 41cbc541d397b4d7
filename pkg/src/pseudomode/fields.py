"""
Retarded electric field radiated through the pseudomodes.

The positive-frequency field at (r, theta) and time t is

    E(r, t) = i KAPPA sum_n sqrt(z_n / eps(r)) u_n(r, theta) b_n(t - D) exp(-i z_n D) Theta(t - D),

with b_n the lab-frame pseudomode amplitudes, D = D(r, r_emit) the retardation
and u_n the vector mode function

    u_r     = sqrt(l(l+1)) Y_l0(theta) V_n(r) / (z_n r)
    u_theta = dY_l0/dtheta P_n (r Z_n)'(r) / (sqrt(l(l+1)) z_n r).

Outside the sphere V_n grows like exp(gamma_n r) while exp(-i z_n D) decays
like exp(-gamma_n D); the two are combined analytically through the scaled
Hankel function h1_l(x) exp(-i x), so the field stays finite at any radius.
The coupling is recovered as ``gbar_n = d * (field coefficient at r_emit)``,
so the field is reported in rad/um per Debye of a probe dipole.
"""
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .bessel import spherical_table
from .errors import TrajectoryRangeError
from .mie import incoming_at_pole
from .pseudomodes import vsh_polar_derivative, vsh_radial_component
from .units import KAPPA

DELAYS = ("optical", "surface")


def surface_distance(spec, r, convention="optical"):
    """Travel length from radius ``r`` to the sphere surface.

    ``optical``: ``r - a`` outside and ``N (a - r)`` inside.
    ``surface``: the signed distance ``r - a`` everywhere.
    """
    r = np.asarray(r, dtype=float)
    a = spec.radius
    if convention == "optical":
        return np.where(r >= a, r - a, spec.index * (a - r))
    if convention == "surface":
        return r - a
    raise ValueError(f"unknown delay convention {convention!r}")


def retardation(spec, r, r_emit, convention="optical"):
    """Delay ``D(r, r_emit)`` before the pseudomode field reaches ``r``.

    The residue expansion of the outgoing kernel converges once ``c t``
    exceeds the path from the emitter to the surface plus the path from the
    surface to the field point; both legs are measured by
    :func:`surface_distance`.
    """
    return surface_distance(spec, r, convention) + surface_distance(spec, r_emit, convention)


def scaled_h1(lmax, x):
    """``h1_l(x) exp(-i x)`` for ``l = 0..lmax`` from the finite series.

    For ``|x|`` comparable to ``lmax`` (and moderate ``|Im x|``) the recurrence
    table is rescaled directly; for large ``|x|`` the closed form
    ``h1_l(x) = (-i)^(l+1) exp(i x) / x sum_k (l+k)! / (k! (l-k)!) (i / 2x)^k``
    is summed, which cannot overflow.
    """
    x = np.asarray(x, dtype=complex)
    if np.all(np.abs(x.imag) < 600.0) and np.all(np.abs(x) < 4 * lmax + 40):
        return spherical_table(lmax, "h1", x) * np.exp(-1j * x)
    out = np.empty((lmax + 1,) + x.shape, dtype=complex)
    u = 1j / (2.0 * x)
    for l in range(lmax + 1):
        s = np.zeros(x.shape, dtype=complex)
        for k in range(l, -1, -1):
            s = s * u + factorial(l + k) / (factorial(k) * factorial(l - k))
        out[l] = (-1j) ** (l + 1) * s / x
    return out


@dataclass
class ModeField:
    """Per-pole field coefficients ``i KAPPA sqrt(z/eps) u_n exp(-i z D)`` at one point.

    ``delay`` is the retardation ``D`` at that point.
    """

    radial: np.ndarray
    polar: np.ndarray
    delay: float


def pole_incoming(pseudomodes):
    """``alpha - i beta`` at every pole of the set (cached by callers)."""
    out = np.empty(len(pseudomodes), dtype=complex)
    plist = list(pseudomodes.poles)
    for l in sorted({p.l for p in plist}):
        idx = np.array([i for i, p in enumerate(plist) if p.l == l])
        out[idx] = incoming_at_pole(pseudomodes.spec, l, pseudomodes.z[idx])
    return out


def mode_field(pseudomodes, r, theta=0.0, convention="optical", incoming=None):
    """Field coefficients ``i KAPPA sqrt(z/eps) u_n(r, theta) exp(-i z_n D)``.

    Returns a :class:`ModeField` whose ``radial`` and ``polar`` arrays have one
    entry per pole.  ``incoming`` may carry :func:`pole_incoming` to avoid
    recomputing it for every radius.
    """
    if incoming is None:
        incoming = pole_incoming(pseudomodes)
    spec = pseudomodes.spec
    emitter = pseudomodes.emitter
    D = float(retardation(spec, r, emitter.r_emit, convention))
    eps = float(spec.permittivity(r))
    n = len(pseudomodes)
    rad = np.zeros(n, dtype=complex)
    pol = np.zeros(n, dtype=complex)
    plist = list(pseudomodes.poles)
    for l in sorted({p.l for p in plist}):
        idx = np.array([i for i, p in enumerate(plist) if p.l == l])
        z = pseudomodes.z[idx]
        P = pseudomodes.prefactor[idx]
        Y = vsh_radial_component(l, 0, theta)
        dY = vsh_polar_derivative(l, theta)
        ll = np.sqrt(l * (l + 1.0))
        if r < spec.radius:
            rho = spec.index * z * r
            t = spherical_table(l, "j", rho)
            Z, dZ = t[l], rho * t[l - 1] - l * t[l]
            phase = np.exp(-1j * z * D)
        else:
            x = z * r
            hs = scaled_h1(l, x)
            half = incoming[idx] / 2.0
            Z, dZ = half * hs[l], half * (x * hs[l - 1] - l * hs[l])
            # exp(i z r) from the Hankel function combined with exp(-i z D).
            phase = np.exp(1j * z * (r - D))
        common = 1j * KAPPA * np.sqrt(z / eps) * P * phase / (z * r)
        rad[idx] = common * ll * Y * Z
        pol[idx] = common * dY * dZ / ll
    return ModeField(rad, pol, D)


def _filter_mask(pseudomodes, mode_filter):
    labels = pseudomodes.labels
    if mode_filter is None or mode_filter == "all":
        return np.ones(len(labels), dtype=bool)
    kind, chosen = mode_filter
    chosen = set(map(tuple, chosen))
    inside = np.array([lab in chosen for lab in labels], dtype=bool)
    if kind == "only":
        return inside
    if kind == "except":
        return ~inside
    raise ValueError(f"unknown filter kind {kind!r}")


def _lab_b(trajectory, times):
    """Lab-frame pseudomode amplitudes at ``times`` (shape n x len(times))."""
    times = np.asarray(times, dtype=float)
    if times.size and times.max() > trajectory.t[-1] + 1e-9 and trajectory.propagator is None:
        raise TrajectoryRangeError("trajectory too short for requested (r, t)")
    _, b = trajectory.rotating_amplitudes(times)
    return b * np.exp(-1j * trajectory.omega0 * times)


def field_amplitude(r, t, trajectory, pseudomodes, mode_filter=None, theta=0.0, convention="optical"):
    """Vector field ``(E_r, E_theta)`` at radius ``r`` and times ``t``.

    Parameters
    ----------
    r : float
        Radius in um.
    t : float or array_like
        Times ``c t`` in um.
    trajectory : Trajectory
        Any frame; amplitudes at retarded times are taken from its exact
        propagator when available, else from cubic interpolation.
    pseudomodes : PseudomodeSet
    mode_filter : None, 'all', ('only', labels) or ('except', labels)
    theta : float
        Polar angle of the field point.
    convention : {'optical', 'surface'}
        Retardation convention, see :func:`retardation`.

    Returns
    -------
    ndarray, shape (2, len(t))
        Zero wherever ``t < D``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    mf = mode_field(pseudomodes, r, theta, convention)
    mask = _filter_mask(pseudomodes, mode_filter)
    out = np.zeros((2, t.size), dtype=complex)
    live = t >= mf.delay
    if not np.any(live) or not np.any(mask):
        return out
    b = _lab_b(trajectory, t[live] - mf.delay)[mask]
    out[0, live] = mf.radial[mask] @ b
    out[1, live] = mf.polar[mask] @ b
    return out


@dataclass
class FieldMap:
    """Intensity ``|E_r|^2 + |E_theta|^2`` on an (r, t) grid."""

    r: np.ndarray
    t: np.ndarray
    intensity: np.ndarray
    mode_filter: object = "all"
    convention: str = "optical"
    theta: float = 0.0
    amplitude: np.ndarray = field(default=None, repr=False)

    def normalized(self):
        m = self.intensity.max()
        return self.intensity / m if m > 0 else self.intensity

    def records(self):
        rr, tt = np.meshgrid(self.r, self.t, indexing="ij")
        return np.column_stack([rr.ravel(), tt.ravel(), self.intensity.ravel()])


def intensity_map(r_grid, t_grid, trajectory, pseudomodes, mode_filter=None, theta=0.0,
                  convention="optical", keep_amplitude=False):
    """Field intensity on the grid ``r_grid x t_grid``.

    With an eigen-propagator the mode sum is contracted with the eigenvectors
    first, so each radius costs one vector-matrix product plus one exponential
    per eigenvalue and time.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(r_grid) < 0) or np.any(np.diff(t_grid) < 0):
        raise ValueError("grids must be sorted ascending")
    mask = _filter_mask(pseudomodes, mode_filter)
    amp = np.zeros((2, r_grid.size, t_grid.size), dtype=complex)
    prop = trajectory.propagator
    incoming = pole_incoming(pseudomodes)
    for i, r in enumerate(r_grid):
        mf = mode_field(pseudomodes, r, theta, convention, incoming)
        live = t_grid >= mf.delay
        if not np.any(live) or not np.any(mask):
            continue
        tr = t_grid[live] - mf.delay
        if prop is not None:
            V = prop.vectors[1:][mask]
            ph = np.exp(-1j * np.outer(prop.values + trajectory.omega0, tr)) * prop.weights[:, None]
            amp[0, i, live] = (mf.radial[mask] @ V) @ ph
            amp[1, i, live] = (mf.polar[mask] @ V) @ ph
        else:
            b = _lab_b(trajectory, tr)[mask]
            amp[0, i, live] = mf.radial[mask] @ b
            amp[1, i, live] = mf.polar[mask] @ b
    inten = np.abs(amp[0]) ** 2 + np.abs(amp[1]) ** 2
    return FieldMap(r_grid, t_grid, inten, mode_filter if mode_filter is not None else "all", convention,
                    float(theta), amp if keep_amplitude else None)


def light_cone_leakage(fmap, spec, r_emit):
    """Largest intensity outside ``r - a > c t + (r_emit - a)``, relative to the map maximum."""
    rr, tt = np.meshgrid(fmap.r, fmap.t, indexing="ij")
    outside = rr - spec.radius > tt + (r_emit - spec.radius)
    m = fmap.intensity.max()
    if m == 0 or not outside.any():
        return 0.0
    return float(fmap.intensity[outside].max() / m)


def pseudomode_portrait(pseudomodes, label, r_grid, theta_grid):
    """``|u|^2`` of one pseudomode on an (r, theta) grid, without time dependence.

    Returns an array of shape ``(len(r_grid), len(theta_grid))``.  Outside the
    sphere the values grow with r: the pseudomodes themselves diverge.
    """
    spec = pseudomodes.spec
    k = pseudomodes.index(label)
    l = label[0]
    z = pseudomodes.z[k]
    P = pseudomodes.prefactor[k]
    r_grid = np.asarray(r_grid, dtype=float)
    theta_grid = np.asarray(theta_grid, dtype=float)
    from .pseudomodes import pole_dZ, pole_Z
    Z = pole_Z(spec, l, z, r_grid)
    dZ = pole_dZ(spec, l, z, r_grid)
    ll = np.sqrt(l * (l + 1.0))
    Y = vsh_radial_component(l, 0, theta_grid)
    dY = vsh_polar_derivative(l, theta_grid)
    ur = np.outer(P * ll * Z / (z * r_grid), Y)
    ut = np.outer(P * dZ / (ll * z * r_grid), dY)
    return np.abs(ur) ** 2 + np.abs(ut) ** 2
