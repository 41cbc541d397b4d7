"""
Spherical Bessel, Neumann and Hankel functions of complex argument.

All functions of half-integer order reduce to trigonometric functions times
polynomials in 1/z.  The two lowest orders are evaluated from those closed
forms and higher orders follow from the three-term recurrence

    f_{l-1}(z) + f_{l+1}(z) = (2l+1)/z f_l(z).

j is the minimal solution of the recurrence.  It is obtained from the
continued fraction for the ratio j_l/j_{l-1} (Miller's downward recurrence),
anchored on the closed form of j_0 or j_1, whichever is better conditioned.
Upward recurrence is used for j only far beyond the turning point near the real
axis.  The Hankel function that decays away from the real axis is recurred
upward; its partner follows from 2 j - h, and y from the two Hankel functions
(or by direct upward recurrence close to the real axis).

Values that cannot be represented in double precision raise ``OverflowError``
instead of silently saturating.
"""
import numpy as np

KINDS = ("j", "y", "h1", "h2")

# exp(700) is close to the largest finite double; beyond it the closed forms
# overflow.
_MAX_IMAG = 700.0


def _prepare(z):
    z = np.asarray(z, dtype=complex)
    if np.any(~np.isfinite(z)):
        raise ValueError("non-finite argument")
    if np.any(np.abs(z.imag) > _MAX_IMAG):
        raise OverflowError("|Im z| too large for double precision Bessel evaluation")
    return z


def _check_finite(table, kind):
    if not np.all(np.isfinite(table)):
        raise OverflowError(f"spherical Bessel {kind}: value exceeds the representable range")
    return table


def _upward(f0, f1, lmax, z):
    out = np.empty((lmax + 1,) + z.shape, dtype=complex)
    out[0] = f0
    if lmax >= 1:
        out[1] = f1
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(1, lmax):
            out[l + 1] = (2 * l + 1) / z * out[l] - out[l - 1]
    return out


def _j_table(lmax, z):
    out = np.zeros((lmax + 1,) + z.shape, dtype=complex)
    absz = np.abs(z)
    is_zero = absz == 0.0
    zs = np.where(is_zero, 1.0, z)
    sin, cos = np.sin(zs), np.cos(zs)
    j0 = np.where(is_zero, 1.0, sin / zs)
    if lmax == 0:
        out[0] = j0
        return out

    # Upward recurrence is safe only well below the turning point l ~ |z| and
    # close to the real axis.
    up = (absz >= 2 * lmax + 20) & (np.abs(z.imag) <= 1.0)
    if np.any(up):
        zu = zs[up]
        j1u = (sin[up] / zu - cos[up]) / zu
        out[:, up] = _upward(j0[up], j1u, lmax, zu)

    down = ~up & ~is_zero
    if np.any(down):
        zd = zs[down]
        top = lmax + 32 + int(np.ceil(2.0 * np.max(np.abs(zd))))
        ratios = np.zeros((lmax + 1,) + zd.shape, dtype=complex)
        r = np.zeros(zd.shape, dtype=complex)
        for l in range(top, 0, -1):
            den = (2 * l + 1) - zd * r
            # For real arguments the ratio can pass exactly through a pole of
            # the continued fraction; nudge the denominator off zero.
            den = np.where(den == 0, 1e-300, den)
            r = zd / den
            if l <= lmax:
                ratios[l] = r
        j0d = j0[down]
        j1d = (sin[down] / zd - cos[down]) / zd
        # Anchor on j1 near the zeros of j0, where j0 has lost relative accuracy.
        use_j1 = (np.abs(zd) > 1.0) & (np.abs(j0d) < np.abs(j1d))
        vals = np.empty((lmax + 1,) + zd.shape, dtype=complex)
        vals[1] = np.where(use_j1, j1d, j0d * ratios[1])
        vals[0] = np.where(use_j1, j1d / np.where(use_j1, ratios[1], 1.0), j0d)
        for l in range(2, lmax + 1):
            vals[l] = vals[l - 1] * ratios[l]
        out[:, down] = vals

    if np.any(is_zero):
        out[0, is_zero] = 1.0
    return out


def spherical_table(lmax, kind, z):
    """Spherical Bessel-type functions of orders ``0..lmax``.

    Parameters
    ----------
    lmax : int
        Highest order, ``lmax >= 0``.
    kind : {'j', 'y', 'h1', 'h2'}
        Function family.
    z : complex or array_like
        Argument(s).

    Returns
    -------
    ndarray
        Complex array of shape ``(lmax + 1,) + np.shape(z)``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    lmax = int(lmax)
    if lmax < 0:
        raise ValueError("order must be non-negative")
    z = _prepare(z)
    if kind == "j":
        return _check_finite(_j_table(lmax, z), kind)
    if np.any(z == 0):
        raise ValueError(f"spherical Bessel {kind} is singular at z = 0")
    with np.errstate(over="ignore", invalid="ignore"):
        if kind == "y":
            table = np.empty((lmax + 1,) + z.shape, dtype=complex)
            near = np.abs(z.imag) <= 1.0
            if np.any(near):
                zn = z[near]
                c, s = np.cos(zn), np.sin(zn)
                table[:, near] = _upward(-c / zn, -c / zn**2 - s / zn, lmax, zn)
            far = ~near
            if np.any(far):
                # Off the real axis y is dominated by one Hankel function and
                # its direct recurrence is unstable past the turning point.
                zf = z[far]
                table[:, far] = (_hankel(lmax, 1, zf) - _hankel(lmax, 2, zf)) / 2j
        else:
            table = _hankel(lmax, 1 if kind == "h1" else 2, z)
    return _check_finite(table, kind)


def _hankel_upward(lmax, sign, z):
    e = np.exp(sign * 1j * z)
    f0 = -sign * 1j * e / z
    f1 = -e * (z + sign * 1j) / z**2
    return _upward(f0, f1, lmax, z)


def _hankel(lmax, which, z):
    """Hankel function table with the stable route chosen per half-plane.

    The function that decays exponentially away from the real axis (h1 in the
    upper half-plane, h2 in the lower) is stable under upward recurrence.  The
    other one is obtained as ``2 j - h`` from the minimal solution j.
    """
    sign = 1 if which == 1 else -1
    out = np.empty((lmax + 1,) + z.shape, dtype=complex)
    direct = sign * z.imag >= 0.0
    if np.any(direct):
        out[:, direct] = _hankel_upward(lmax, sign, z[direct])
    other = ~direct
    if np.any(other):
        zo = z[other]
        out[:, other] = 2.0 * _j_table(lmax, zo) - _hankel_upward(lmax, -sign, zo)
    return out


def spherical(l, kind, z):
    """Single-order spherical Bessel function ``f_l(z)`` of the given kind."""
    if int(l) < 0:
        raise ValueError("order must be non-negative")
    return spherical_table(l, kind, z)[int(l)]


def riccati_derivative(table, z):
    """Derivative of ``z f_l(z)`` for every order ``l >= 1`` in ``table``.

    Uses ``[z f_l(z)]' = z f_{l-1}(z) - l f_l(z)``.  Row 0 is filled with the
    derivative of ``z f_0(z)`` computed from ``f_0' = -f_1`` when the table has
    at least two rows.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(table)
    ls = np.arange(table.shape[0]).reshape((-1,) + (1,) * z.ndim)
    out[1:] = z * table[:-1] - ls[1:] * table[1:]
    if table.shape[0] > 1:
        out[0] = table[0] - z * table[1]
    else:
        out[0] = np.nan
    return out


def derivative(table, z):
    """Derivative ``f_l'(z)`` for orders ``l >= 1`` via ``f_{l-1} - (l+1) f_l / z``."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(table)
    ls = np.arange(table.shape[0]).reshape((-1,) + (1,) * z.ndim)
    out[1:] = table[:-1] - (ls[1:] + 1) * table[1:] / z
    if table.shape[0] > 1:
        out[0] = -table[1]
    else:
        out[0] = np.nan
    return out
