"""
Complex natural-mode poles: zeros of alpha_l(z) + i beta_l(z) in the fourth
quadrant of the complex wavenumber plane.

Poles are found by vectorized Newton iteration from seed grids and certified
complete with the argument principle.  The winding number of f = alpha + i beta
around a rectangle counts its zeros inside; a rectangle whose top edge lies in
the upper half-plane (where f has no zeros) therefore counts every pole down to
its bottom edge, including ultra-narrow whispering-gallery resonances that sit
within 1e-17 of the real axis.
"""
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoundaryZeroError, CompletenessError, ConvergenceError
from .mie import pole_function, pole_function_and_derivative

# Depth of the search window that yields the 613 poles of the reference window
# (l <= 30, 0 < Re z < 20 rad/um, N = 3.446, a = 1 um).  It lies midway between
# the 613th and 614th poles ordered by decreasing Im z; see calibrate_depth.
CALIBRATED_IM_MIN = -16.16
DEFAULT_RE_MIN = 1e-2
# Top edge of counting rectangles; f has no zeros in the upper half-plane.
_COUNT_TOP = 0.5


@dataclass(frozen=True)
class Pole:
    """One natural-mode pole."""

    l: int
    n: int
    z: complex
    residual: float = 0.0

    @property
    def omega(self):
        return self.z.real

    @property
    def gamma(self):
        return -self.z.imag

    @property
    def label(self):
        return (self.l, self.n)


@dataclass
class PoleSet:
    """Poles of all angular momenta inside a search window."""

    spec: object
    window: dict
    poles: list = field(default_factory=list)

    def __len__(self):
        return len(self.poles)

    def __iter__(self):
        return iter(self.poles)

    @property
    def z(self):
        return np.array([p.z for p in self.poles], dtype=complex)

    @property
    def labels(self):
        return [p.label for p in self.poles]

    def get(self, l, n):
        for p in self.poles:
            if p.l == l and p.n == n:
                return p
        raise KeyError(f"no pole ({l},{n}) in set")

    def for_l(self, l):
        return [p for p in self.poles if p.l == l]

    def subset(self, labels):
        keep = set(map(tuple, labels))
        return PoleSet(self.spec, dict(self.window), [p for p in self.poles if p.label in keep])

    def without(self, labels):
        drop = set(map(tuple, labels))
        return PoleSet(self.spec, dict(self.window), [p for p in self.poles if p.label not in drop])

    def records(self):
        """Catalog rows ``{l, n, re_z, im_z, residual}`` in (l, n) order."""
        return [
            {"l": p.l, "n": p.n, "re_z": p.z.real, "im_z": p.z.imag, "residual": p.residual}
            for p in sorted(self.poles, key=lambda p: (p.l, p.n))
        ]


def scaled_residual(spec, l, z):
    """``|f(z)| / (|f'(z)| |z|)`` with f = alpha + i beta."""
    f, df = pole_function_and_derivative(spec, l, z)
    return np.abs(f) / (np.abs(df) * np.abs(z))


# ----------------------------------------------------------------------------
# Argument principle
# ----------------------------------------------------------------------------

def _edge_points(start, end, t):
    return start + (end - start) * t


def _winding(func, corners, base_step=0.02, max_phase=np.pi / 4, max_rounds=60):
    total = 0.0
    n = len(corners)
    for i in range(n):
        a, b = corners[i], corners[(i + 1) % n]
        length = abs(b - a)
        if length == 0.0:
            continue
        t = np.linspace(0.0, 1.0, max(16, int(np.ceil(length / base_step)) + 1))
        f = func(_edge_points(a, b, t))
        for _ in range(max_rounds):
            dphi = np.angle(f[1:] / f[:-1])
            bad = np.abs(dphi) > max_phase
            if not np.any(bad):
                break
            idx = np.nonzero(bad)[0]
            if np.min(t[idx + 1] - t[idx]) * length < 1e-13 * max(1.0, abs(a)):
                break
            tm = 0.5 * (t[idx] + t[idx + 1])
            fm = func(_edge_points(a, b, tm))
            t = np.insert(t, idx + 1, tm)
            f = np.insert(f, idx + 1, fm)
        dphi = np.angle(f[1:] / f[:-1])
        if np.any(np.abs(dphi) >= np.pi / 2):
            raise BoundaryZeroError(f"boundary zero suspected on edge {a} -> {b}")
        total += dphi.sum()
    w = total / (2 * np.pi)
    k = int(np.rint(w))
    if abs(w - k) > 1e-3:
        raise BoundaryZeroError(f"non-integer winding number {w}")
    return k


def count_zeros(spec, l, rect, base_step=0.02):
    """Number of zeros of alpha_l + i beta_l inside a rectangle.

    Parameters
    ----------
    rect : tuple
        ``(re_min, re_max, im_min, im_max)``.
    base_step : float
        Initial sampling step along the edges; refined adaptively until every
        phase increment is below pi/4.

    Raises
    ------
    BoundaryZeroError
        If a phase step of at least pi/2 survives maximal refinement.
    """
    re0, re1, im0, im1 = map(float, rect)
    if re1 <= re0 or im1 <= im0:
        return 0
    corners = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]
    return _winding(lambda z: pole_function(spec, l, z), corners, base_step)


# ----------------------------------------------------------------------------
# Newton refinement
# ----------------------------------------------------------------------------

def _newton(spec, l, z, max_iter=100, tol=1e-13):
    """Vectorized Newton iteration; returns (z, converged mask)."""
    z = np.array(z, dtype=complex).ravel()
    active = np.ones(z.shape, bool)
    done = np.zeros(z.shape, bool)
    settled = np.zeros(z.shape, int)
    for _ in range(max_iter):
        if not np.any(active):
            break
        za = z[active]
        with np.errstate(all="ignore"):
            try:
                f, df = pole_function_and_derivative(spec, l, za)
            except OverflowError:
                f, df = _safe_eval(spec, l, za)
            step = f / df
        bad = ~np.isfinite(step)
        mag = np.abs(step)
        limit = 0.5 * np.maximum(1.0, np.abs(za))
        step = np.where(mag > limit, step / np.where(mag > 0, mag, 1.0) * limit, step)
        znew = za - np.where(bad, 0.0, step)
        wandered = bad | (np.abs(znew.imag) > 200.0) | (np.abs(znew) > 1e4) | (np.abs(znew) < 1e-6)
        small = (mag <= tol * np.abs(znew)) & (np.abs(step.imag) <= 1e-6 * np.abs(znew.imag) + 1e-300)
        idx = np.nonzero(active)[0]
        z[idx] = znew
        s = settled[idx] + small
        settled[idx] = np.where(small, s, 0)
        fin = settled[idx] >= 2
        done[idx[fin]] = True
        active[idx[fin | wandered]] = False
    return z, done


def _safe_eval(spec, l, z):
    f = np.full(z.shape, np.nan + 0j)
    df = np.full(z.shape, np.nan + 0j)
    for i, zi in enumerate(z):
        try:
            a, b = pole_function_and_derivative(spec, l, np.array([zi]))
            f[i], df[i] = a[0], b[0]
        except OverflowError:
            pass
    return f, df


def refine_pole(spec, l, seed, max_iter=100):
    """Newton-refine a single pole from ``seed``.

    Returns
    -------
    Pole
        With ``n = 0``; radial indices are assigned by :func:`enumerate_poles`.

    Raises
    ------
    ConvergenceError
        "no convergence in 100 iterations" or "converged outside fourth quadrant".
    """
    z, ok = _newton(spec, l, [complex(seed)], max_iter=max_iter)
    if not ok[0]:
        raise ConvergenceError(f"no convergence in {max_iter} iterations")
    z = complex(z[0])
    if not (z.real > 0 and z.imag < 0):
        raise ConvergenceError(f"converged outside fourth quadrant: {z}")
    return Pole(int(l), 0, z, float(scaled_residual(spec, l, np.array([z]))[0]))


# ----------------------------------------------------------------------------
# Enumeration
# ----------------------------------------------------------------------------

def _dedupe(z, tol=1e-8):
    if z.size == 0:
        return z
    z = z[np.argsort(z.real)]
    keep = []
    for zi in z:
        if any(abs(zi - zk) < tol * max(1.0, abs(zi)) for zk in keep[-8:]):
            continue
        keep.append(zi)
    return np.array(keep, dtype=complex)


def _inside(z, rect):
    re0, re1, im0, im1 = rect
    return (z.real > re0) & (z.real < re1) & (z.imag > im0) & (z.imag < im1)


def _real_axis_seeds(spec, l, re0, re1, step=0.005):
    from .mie import mode_norm_IM

    k = np.arange(max(re0, step), re1, step)
    if k.size < 3:
        return np.empty(0, complex)
    inv = 1.0 / mode_norm_IM(spec, l, k)
    peak = (inv[1:-1] > inv[:-2]) & (inv[1:-1] > inv[2:])
    return k[1:-1][peak] - 0.01j


def _seed_grid(re0, re1, im0, im1, d_re, d_im):
    re = np.arange(re0 + 0.5 * d_re, re1, d_re)
    im = np.arange(min(im1, 0.0) - 0.5 * d_im, im0, -d_im)
    if re.size == 0 or im.size == 0:
        return np.empty(0, complex)
    R, I = np.meshgrid(re, im)
    return (R + 1j * I).ravel()


def _find_in_rect(spec, l, rect, density=1.0):
    re0, re1, im0, im1 = rect
    seeds = [
        _real_axis_seeds(spec, l, re0, re1),
        np.arange(re0 + 0.05, re1, 0.1 / density) - 0.02j,
        np.arange(re0 + 0.05, re1, 0.1 / density) - 0.15j,
        _seed_grid(re0, re1, im0, min(im1, -0.3), 0.4 / density, 0.4 / density),
    ]
    seeds = np.concatenate([s for s in seeds if s.size])
    seeds = seeds[_inside(seeds, (re0, re1, im0, min(im1, 0.0)))]
    if seeds.size == 0:
        return np.empty(0, complex)
    z, ok = _newton(spec, l, seeds)
    z = z[ok]
    z = z[_inside(z, (re0, re1, im0, min(im1, 0.0)))]
    return _dedupe(z)


def _certify(spec, l, rect, found, depth=0, max_depth=14):
    """Recursively reconcile argument-principle counts with found roots."""
    re0, re1, im0, im1 = rect
    count_rect = (re0, re1, im0, _COUNT_TOP if im1 >= 0 else im1)
    count = count_zeros(spec, l, count_rect)
    mine = found[_inside(found, (re0, re1, im0, im1))]
    if count == mine.size:
        return mine
    if count < mine.size:
        raise CompletenessError(
            f"l={l}: {mine.size} roots found but argument principle counts {count}", rect
        )
    extra = _find_in_rect(spec, l, rect, density=4.0 * (depth + 1))
    merged = _dedupe(np.concatenate([mine, extra]))
    if merged.size == count:
        return merged
    if depth >= max_depth:
        raise CompletenessError(f"completeness certificate failed for l={l} in {rect}", rect)
    if (re1 - re0) >= (im1 - im0):
        mid = 0.5 * (re0 + re1)
        halves = [(re0, mid, im0, im1), (mid, re1, im0, im1)]
    else:
        mid = 0.5 * (im0 + im1)
        halves = [(re0, re1, im0, mid), (re0, re1, mid, im1)]
    halves = [_nudge(h, merged) for h in halves]
    parts = [_certify(spec, l, h, merged, depth + 1, max_depth) for h in halves]
    return _dedupe(np.concatenate(parts))


def _nudge(rect, roots, margin=1e-6):
    """Move interior split lines away from known roots."""
    re0, re1, im0, im1 = rect
    for _ in range(20):
        near_re = np.any(np.abs(roots.real - re0) < margin) or np.any(np.abs(roots.real - re1) < margin)
        near_im = np.any(np.abs(roots.imag - im0) < margin)
        if not (near_re or near_im):
            break
        if near_re:
            re0 += 3.7e-4
            re1 += 3.7e-4
        if near_im:
            im0 -= 3.7e-4
    return (re0, re1, im0, im1)


def poles_for_l(spec, l, re_max, im_min, re_min=DEFAULT_RE_MIN, certify=True):
    """All certified poles of one angular momentum inside the window."""
    rect = (re_min, re_max, im_min, 0.0)
    found = _find_in_rect(spec, l, rect)
    if certify:
        found = _certify(spec, l, rect, found)
    found = found[np.argsort(found.real)]
    res = scaled_residual(spec, l, found) if found.size else np.empty(0)
    return [Pole(int(l), i + 1, complex(z), float(r)) for i, (z, r) in enumerate(zip(found, res))]


def enumerate_poles(spec, l_max, re_max=20.0, im_min=CALIBRATED_IM_MIN, re_min=DEFAULT_RE_MIN,
                    l_min=1, certify=True):
    """Enumerate and certify all poles with ``l_min <= l <= l_max`` in the window.

    Parameters
    ----------
    spec : ResonatorSpec
    l_max : int
    re_max, im_min, re_min : float
        Window ``re_min < Re z < re_max``, ``im_min < Im z < 0``.
    certify : bool
        Run the argument-principle completeness certificate (default True).

    Returns
    -------
    PoleSet
        Poles sorted by (l, n), with n counting by increasing Re z from 1.
    """
    if not (re_max > re_min and im_min < 0):
        raise ValueError("empty search window")
    poles = []
    for l in range(int(l_min), int(l_max) + 1):
        poles.extend(poles_for_l(spec, l, re_max, im_min, re_min, certify))
    window = {"l_max": int(l_max), "re_max": float(re_max), "im_min": float(im_min), "re_min": float(re_min)}
    return PoleSet(spec, window, poles)


def calibrate_depth(spec, target=613, l_max=30, re_max=20.0, deepest=-25.0):
    """Window depth that contains exactly ``target`` poles.

    Poles are enumerated down to ``deepest`` and ordered by decreasing Im z;
    the returned depth is the midpoint between the target-th and next pole.

    Returns
    -------
    (im_min, gap) : tuple of float
        Calibrated depth and the width of the gap it sits in.
    """
    full = enumerate_poles(spec, l_max, re_max, deepest)
    im = np.sort(full.z.imag)[::-1]
    if im.size <= target:
        raise ValueError(f"only {im.size} poles above {deepest}; deepen the search")
    upper, lower = im[target - 1], im[target]
    return 0.5 * (upper + lower), upper - lower


def catalog_key(spec, l_max, re_max, im_min, re_min=DEFAULT_RE_MIN):
    """Content key identifying a pole enumeration (resonator and window)."""
    payload = json.dumps({"radius": spec.radius, "index": spec.index, "eps_out": spec.eps_out,
                          "l_max": int(l_max), "re_max": float(re_max), "im_min": float(im_min),
                          "re_min": float(re_min)}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_catalog(poleset, path):
    """Write a pole set as JSON (floats round-trip exactly)."""
    data = {"spec": {"radius": poleset.spec.radius, "index": poleset.spec.index,
                     "eps_out": poleset.spec.eps_out},
            "window": poleset.window, "poles": poleset.records()}
    Path(path).write_text(json.dumps(data, indent=1))


def load_catalog(spec, path):
    """Read a catalog written by :func:`save_catalog` for the same resonator."""
    data = json.loads(Path(path).read_text())
    stored = data["spec"]
    if (stored["radius"], stored["index"], stored["eps_out"]) != (spec.radius, spec.index, spec.eps_out):
        raise ValueError(f"catalog {path} belongs to a different resonator")
    poles = [Pole(int(r["l"]), int(r["n"]), complex(r["re_z"], r["im_z"]), float(r["residual"]))
             for r in data["poles"]]
    return PoleSet(spec, data["window"], poles)


def cached_poles(spec, l_max, re_max=20.0, im_min=CALIBRATED_IM_MIN, re_min=DEFAULT_RE_MIN, cache_dir=None):
    """:func:`enumerate_poles` with an on-disk catalog cache.

    ``cache_dir=None`` disables caching.
    """
    if cache_dir is None:
        return enumerate_poles(spec, l_max, re_max, im_min, re_min)
    cache_dir = Path(cache_dir)
    path = cache_dir / f"poles-{catalog_key(spec, l_max, re_max, im_min, re_min)}.json"
    if path.exists():
        return load_catalog(spec, path)
    poles = enumerate_poles(spec, l_max, re_max, im_min, re_min)
    cache_dir.mkdir(parents=True, exist_ok=True)
    save_catalog(poles, path)
    return poles
