"""
Exact emitter-pseudomode dynamics.

With the emitter initially excited and the field in vacuum, the single
excitation amplitudes obey ``i da/dt = M a`` with the complex symmetric
generator

    M[0, 0] = omega0,  M[n, n] = z_n,  M[0, n] = M[n, 0] = gbar_n.

The generator is diagonalized once (``M = V diag(lam) V^-1``) and the
amplitudes at any time follow from ``a(t) = V exp(-i lam t) V^-1 a(0)``.
Internally everything is computed in the frame rotating at ``omega0``, which
keeps the exponents small for long times; lab and interaction frame amplitudes
are derived on request.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eig, lu_factor, lu_solve
from scipy.signal import find_peaks

from .errors import ConvergenceError, WindowTooShortError

COND_LIMIT = 1e12
FRAMES = ("rotating", "lab", "interaction")


@dataclass
class EffectiveGenerator:
    """Complex symmetric single-excitation generator.

    Attributes
    ----------
    matrix : ndarray
        Lab-frame generator (dimension ``1 + n_poles``).
    omega0 : float
        Emitter frequency on the diagonal (may include a real shift).
    labels : list
        Pole labels for rows ``1..n``.
    """

    matrix: np.ndarray
    omega0: complex
    labels: list = field(default_factory=list)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def z(self):
        return np.diag(self.matrix)[1:]

    @property
    def gbar(self):
        return self.matrix[0, 1:]

    def rotating(self):
        """Generator in the frame rotating at the real emitter frequency."""
        return self.matrix - np.real(self.omega0) * np.eye(self.dim)


def assemble_generator(emitter, pseudomodes, omega0_shift=0.0):
    """Lab-frame generator for ``emitter`` coupled to every pseudomode.

    Parameters
    ----------
    emitter : EmitterSpec or None
        Supplies ``omega0``; ``None`` uses the emitter stored with the pseudomodes.
    pseudomodes : PseudomodeSet or None
        ``None`` (or an empty set) gives the 1x1 generator of a bare emitter.
    omega0_shift : complex
        Added to ``M[0, 0]``; used for the complex Lamb shift of the reduced model.
    """
    if emitter is None:
        emitter = pseudomodes.emitter
    n = 0 if pseudomodes is None else len(pseudomodes)
    M = np.zeros((n + 1, n + 1), dtype=complex)
    w0 = emitter.omega0 + omega0_shift
    M[0, 0] = w0
    labels = []
    if n:
        M[np.arange(1, n + 1), np.arange(1, n + 1)] = pseudomodes.z
        M[0, 1:] = pseudomodes.gbar
        M[1:, 0] = pseudomodes.gbar
        labels = list(pseudomodes.labels)
    return EffectiveGenerator(M, w0, labels)


def eigen_residual(matrix, values, vectors):
    """``||M V - V diag(lam)|| / ||M||`` in the 2-norm."""
    r = matrix @ vectors - vectors * values
    scale = np.linalg.norm(matrix, 2)
    return np.linalg.norm(r, 2) / scale if scale > 0 else np.linalg.norm(r, 2)


@dataclass
class Trajectory:
    """Emitter and pseudomode amplitudes on a time grid.

    ``c0`` has shape ``(nt,)`` and ``b`` has shape ``(n_poles, nt)``.  Times are
    ``c t`` in um.  ``omega0`` and ``z`` are kept so that the frame can be
    changed afterwards.
    """

    t: np.ndarray
    c0: np.ndarray
    b: np.ndarray
    frame: str
    labels: list
    omega0: float
    z: np.ndarray
    path: str = "eigen"
    cond: float = float("nan")
    propagator: object = None

    @property
    def population(self):
        return np.abs(self.c0) ** 2

    @property
    def mode_populations(self):
        return np.abs(self.b) ** 2

    def index(self, label):
        return self.labels.index(tuple(label))

    def to_frame(self, frame):
        """Return the trajectory expressed in another frame.

        ``rotating``: all amplitudes multiplied by ``exp(i omega0 t)``.
        ``lab``: the raw Schrodinger amplitudes.
        ``interaction``: ``c0 exp(i omega0 t)`` and ``b_n exp(i z_n t)``; the
        latter grows like ``exp(gamma_n t)`` and may overflow for broad poles at
        long times.
        """
        if frame not in FRAMES:
            raise ValueError(f"unknown frame {frame!r}")
        if frame == self.frame:
            return self
        c0, b = self._lab()
        t = self.t
        if frame == "rotating":
            ph = np.exp(1j * self.omega0 * t)
            c0, b = c0 * ph, b * ph
        elif frame == "interaction":
            c0 = c0 * np.exp(1j * self.omega0 * t)
            with np.errstate(over="ignore", invalid="ignore"):
                b = b * np.exp(1j * np.outer(self.z, t))
        return Trajectory(t, c0, b, frame, self.labels, self.omega0, self.z, self.path, self.cond,
                          self.propagator)

    def _lab(self):
        t = self.t
        if self.frame == "lab":
            return self.c0, self.b
        if self.frame == "rotating":
            ph = np.exp(-1j * self.omega0 * t)
            return self.c0 * ph, self.b * ph
        with np.errstate(over="ignore", invalid="ignore"):
            return self.c0 * np.exp(-1j * self.omega0 * t), self.b * np.exp(-1j * np.outer(self.z, t))

    def rotating_amplitudes(self, t):
        """Rotating-frame ``(c0, b)`` at arbitrary times, exactly when possible.

        Uses the stored eigen-propagator; otherwise cubic interpolation of the
        stored grid.
        """
        t = np.asarray(t, dtype=float)
        if self.propagator is not None:
            a = self.propagator(t)
            return a[0], a[1:]
        rot = self.to_frame("rotating")
        from scipy.interpolate import CubicSpline
        if t.size and (t.min() < rot.t[0] - 1e-12 or t.max() > rot.t[-1] + 1e-12):
            from .errors import TrajectoryRangeError
            raise TrajectoryRangeError("requested time outside the stored trajectory")
        cs0 = CubicSpline(rot.t, rot.c0)
        csb = CubicSpline(rot.t, rot.b, axis=1)
        return cs0(t), csb(t)


class EigenPropagator:
    """``a(t) = V exp(-i lam t) w`` with ``w = V^-1 a(0)``, in the rotating frame."""

    def __init__(self, values, vectors, weights):
        self.values = values
        self.vectors = vectors
        self.weights = weights

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((self.vectors.shape[0], t.size), dtype=complex)
        # Chunk over time to bound memory for long grids.
        step = 4096
        for i in range(0, t.size, step):
            ph = np.exp(-1j * np.outer(self.values, t[i:i + step])) * self.weights[:, None]
            out[:, i:i + step] = self.vectors @ ph
        return out


def diagonalize(gen):
    """Eigen-decomposition of the rotating-frame generator.

    Returns ``(values, vectors, cond, residual)``; ``cond`` is the 2-norm
    condition number of the eigenvector matrix.
    """
    A = gen.rotating()
    values, vectors = eig(A)
    cond = np.linalg.cond(vectors)
    return values, vectors, cond, eigen_residual(A, values, vectors)


def _ode_evolve(A, t, a0, rtol=1e-10, atol=1e-12):
    def rhs(_, y):
        return -1j * (A @ y)

    sol = solve_ivp(rhs, (0.0, float(t[-1])), a0, method="DOP853", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise ConvergenceError(f"ODE integration failed: {sol.message}")
    return sol.y


def evolve(gen, t_grid, frame="rotating", method="auto", initial=None):
    """Amplitudes on ``t_grid`` starting from the excited emitter.

    Parameters
    ----------
    gen : EffectiveGenerator
    t_grid : array_like
        Non-negative, increasing times ``c t`` in um.
    frame : {'rotating', 'lab', 'interaction'}
    method : {'auto', 'eigen', 'ode'}
        ``auto`` diagonalizes and switches to adaptive ODE integration (DOP853,
        rtol 1e-10) when the eigenvector condition number exceeds 1e12.
    initial : array_like, optional
        Initial amplitude vector; defaults to ``(1, 0, ..., 0)``.

    Returns
    -------
    Trajectory
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("t_grid must be a non-negative increasing 1-d array")
    a0 = np.zeros(gen.dim, dtype=complex)
    a0[0] = 1.0
    if initial is not None:
        a0 = np.asarray(initial, dtype=complex)
    cond = float("nan")
    prop = None
    path = method
    if method in ("auto", "eigen"):
        values, vectors, cond, _ = diagonalize(gen)
        if method == "eigen" or cond <= COND_LIMIT:
            weights = lu_solve(lu_factor(vectors), a0)
            prop = EigenPropagator(values, vectors, weights)
            a = prop(t)
            path = "eigen"
        else:
            path = "ode"
    if path == "ode":
        a = _ode_evolve(gen.rotating(), t, a0)
    elif path != "eigen":
        raise ValueError(f"unknown method {method!r}")
    traj = Trajectory(t, a[0].copy(), a[1:].copy(), "rotating", list(gen.labels), float(np.real(gen.omega0)),
                      gen.z.copy(), path, cond, prop)
    return traj.to_frame(frame)


def lamb_shift(pseudomodes, excluded=(), omega0=None, convention="square"):
    """Complex emitter frequency shift from the off-resonant pseudomodes.

    ``delta = sum_n w_n / (omega0 - z_n)`` over all poles not in ``excluded``,
    where ``w_n = gbar_n**2`` (``convention='square'``, the form produced by
    adiabatic elimination of a pseudomode) or ``|gbar_n|**2``
    (``convention='modulus'``).
    """
    if omega0 is None:
        omega0 = pseudomodes.emitter.omega0
    drop = set(map(tuple, excluded))
    keep = np.array([lab not in drop for lab in pseudomodes.labels], dtype=bool)
    if not keep.any():
        return 0j
    g = pseudomodes.gbar[keep]
    if convention == "square":
        w = g**2
    elif convention == "modulus":
        w = np.abs(g) ** 2
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return complex(np.sum(w / (omega0 - pseudomodes.z[keep])))


def tune_omega0(pseudomodes, target=(8, 3), excluded=((8, 3), (5, 4)), convention="square",
                part="real", tol=1e-15, max_iter=50):
    """Bare frequency whose shifted value is resonant with the ``target`` pole.

    Solves ``omega0 + shift(omega0) = Re z_target`` by fixed-point iteration,
    where ``shift`` is the real (or, with ``part='imag'``, the imaginary) part
    of :func:`lamb_shift` over all poles except ``excluded``.
    """
    goal = pseudomodes.z[pseudomodes.index(target)].real
    take = np.real if part == "real" else np.imag
    w0 = goal
    for _ in range(max_iter):
        new = goal - take(lamb_shift(pseudomodes, excluded, w0, convention))
        if abs(new - w0) <= tol * abs(goal):
            return float(new)
        w0 = new
    raise ConvergenceError("omega0 tuning did not converge")


def two_mode_approx(pseudomodes, keep=((5, 4), (8, 3)), t_grid=None, convention="square", frame="rotating"):
    """Reduced dynamics keeping only ``keep`` explicitly.

    All other pseudomodes enter through the complex Lamb shift added to the
    emitter frequency.  Returns ``(trajectory, shift)``.
    """
    keep = [tuple(k) for k in keep]
    sub = pseudomodes.subset(keep)
    shift = lamb_shift(pseudomodes, excluded=keep, convention=convention)
    gen = assemble_generator(None, sub, omega0_shift=shift)
    gen.omega0 = pseudomodes.emitter.omega0 + shift
    traj = evolve(gen, t_grid, frame="rotating")
    # Rotating frame refers to the real bare frequency for comparison with the full model.
    w0 = pseudomodes.emitter.omega0
    ph = np.exp(-1j * (w0 - traj.omega0) * traj.t)
    traj = Trajectory(traj.t, traj.c0 * ph, traj.b * ph, "rotating", traj.labels, w0, traj.z, traj.path,
                      traj.cond, None)
    return traj.to_frame(frame), shift


def time_grid(t_max, n_lin=4000, n_log=200, t_min=1e-3):
    """Logarithmic-plus-linear grid on ``[0, t_max]`` (includes 0)."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    parts = [np.zeros(1), np.linspace(0.0, t_max, n_lin)]
    if n_log and t_min < t_max:
        parts.append(np.geomspace(t_min, t_max, n_log))
    return np.unique(np.concatenate(parts))


def oscillation_period(t, population, min_prominence=1e-3):
    """Mean spacing of the maxima of an oscillating population.

    Peaks are located on the sampled curve and refined by a parabola through
    the neighbouring samples; the period is the slope of a linear fit of peak
    time against peak index.
    """
    t = np.asarray(t, float)
    p = np.asarray(population, float)
    idx, _ = find_peaks(p, prominence=min_prominence * max(np.ptp(p), 1e-300))
    idx = idx[(idx > 0) & (idx < len(p) - 1)]
    if len(idx) < 2:
        raise WindowTooShortError("fewer than two oscillation maxima in the window")
    times = []
    for i in idx:
        y0, y1, y2 = p[i - 1], p[i], p[i + 1]
        h0, h1 = t[i] - t[i - 1], t[i + 1] - t[i]
        # Vertex of the parabola through three (possibly unequally spaced) points.
        x = np.array([-h0, 0.0, h1])
        a, b, _ = np.polyfit(x, [y0, y1, y2], 2)
        times.append(t[i] - b / (2 * a) if a < 0 else t[i])
    times = np.asarray(times)
    return float(np.polyfit(np.arange(len(times)), times, 1)[0])


def fit_decay_rate(t, population, window=None):
    """Rate ``Gamma0`` of an exponential fit ``|c0|^2 ~ A exp(-Gamma0 t)``.

    When the population oscillates, the fit uses its local maxima (the
    envelope); otherwise all samples in the window with positive population.
    """
    t = np.asarray(t, float)
    p = np.asarray(population, float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, p = t[sel], p[sel]
    idx, _ = find_peaks(p)
    if len(idx) >= 3:
        t, p = t[idx], p[idx]
    good = p > 0
    if good.sum() < 2:
        raise WindowTooShortError("not enough points for a decay fit")
    slope = np.polyfit(t[good], np.log(p[good]), 1)[0]
    return float(-slope)


def classify_markovianity(trajectory, pseudomodes, gamma0=None, window=None, tol=0.2,
                          rabi_period=None, min_periods=3.0):
    """Label every pseudomode by how its amplitude relates to the emitter.

    ``adiabatic-following``
        ``b_n(t)`` tracks ``gbar_n c0(t) / (omega0 - z_n)`` with relative
        L2 error below ``tol`` over the window.
    ``free-ringing``
        In the second half of the window ``b_n(t)`` is a single free decay
        ``b_n(t_ref) exp(-i z_n (t - t_ref))`` (lab frame) with relative
        error below ``tol``.
    ``strong-coupled``
        Neither.

    Parameters
    ----------
    trajectory : Trajectory
    pseudomodes : PseudomodeSet
        Must match the trajectory's pole order.
    gamma0 : float, optional
        Emitter decay rate; fitted from ``|c0|^2`` when omitted.
    window : (float, float), optional
        Time window; defaults to the whole trajectory.
    rabi_period : float, optional
        When given, the window must span at least ``min_periods`` of it.

    Returns
    -------
    gamma0 : float
    records : list of dict
        ``label``, ``gamma_ratio`` (gamma_n / Gamma0), ``classification``,
        ``adiabatic_residual``, ``free_residual``.
    """
    lab = trajectory.to_frame("lab")
    t = lab.t
    if window is None:
        window = (t[0], t[-1])
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 8:
        raise WindowTooShortError("fit window holds fewer than 8 samples")
    if rabi_period is not None and window[1] - window[0] < min_periods * rabi_period:
        raise WindowTooShortError(
            f"window {window[1] - window[0]:.3g} shorter than {min_periods} Rabi periods ({rabi_period:.3g})")
    if gamma0 is None:
        gamma0 = fit_decay_rate(t, np.abs(lab.c0) ** 2, window)
    ts, c0 = t[sel], lab.c0[sel]
    # Time-weighted norms so that dense early sampling does not dominate.
    wt = np.gradient(ts)
    late = ts >= ts[0] + 0.5 * (ts[-1] - ts[0])
    tl, wl = ts[late], wt[late]
    w0 = pseudomodes.emitter.omega0
    out = []
    for n, label in enumerate(lab.labels):
        z = pseudomodes.z[n]
        g = pseudomodes.gbar[n]
        b = lab.b[n, sel]
        follow = g * c0 / (w0 - z)
        adia = _relative_error(b, follow, wt)
        bl = b[late]
        free = _relative_error(bl, bl[0] * np.exp(-1j * z * (tl - tl[0])), wl)
        if adia < tol:
            cls = "adiabatic-following"
        elif free < tol:
            cls = "free-ringing"
        else:
            cls = "strong-coupled"
        out.append({"label": tuple(label), "gamma_ratio": float(-z.imag / gamma0) if gamma0 else np.inf,
                    "classification": cls, "adiabatic_residual": float(adia), "free_residual": float(free)})
    return gamma0, out


def _relative_error(x, ref, weights):
    nx = np.sqrt(np.sum(weights * np.abs(x) ** 2))
    if nx == 0:
        return np.inf
    return float(np.sqrt(np.sum(weights * np.abs(x - ref) ** 2)) / nx)


def trajectory_table(trajectory):
    """Columns ``ct, abs2_c0, abs2_b_l_n...`` as an ``(nt, 2 + n)`` array and header."""
    header = ["ct", "abs2_c0"] + [f"abs2_b_{l}_{n}" for l, n in trajectory.labels]
    data = np.column_stack([trajectory.t, np.abs(trajectory.c0) ** 2, (np.abs(trajectory.b) ** 2).T])
    return header, data
