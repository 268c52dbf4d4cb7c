"""The classical Lorenz flow, C^1-small bump perturbations and section data.

    x' = sigma (y - x),  y' = r x - y - x z,  z' = x y - b z  (+ bump)

Integration is fixed-step RK4 compiled with numba. Crossings of the plane
``z = z_section`` are located by bisection on the cubic Hermite interpolant
of each step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import minimize_scalar

from .errors import BlowUpError, FitError, PreconditionError, PropertyViolation

log = logging.getLogger(__name__)

TRANSVERSAL_MIN = 1e-6
SECTION_TOL = 1e-9
_BUMP_DIR = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)


@dataclass(frozen=True)
class VectorFieldParams:
    """Lorenz coefficients plus an additive bump ``amp * m(|s - c|/w) * e``.

    ``m(r) = exp(1 - 1/(1 - r^2))`` on ``r < 1`` is a smooth mollifier with
    maximum 1 and ``e`` a fixed unit vector, so ``sup |bump| = bump_amp``.
    """

    sigma: float = 10.0
    r: float = 28.0
    b: float = 8.0 / 3.0
    bump_amp: float = 0.0
    bump_center: tuple = (0.0, 0.0, 27.0)
    bump_width: float = 15.0

    def __post_init__(self):
        if self.bump_width <= 0:
            raise PreconditionError("bump_width must be positive")
        if self.bump_amp < 0:
            raise PreconditionError("bump_amp must be nonnegative")

    def pack(self):
        c = np.asarray(self.bump_center, dtype=float)
        return np.array(
            [self.sigma, self.r, self.b, self.bump_amp, c[0], c[1], c[2], self.bump_width,
             *_BUMP_DIR]
        )

    def with_bump(self, amp):
        return VectorFieldParams(self.sigma, self.r, self.b, amp, self.bump_center, self.bump_width)

    @property
    def z_section(self):
        return self.r - 1.0


@numba.njit(cache=True)
def _rhs(s, p, out):
    x, y, z = s[0], s[1], s[2]
    out[0] = p[0] * (y - x)
    out[1] = p[1] * x - y - x * z
    out[2] = x * y - p[2] * z
    if p[3] != 0.0:
        d2 = ((x - p[4]) ** 2 + (y - p[5]) ** 2 + (z - p[6]) ** 2) / (p[7] * p[7])
        if d2 < 1.0:
            m = p[3] * np.exp(1.0 - 1.0 / (1.0 - d2))
            out[0] += m * p[8]
            out[1] += m * p[9]
            out[2] += m * p[10]


@numba.njit(cache=True)
def _rk4_step(s, p, dt, k1, k2, k3, k4, tmp, out):
    _rhs(s, p, k1)
    for i in range(3):
        tmp[i] = s[i] + 0.5 * dt * k1[i]
    _rhs(tmp, p, k2)
    for i in range(3):
        tmp[i] = s[i] + 0.5 * dt * k2[i]
    _rhs(tmp, p, k3)
    for i in range(3):
        tmp[i] = s[i] + dt * k3[i]
    _rhs(tmp, p, k4)
    for i in range(3):
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@numba.njit(cache=True)
def _integrate(s0, p, dt, n_steps, stride):
    n_out = n_steps // stride + 1
    traj = np.empty((n_out, 3))
    s = s0.copy()
    nxt = np.empty(3)
    k1 = np.empty(3); k2 = np.empty(3); k3 = np.empty(3); k4 = np.empty(3); tmp = np.empty(3)  # noqa: E702
    traj[0] = s
    for step in range(1, n_steps + 1):
        _rk4_step(s, p, dt, k1, k2, k3, k4, tmp, nxt)
        if not (np.isfinite(nxt[0]) and np.isfinite(nxt[1]) and np.isfinite(nxt[2])):
            return traj, step
        s[:] = nxt
        if step % stride == 0:
            traj[step // stride] = s
    return traj, -1


@numba.njit(cache=True)
def _hermite(s0, f0, s1, f1, dt, theta, i):
    h00 = (1 + 2 * theta) * (1 - theta) ** 2
    h10 = theta * (1 - theta) ** 2
    h01 = theta**2 * (3 - 2 * theta)
    h11 = theta**2 * (theta - 1)
    return h00 * s0[i] + h10 * dt * f0[i] + h01 * s1[i] + h11 * dt * f1[i]


@numba.njit(cache=True)
def _crossings(s0, p, dt, max_steps, zs, direction, n_wanted, n_transient):
    """Up to ``n_wanted`` crossings of ``z = zs`` with ``sign(z') == direction``
    (0 for both). Columns: t, x, y, z, zdot."""
    out = np.empty((n_wanted, 5))
    s = s0.copy()
    nxt = np.empty(3)
    f0 = np.empty(3); f1 = np.empty(3)  # noqa: E702
    k1 = np.empty(3); k2 = np.empty(3); k3 = np.empty(3); k4 = np.empty(3); tmp = np.empty(3)  # noqa: E702
    count = 0
    skipped = 0
    for step in range(max_steps):
        _rk4_step(s, p, dt, k1, k2, k3, k4, tmp, nxt)
        if not (np.isfinite(nxt[0]) and np.isfinite(nxt[1]) and np.isfinite(nxt[2])):
            return out[:count], step + 1, skipped
        g0 = s[2] - zs
        g1 = nxt[2] - zs
        if step >= n_transient and g0 * g1 < 0.0 or (g1 == 0.0 and g0 != 0.0):
            if step >= n_transient and (direction == 0 or (g1 - g0) * direction > 0):
                _rhs(s, p, f0)
                _rhs(nxt, p, f1)
                lo, hi = 0.0, 1.0
                th = 1.0
                for _ in range(200):
                    th = 0.5 * (lo + hi)
                    g = _hermite(s, f0, nxt, f1, dt, th, 2) - zs
                    if abs(g) <= 1e-12 or hi - lo < 1e-16:
                        break
                    if (g < 0.0) == (g0 < 0.0):
                        lo = th
                    else:
                        hi = th
                pt = np.empty(3)
                for i in range(3):
                    pt[i] = _hermite(s, f0, nxt, f1, dt, th, i)
                _rhs(pt, p, tmp)
                if abs(tmp[2]) < 1e-6:
                    skipped += 1
                else:
                    out[count, 0] = (step + th) * dt
                    out[count, 1] = pt[0]
                    out[count, 2] = pt[1]
                    out[count, 3] = pt[2]
                    out[count, 4] = tmp[2]
                    count += 1
                    if count == n_wanted:
                        return out, -1, skipped
        s[:] = nxt
    return out[:count], -1, skipped


def _check_dt(dt, t_total):
    if not 0 < dt <= 1e-3 + 1e-15:
        raise PreconditionError("dt must lie in (0, 1e-3]")
    if t_total < dt:
        raise PreconditionError("t_total must be at least dt")


def vector_field(params, state):
    """``X(state)`` for a single state."""
    out = np.empty(3)
    _rhs(np.asarray(state, dtype=float), params.pack(), out)
    return out


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def to_csv(self, path, header=None):
        with open(path, "w") as fh:
            for h in header or []:
                fh.write(f"# {h}\n")
            fh.write("t,x,y,z\n")
            for t, s in zip(self.times, self.states):
                fh.write(f"{t:.17g},{s[0]:.17g},{s[1]:.17g},{s[2]:.17g}\n")


def integrate(params, state, t_total, dt=1e-3, stride=1):
    """Fixed-step RK4 trajectory, keeping every ``stride``-th state.

    Raises
    ------
    BlowUpError
        If the state becomes non-finite; carries the step index.
    """
    _check_dt(dt, t_total)
    n_steps = int(round(t_total / dt))
    traj, bad = _integrate(np.asarray(state, dtype=float), params.pack(), dt, n_steps, stride)
    if bad >= 0:
        raise BlowUpError(f"non-finite state at step {bad}", step=bad)
    times = np.arange(traj.shape[0]) * dt * stride
    return Trajectory(times, traj)


def rk4_order(params, state, t=0.5, dt=1e-3):
    """Observed convergence order ``log2(|y_h - y_{h/2}| / |y_{h/2} - y_{h/4}|)``."""
    s0, pk = np.asarray(state, dtype=float), params.pack()
    ends = []
    for k in range(3):
        h = dt / 2**k
        n = int(round(t / h))
        ends.append(_integrate(s0, pk, h, n, n)[0][-1])
    e1 = np.linalg.norm(ends[0] - ends[1])
    e2 = np.linalg.norm(ends[1] - ends[2])
    return float(np.log2(e1 / e2))


@dataclass
class SpectrumReport:
    lambda1: float
    lambda2: float
    lambda3: float
    ordering_holds: bool
    message: str = ""


def origin_spectrum(params):
    """Eigenvalues at the origin as ``(lambda1 > 0, lambda2, lambda3 = -b)``
    and the predicate ``0 < -lambda3 < lambda1 < -lambda2``."""
    s, r, b = params.sigma, params.r, params.b
    disc = (s + 1.0) ** 2 + 4.0 * s * (r - 1.0)
    lam3 = -b
    if disc < 0:
        re = -(s + 1.0) / 2.0
        return SpectrumReport(re, re, lam3, False, "complex eigenvalues: not a Lorenz-like singularity")
    root = np.sqrt(disc)
    lam1 = (-(s + 1.0) + root) / 2.0
    lam2 = (-(s + 1.0) - root) / 2.0
    ok = bool(0 < -lam3 < lam1 < -lam2)
    msg = "" if ok else (
        f"ordering 0 < -lambda3 < lambda1 < -lambda2 fails: "
        f"lambda = ({lam1:.6g}, {lam2:.6g}, {lam3:.6g})"
    )
    return SpectrumReport(float(lam1), float(lam2), float(lam3), ok, msg)


@dataclass
class SectionCrossing:
    point: tuple
    time_since_previous: float
    direction: int
    time: float = 0.0


def section_crossings(params, state0, z_section=None, n_crossings=5000, dt=1e-3,
                      direction=-1, t_transient=10.0, t_max=None):
    """Crossings of ``z = z_section`` (default ``r - 1``) in ``direction``.

    ``time_since_previous`` of the first recorded crossing is measured from
    the end of the transient. An empty list is returned (and logged) when
    the orbit never meets the section.
    """
    zs = params.z_section if z_section is None else float(z_section)
    if t_max is None:
        t_max = t_transient + 20.0 * n_crossings
    _check_dt(dt, t_max)
    max_steps = int(round(t_max / dt))
    n_tr = int(round(t_transient / dt))
    rows, bad, skipped = _crossings(
        np.asarray(state0, dtype=float), params.pack(), dt, max_steps, zs, int(direction),
        int(n_crossings), n_tr,
    )
    if bad >= 0:
        raise BlowUpError(f"non-finite state at step {bad}", step=bad)
    if skipped:
        log.warning("skipped %d tangential crossings", skipped)
    if len(rows) == 0:
        log.warning("no crossings of z = %g after the transient", zs)
        return []
    prev = np.concatenate([[n_tr * dt], rows[:-1, 0]])
    return [
        SectionCrossing((float(r[1]), float(r[2])), float(r[0] - p), int(np.sign(r[4])), float(r[0]))
        for r, p in zip(rows, prev)
    ]


def crossings_to_csv(crossings, path, header=None):
    with open(path, "w") as fh:
        for h in header or []:
            fh.write(f"# {h}\n")
        fh.write("t,x,y,dt,direction\n")
        for c in crossings:
            fh.write(f"{c.time:.17g},{c.point[0]:.17g},{c.point[1]:.17g},"
                     f"{c.time_since_previous:.17g},{c.direction}\n")


def return_map_data(crossings):
    """Pairs ``(x_k, tau_k)`` with ``tau_k`` the time from crossing ``k`` to
    crossing ``k + 1``."""
    if len(crossings) < 2:
        raise PreconditionError("need at least two crossings")
    x = np.array([c.point[0] for c in crossings[:-1]])
    tau = np.array([c.time_since_previous for c in crossings[1:]])
    return x, tau


# ---------------------------------------------------------------------------
# logarithmic return-time fit
# ---------------------------------------------------------------------------


@dataclass
class LogFit:
    C: float
    A: float
    O: float
    r_squared: float
    n_points: int


def _linfit(x, tau, O):
    u = -np.log(np.abs(x - O))
    Cs, A = np.polyfit(u, tau, 1)
    resid = tau - (A + Cs * u)
    ss_tot = np.sum((tau - tau.mean()) ** 2)
    return Cs, A, float(np.sum(resid**2)), 1.0 - np.sum(resid**2) / ss_tot


def return_time_log_fit(x, tau, top_fraction=1.0, min_points=1000):
    """Least-squares fit of ``tau = A - C log|x - O|``.

    ``O`` starts at the gap point, the abscissa of the largest return time
    (the closest approach to the cut), and is refined by bounded scalar
    minimization of the residual on each side of it, up to the neighbouring
    sample. The fit and ``r_squared`` use the points whose return time is in
    the top ``top_fraction`` of the sample.

    Raises
    ------
    FitError
        On flat data or when the fitted ``C`` is not positive.
    """
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if x.size < min_points:
        raise PreconditionError(f"need at least {min_points} points, got {x.size}")
    if np.ptp(tau) <= 1e-12 * max(1.0, abs(tau).max()):
        raise FitError("return times are flat; no logarithmic law to fit")
    if top_fraction < 1.0:
        keep = tau >= np.quantile(tau, 1.0 - top_fraction)
        x, tau = x[keep], tau[keep]
    k = int(np.argmax(tau))
    x0 = x[k]
    others = np.delete(x, k)
    left = others[others < x0]
    right = others[others > x0]
    best = None
    for lo, hi in ((left.max() if left.size else x0 - 1.0, x0), (x0, right.min() if right.size else x0 + 1.0)):
        span = hi - lo
        if span <= 0:
            continue
        res = minimize_scalar(
            lambda O: _linfit(x, tau, O)[2],
            bounds=(lo + 1e-9 * span, hi - 1e-9 * span),
            method="bounded",
            options={"xatol": 1e-12 * max(span, 1e-300)},
        )
        if best is None or res.fun < best[1]:
            best = (res.x, res.fun)
    O = float(best[0])
    Cs, A, _, r2 = _linfit(x, tau, O)
    if not Cs > 0:
        raise FitError(f"fitted C = {Cs:.3g} is not positive")
    if not x.min() <= O <= x.max():
        raise FitError("fitted O lies outside the sample range")
    return LogFit(float(Cs), float(A), O, float(r2), int(x.size))


def lorenz_return_fit(crossings, top_fraction=0.1, min_points=1000):
    """Log fit for classical Lorenz section data.

    The section sees two cuts at ``x = +-O`` exchanged by the symmetry
    ``(x, y, z) -> (-x, -y, z)``; folding with ``|x|`` leaves a single cut.
    """
    x, tau = return_map_data(crossings)
    return return_time_log_fit(np.abs(x), tau, top_fraction, min_points)


# ---------------------------------------------------------------------------
# Gronwall closeness
# ---------------------------------------------------------------------------


def jacobian(params, state):
    x, y, z = state
    s, r, b = params.sigma, params.r, params.b
    return np.array([[-s, s, 0.0], [r - z, -1.0, -x], [y, x, -b]])


def c1_bound(params, radius=100.0, n_samples=20000, seed=0):
    """Sampled ``sup ||DX||_2`` over the ball ``|state| <= radius`` (unperturbed
    field). The norm is convex in the state, so sampling the sphere suffices;
    interior points are added anyway."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n_samples, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    rad = radius * np.where(np.arange(n_samples) % 2 == 0, 1.0, rng.random(n_samples) ** (1 / 3))
    pts = v * rad[:, None]
    s, r, b = params.sigma, params.r, params.b
    J = np.zeros((n_samples, 3, 3))
    J[:, 0, 0], J[:, 0, 1] = -s, s
    J[:, 1, 0], J[:, 1, 1], J[:, 1, 2] = r - pts[:, 2], -1.0, -pts[:, 0]
    J[:, 2, 0], J[:, 2, 1], J[:, 2, 2] = pts[:, 1], pts[:, 0], -b
    return float(np.linalg.norm(J, ord=2, axis=(1, 2)).max())


@dataclass
class GronwallReport:
    times: np.ndarray
    lhs: np.ndarray
    bound: np.ndarray
    c1: float
    sup_diff: float

    @property
    def margin_ratio(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(self.bound > 0, self.lhs / self.bound, 0.0)
        return float(r.max())

    @property
    def holds(self):
        return bool(np.all(self.lhs <= self.bound))


def gronwall_check(params, eps_amp, state0, t_max=1.0, dt=1e-3, n_times=50, c1=None):
    """Compare ``|X_eps(t) - X(t)|`` with ``t ||X_eps - X||_inf exp(||X||_C1 t)``.

    Both trajectories start at ``state0``; the perturbed field adds the bump
    with amplitude ``eps_amp``.

    Raises
    ------
    PropertyViolation
        Naming the first sampled time where the bound fails.
    """
    if not 0 < t_max <= 2.0:
        raise PreconditionError("t_max must lie in (0, 2]")
    base = params.with_bump(0.0)
    pert = params.with_bump(eps_amp)
    stride = max(1, int(round(t_max / dt)) // n_times)
    a = integrate(base, state0, t_max, dt, stride)
    b = integrate(pert, state0, t_max, dt, stride)
    t = a.times[1:]
    lhs = np.linalg.norm(b.states[1:] - a.states[1:], axis=1)
    L = c1_bound(base) if c1 is None else c1
    bound = t * eps_amp * np.exp(L * t)
    rep = GronwallReport(t, lhs, bound, L, eps_amp)
    if not rep.holds:
        k = int(np.argmax(lhs > bound))
        raise PropertyViolation(
            f"Gronwall bound violated at t = {t[k]:.4g}: {lhs[k]:.3e} > {bound[k]:.3e}"
        )
    return rep
