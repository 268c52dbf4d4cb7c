"""Grid functions, Keller's oscillation seminorm and p-variation.

A :class:`GridFunction` is a piecewise constant function on the uniform
partition of I = [-1/2, 1/2] into ``n`` cells. For such functions the local
oscillation

    osc(f, rho, x) = ess sup { |f(y1) - f(y2)| : y1, y2 in (x - rho, x + rho) }

is piecewise constant in ``x`` with breakpoints at cell edges shifted by
``+-rho``, so ``osc_1(f, rho) = || osc(f, rho, .) ||_1`` can be integrated
exactly. The norm of ``BV_{1,1/p}`` is

    ||f||_{1,1/p} = ||f||_1 + sup_{0 < rho <= rho0} osc_1(f, rho) / rho**(1/p),

with the supremum taken over the geometric grid ``rho0 * 2**-k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .errors import PreconditionError

I_LO, I_HI = -0.5, 0.5
RHO0_DEFAULT = 0.05

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


@dataclass
class GridFunction:
    """Piecewise constant function; cell ``i`` covers
    ``[-1/2 + i/n, -1/2 + (i+1)/n)``."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise PreconditionError("a grid function needs at least two cells")
        if not np.all(np.isfinite(self.values)):
            raise PreconditionError("grid function values must be finite")

    # -- geometry ---------------------------------------------------------------
    @property
    def n_cells(self):
        return self.values.size

    @property
    def width(self):
        return 1.0 / self.n_cells

    @property
    def edges(self):
        return np.linspace(I_LO, I_HI, self.n_cells + 1)

    @property
    def midpoints(self):
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def cell_index(self, x):
        i = np.floor((np.asarray(x, dtype=float) - I_LO) * self.n_cells).astype(int)
        return np.clip(i, 0, self.n_cells - 1)

    def __call__(self, x):
        return self.values[self.cell_index(x)]

    # -- arithmetic -------------------------------------------------------------
    def _wrap(self, values):
        return GridFunction(values)

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.n_cells != self.n_cells:
                raise PreconditionError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._other(other))

    def __neg__(self):
        return self._wrap(-self.values)

    # -- integrals --------------------------------------------------------------
    def integral(self):
        return float(self.values.sum() * self.width)

    def l1(self):
        return float(np.abs(self.values).sum() * self.width)

    def sup(self):
        return float(np.abs(self.values).max())

    def dot(self, other):
        """``int f g dx``."""
        return float(np.dot(self.values, self._other(other)) * self.width)

    # -- constructors -----------------------------------------------------------
    @classmethod
    def constant(cls, c, n):
        return cls(np.full(n, float(c)))

    @classmethod
    def indicator(cls, a, b, n):
        """Cell averages of the indicator of ``[a, b]``."""
        e = np.linspace(I_LO, I_HI, n + 1)
        overlap = np.clip(np.minimum(e[1:], b) - np.maximum(e[:-1], a), 0.0, None)
        full = (e[:-1] >= a) & (e[1:] <= b)
        return cls(np.where(full, 1.0, overlap * n))

    @classmethod
    def from_callable(cls, func, n, cut=None):
        """Cell averages of ``func`` by 6-point Gauss-Legendre per cell.

        The cell containing ``cut`` (if any) is split there and graded
        geometrically towards it, which keeps integrable singularities such
        as ``log|x - cut|`` accurate.
        """
        return cls(cell_averages(func, n, cut=cut))

    # -- io ---------------------------------------------------------------------
    def to_csv(self, path, header=None):
        """Two-column CSV ``midpoint,value``."""
        lines = []
        if header:
            lines.extend(f"# {h}" for h in header)
        lines.append("midpoint,value")
        lines.extend(f"{m:.17g},{v:.17g}" for m, v in zip(self.midpoints, self.values))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            rows = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
        if rows and not _is_number(rows[0].split(",")[0]):
            rows = rows[1:]
        data = np.loadtxt(rows, delimiter=",", ndmin=2)
        mids, vals = data[:, 0], data[:, 1]
        n = vals.size
        expected = I_LO + (np.arange(n) + 0.5) / n
        if not np.allclose(mids, expected, atol=1e-12):
            raise PreconditionError("CSV midpoints do not form a uniform partition of I")
        return cls(vals)


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def _gauss_average(func, a, b):
    """Averages of ``func`` over intervals ``[a_k, b_k]``."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(func(x.ravel()), dtype=float).reshape(x.shape)
    return 0.5 * (vals * _GL_WEIGHTS[None, :]).sum(axis=1)


def _graded_average(func, a, b, cut, levels=40):
    """Average over ``[a, b]`` with geometric grading towards ``cut``."""
    total = 0.0
    for lo, hi in ((a, cut), (cut, b)):
        if hi - lo <= 0:
            continue
        # pieces [cut + d 2^-(k+1), cut + d 2^-k] on the side away from cut
        d = hi - lo
        k = np.arange(levels)
        if lo == cut:
            left, right = cut + d * 2.0 ** -(k + 1), cut + d * 2.0**-k
        else:
            left, right = cut - d * 2.0**-k, cut - d * 2.0 ** -(k + 1)
        avg = _gauss_average(func, left, right)
        total += float(np.sum(avg * (right - left)))
    return total / (b - a)


def cell_averages(func, n, cut=None):
    e = np.linspace(I_LO, I_HI, n + 1)
    a, b = e[:-1], e[1:]
    if cut is None:
        return _gauss_average(func, a, b)
    special = np.nonzero((a <= cut) & (b >= cut))[0]
    regular = np.setdiff1d(np.arange(n), special)
    out = np.empty(n)
    out[regular] = _gauss_average(func, a[regular], b[regular])
    for i in special:
        out[i] = _graded_average(func, a[i], b[i], cut)
    return out


# ---------------------------------------------------------------------------
# oscillation
# ---------------------------------------------------------------------------


def _window_range(values, a, b):
    """``max - min`` of ``values`` over index windows ``[i + a, i + b]``,
    clipped to the array."""
    size = b - a + 1
    origin = -a - size // 2
    mx = maximum_filter1d(values, size, mode="nearest", origin=origin)
    mn = minimum_filter1d(values, size, mode="nearest", origin=origin)
    return mx - mn


def osc_integral(values, width, rho):
    """Exact ``int osc(f, rho, x) dx`` for a step function on a uniform grid.

    ``values`` are the cell values on an interval of ``len(values)`` cells
    of size ``width``; the oscillation at ``x`` only sees cells inside the
    interval, i.e. this computes ``int_Y osc(f|_Y, rho, x) dx``.

    Writing ``rho / width = m + phi`` with integer ``m``, a point at relative
    position ``t`` in cell ``i`` sees the cells ``i - m - [t < phi]`` through
    ``i + m + [t > 1 - phi]``.
    """
    values = np.asarray(values, dtype=float)
    if rho <= 0:
        raise PreconditionError("rho must be positive")
    s = rho / width
    m = int(np.floor(s))
    phi = s - m
    if phi <= 1e-12:
        # window is exactly [i - m, i + m] except on null sets
        pieces = [(1.0, -m, m)]
    elif phi <= 0.5:
        pieces = [(phi, -m - 1, m), (1.0 - 2.0 * phi, -m, m), (phi, -m, m + 1)]
    else:
        pieces = [
            (1.0 - phi, -m - 1, m),
            (2.0 * phi - 1.0, -m - 1, m + 1),
            (1.0 - phi, -m, m + 1),
        ]
    total = 0.0
    for frac, a, b in pieces:
        if frac > 0:
            total += frac * _window_range(values, a, b).sum()
    return total * width


def oscillation(f, rho, x):
    """``osc(f, rho, x)``: range of ``f`` over cells meeting ``(x-rho, x+rho)``."""
    if rho <= 0:
        raise PreconditionError("rho must be positive")
    n = f.n_cells
    x = np.asarray(x, dtype=float)
    # cell k meets the open window iff e_k < x + rho and e_{k+1} > x - rho
    lo = np.clip(np.floor((x - rho - I_LO) * n + 1e-12).astype(int), 0, n - 1)
    hi = np.clip(np.ceil((x + rho - I_LO) * n - 1e-12).astype(int) - 1, 0, n - 1)
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    out = np.array([np.ptp(f.values[i : j + 1]) for i, j in zip(lo, hi)])
    return out[0] if x.ndim == 0 else out


def osc_l1(f, rho, method="exact"):
    """``osc_1(f, rho)``, exact by default or by midpoint quadrature."""
    if rho <= 0:
        raise PreconditionError("rho must be positive")
    if method == "exact":
        return osc_integral(f.values, f.width, rho)
    if method == "midpoint":
        return float(oscillation(f, rho, f.midpoints).sum() * f.width)
    raise PreconditionError(f"unknown quadrature method {method!r}")


def rho_grid(rho0, width):
    """``rho0 * 2**-k`` for ``k = 0..K`` with ``rho0 2**-K >= width``."""
    K = int(np.floor(np.log2(rho0 / width) + 1e-12))
    return rho0 * 2.0 ** -np.arange(max(K, 0) + 1)


@dataclass
class NormReport:
    """Pieces of ``||f||_{1,1/p}``; ``osc1_profile`` maps rho to osc_1."""

    l1: float
    osc1_profile: dict
    v11p: float
    rho0: float
    p: float
    norm: float = field(init=False)

    def __post_init__(self):
        self.norm = self.l1 + self.v11p


def seminorm_v11p(f, rho0=RHO0_DEFAULT, p=4.0, method="exact"):
    """Full :class:`NormReport` of ``f`` in ``BV_{1,1/p}``."""
    if rho0 < 4.0 / f.n_cells:
        raise PreconditionError(
            f"rho0 = {rho0} is below 4/n_cells = {4.0 / f.n_cells}; oscillation not resolvable"
        )
    profile = {float(r): osc_l1(f, r, method) for r in rho_grid(rho0, f.width)}
    v = max(o / r ** (1.0 / p) for r, o in profile.items())
    return NormReport(l1=f.l1(), osc1_profile=profile, v11p=float(v), rho0=rho0, p=p)


def v11p(f, rho0=RHO0_DEFAULT, p=4.0):
    return seminorm_v11p(f, rho0, p).v11p


def norm_11p(f, rho0=RHO0_DEFAULT, p=4.0):
    return seminorm_v11p(f, rho0, p).norm


# ---------------------------------------------------------------------------
# p-variation
# ---------------------------------------------------------------------------


def _turning_points(v):
    """Drop repeats and interior points of monotone runs.

    For ``p >= 1`` an intermediate point of a monotone run never increases
    ``sum |dv|**p`` (superadditivity of ``t**p``), so the optimal partition
    only uses local extrema.
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return v
    keep = np.concatenate([[True], np.diff(v) != 0])
    v = v[keep]
    if v.size <= 2:
        return v
    d = np.sign(np.diff(v))
    turn = np.concatenate([[True], d[1:] != d[:-1], [True]])
    return v[turn]


def p_variation_values(v, p):
    """``V_p`` of a sequence of sample values by O(k^2) dynamic programming
    over its ``k`` turning points."""
    if p < 1:
        raise PreconditionError("p-variation needs p >= 1")
    v = _turning_points(v)
    k = v.size
    if k < 2:
        return 0.0
    if p == 1:
        return float(np.abs(np.diff(v)).sum())
    best = np.zeros(k)
    for j in range(1, k):
        best[j] = np.max(best[:j] + np.abs(v[j] - v[:j]) ** p)
    return float(best[-1] ** (1.0 / p))


def p_variation(f, p):
    """``V_p(f)`` exactly for a grid function (or an array of samples)."""
    values = f.values if isinstance(f, GridFunction) else f
    return p_variation_values(values, p)


# ---------------------------------------------------------------------------
# Keller's inequalities, as (lhs, rhs) pairs
# ---------------------------------------------------------------------------


def fact2_sides(f, p=4.0, rho0=RHO0_DEFAULT):
    """``V_{1,1/p}(f) <= 2**(1/p) V_p(f)``."""
    return v11p(f, rho0, p), 2.0 ** (1.0 / p) * p_variation(f, p)


def fact1_sides(f, lo, hi, rho, rho0=RHO0_DEFAULT):
    """Localization inequality for ``Y = [edge_lo, edge_hi)`` (cells
    ``lo..hi-1``), requires ``|Y| >= 4 rho0`` and ``0 < rho <= rho0``."""
    Y = (hi - lo) * f.width
    if Y < 4 * rho0:
        raise PreconditionError("fact1 needs |Y| >= 4 rho0")
    if not 0 < rho <= rho0:
        raise PreconditionError("fact1 needs 0 < rho <= rho0")
    restricted = np.zeros_like(f.values)
    restricted[lo:hi] = f.values[lo:hi]
    lhs = osc_integral(restricted, f.width, rho)
    inner = osc_integral(f.values[lo:hi], f.width, rho)
    mass = np.abs(f.values[lo:hi]).sum() * f.width
    rhs = (2.0 + 8.0 * rho0 / (Y - 2.0 * rho0)) * inner + 4.0 * rho / Y * mass
    return lhs, rhs


def fact3_sides(tmap, f, lo, hi, rho, rho0=RHO0_DEFAULT, n_fine=4096, C_theta=None):
    """Composition inequality for ``T: Y -> Z`` with ``Y`` the cells
    ``lo..hi-1`` of ``f`` (which must lie inside one branch) and ``Z = T(Y)``.

    Functions on ``Z`` are represented by ``n_fine`` cell averages.
    """
    e = f.edges
    a, b = e[lo], e[hi]
    if a < tmap.cut < b:
        raise PreconditionError("Y must lie inside one monotonicity interval")
    branch = "right" if a >= tmap.cut else "left"
    # stay off the cut itself so T and T' are finite at the end points
    a_eval = np.nextafter(a, 1.0) if a == tmap.cut else a
    b_eval = np.nextafter(b, -1.0) if b == tmap.cut else b
    za, zb = float(tmap(a_eval)), float(tmap(b_eval))
    zw = (zb - za) / n_fine
    ze = np.linspace(za, zb, n_fine + 1)

    def pull(func):
        def g(z):
            y = tmap.branch_inverse(branch, np.clip(z, -0.5, 0.5))
            y = np.clip(y, a_eval, b_eval)
            return func(y) / tmap.derivative(y)

        return _gauss_average(g, ze[:-1], ze[1:])

    g_vals = pull(f)
    w_vals = pull(lambda y: np.ones_like(y))
    C_theta = tmap.min_slope() if C_theta is None else C_theta
    fy = f.values[lo:hi]
    Yl = b - a
    lhs = osc_integral(g_vals, zw, rho)
    rhs = osc_integral(fy, f.width, rho / C_theta) + 5.0 * osc_integral(w_vals, zw, rho) * (
        np.abs(fy).sum() * f.width / Yl + osc_integral(fy, f.width, rho0) / rho0
    )
    return lhs, rhs


def skeller_sides(f, u, rho0=RHO0_DEFAULT, p=4.0):
    """``|int f u| <= (1 + rho0**(1/p)) ||f||_{1,1/p} sup_z |int_{x<=z} u|``
    for a simple ``u`` on the same grid with ``|u| <= 1``."""
    uv = u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)
    if np.abs(uv).max() > 1.0 + 1e-12:
        raise PreconditionError("u must satisfy |u| <= 1")
    lhs = abs(f.dot(uv))
    G = np.concatenate([[0.0], np.cumsum(uv) * f.width])
    rhs = (1.0 + rho0 ** (1.0 / p)) * norm_11p(f, rho0, p) * np.abs(G).max()
    return lhs, rhs
