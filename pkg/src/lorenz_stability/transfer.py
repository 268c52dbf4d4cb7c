"""Transfer operators of the interval maps and their Ulam discretization.

The Ulam matrix has entries ``m(J_i ∩ T^{-1} J_j) / m(J_i)`` for the cells
``J_i`` of the uniform partition. Because the branches have closed-form
inverses the entries are exact: the preimages of all cell edges under each
branch, merged with the cell edges themselves, cut every domain cell into
pieces that map into a single target cell.

Densities are pushed forward by the transpose, ``h -> M^T h``, which equals
the cell average of ``P_eps h`` whenever ``h`` is constant on cells.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linprog

from .errors import ConvergenceError, PreconditionError
from .function_space import RHO0_DEFAULT, GridFunction, seminorm_v11p
from .maps import LEFT, RIGHT

log = logging.getLogger(__name__)


@dataclass
class UlamOperator:
    """Row-stochastic Ulam matrix of a map on ``n_cells`` uniform cells."""

    n_cells: int
    entries: sp.csr_matrix
    eps: float = 0.0
    _pt: sp.csr_matrix = field(default=None, repr=False)

    @property
    def transpose(self):
        if self._pt is None:
            self._pt = self.entries.T.tocsr()
        return self._pt

    def apply(self, f, n=1):
        """Push ``f`` (grid function or value array) forward ``n`` times."""
        v = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
        for _ in range(n):
            v = self.transpose @ v
        return GridFunction(v) if isinstance(f, GridFunction) else v

    def row_sums(self):
        return np.asarray(self.entries.sum(axis=1)).ravel()

    def to_csv(self, path, header=None):
        """Coordinate triples ``row,col,value``."""
        coo = self.entries.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            for h in header or []:
                fh.write(f"# {h}\n")
            fh.write("row,col,value\n")
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r},{c},{v:.17g}\n")

    @classmethod
    def from_csv(cls, path, n_cells, eps=0.0):
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=_skip(path), ndmin=2)
        rows, cols, vals = data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2]
        m = sp.csr_matrix((vals, (rows, cols)), shape=(n_cells, n_cells))
        return cls(n_cells, m, eps)


def _skip(path):
    with open(path) as fh:
        n = 0
        for line in fh:
            n += 1
            if not line.startswith("#"):
                return n
    return n


def ulam_matrix(tmap, n_cells):
    """Exact Ulam discretization of ``tmap`` on ``n_cells`` cells.

    Cells straddling the cut are split there, so no entry integrates across
    the discontinuity.
    """
    if n_cells < 16:
        raise PreconditionError("ulam_matrix needs n_cells >= 16")
    n = n_cells
    edges = np.linspace(-0.5, 0.5, n + 1)
    rows, cols, vals = [], [], []
    for branch, (lo, hi) in zip((LEFT, RIGHT), tmap.branch_domains()):
        pre = tmap.branch_inverse(branch, edges)
        inner = edges[(edges > lo) & (edges < hi)]
        pts = np.unique(np.concatenate([[lo, hi], inner, np.clip(pre, lo, hi)]))
        a, b = pts[:-1], pts[1:]
        keep = b > a
        a, b = a[keep], b[keep]
        mid = 0.5 * (a + b)
        i =np.clip(np.floor((mid + 0.5) * n).astype(int), 0, n - 1)
        j = np.clip(np.floor((tmap(mid) + 0.5) * n).astype(int), 0, n - 1)
        rows.append(i)
        cols.append(j)
        vals.append((b - a) * n)
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    m.sum_duplicates()
    return UlamOperator(n, m, getattr(tmap, "eps", 0.0))


def apply_transfer_pointwise(tmap, f, x):
    """``P f(x) = sum over branches of (f / T')(T_i^{-1} x)``.

    ``f`` may be a grid function or any vectorized callable.
    """
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for branch in (LEFT, RIGHT):
        y = tmap.branch_inverse(branch, x)
        total = total + f(y) / tmap.derivative(y)
    return total[()]


@dataclass
class DensityResult:
    h: GridFunction
    residual: float
    iterations: int


def invariant_density(op, tol=1e-10, max_iter=100_000):
    """Fixed density of ``M^T`` by power iteration from the uniform density.

    ``residual`` is the L1 distance ``||M^T h - h||_1`` of the returned
    density.
    """
    n = op.n_cells
    pt = op.transpose
    h = np.ones(n)
    w = 1.0 / n
    residual = np.inf
    for it in range(1, max_iter + 1):
        h_new = pt @ h
        h_new *= n / h_new.sum()
        residual = np.abs(h_new - h).sum() * w
        h = h_new
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"power iteration did not reach residual {tol:g} in {max_iter} steps",
            residual=residual,
            iterations=max_iter,
        )
    residual = float(np.abs(pt @ h - h).sum() * w)
    return DensityResult(GridFunction(h), residual, it)


def density(tmap, n_cells, tol=1e-10, max_iter=100_000):
    """Convenience: Ulam matrix and invariant density of ``tmap``."""
    return invariant_density(ulam_matrix(tmap, n_cells), tol, max_iter)


def second_eigenvalue(op, k=4):
    """Modulus of the second largest Ulam eigenvalue (spectral gap proxy)."""
    vals = spla.eigs(op.transpose, k=k, which="LM", return_eigenvectors=False, tol=1e-10)
    mods = np.sort(np.abs(vals))[::-1]
    return float(mods[1])


# ---------------------------------------------------------------------------
# stability and the mixed norm
# ---------------------------------------------------------------------------


def stability_curve(tmap, eps_list, n_cells, tol=1e-10):
    """``[(eps, ||h_eps - h_0||_1)]`` for the family of ``tmap``."""
    h0 = density(tmap.unperturbed(), n_cells, tol).h
    out = []
    for eps in eps_list:
        h = density(tmap.with_eps(eps), n_cells, tol).h
        out.append((float(eps), (h - h0).l1()))
    return out


def default_basket(n_cells, h0=None, rho0=RHO0_DEFAULT, p=4.0):
    """Test functions for the mixed norm, each with ``||f||_{1,1/p} = 1``.

    Indicators, two power-law spikes, two trigonometric profiles and
    (optionally) the unperturbed invariant density.
    """
    n = n_cells
    raw = {
        "ind[0,1/2]": GridFunction.indicator(0.0, 0.5, n),
        "ind[-0.3,0.1]": GridFunction.indicator(-0.3, 0.1, n),
        "ind[0.05,0.35]": GridFunction.indicator(0.05, 0.35, n),
        "spike(0.2)": GridFunction.from_callable(lambda x: np.abs(x - 0.2) ** -0.3, n, cut=0.2),
        "spike(-0.1)": GridFunction.from_callable(lambda x: np.abs(x + 0.1) ** -0.3, n, cut=-0.1),
        "cos(2pi x)": GridFunction.from_callable(lambda x: 1.0 + np.cos(2 * np.pi * x), n),
        "sin(6pi x)": GridFunction.from_callable(lambda x: 1.0 + np.sin(6 * np.pi * x), n),
    }
    if h0 is not None:
        raw["h0"] = h0
    return {k: f / seminorm_v11p(f, rho0, p).norm for k, f in raw.items()}


def mixed_norm_distance(tmap_eps, basket, n_cells=None, ops=None):
    """Lower estimate of ``|||P_eps - P_0|||`` over a normalized basket.

    Returns ``max_f ||P_eps f - P_0 f||_1`` with both operators realized as
    Ulam matrices on the basket's grid. ``ops`` may pass precomputed
    ``(op_eps, op_0)``.
    """
    fs = list(basket.values()) if isinstance(basket, dict) else list(basket)
    if not fs:
        raise PreconditionError("basket must be nonempty")
    n = fs[0].n_cells if n_cells is None else n_cells
    if ops is None:
        ops = (ulam_matrix(tmap_eps, n), ulam_matrix(tmap_eps.unperturbed(), n))
    op_e, op_0 = ops
    return max((op_e.apply(f) - op_0.apply(f)).l1() for f in fs)


def loglog_slope(xs, ys):
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# ---------------------------------------------------------------------------
# Lasota-Yorke probes
# ---------------------------------------------------------------------------


@dataclass
class Probe:
    label: str
    eps: float
    n: int
    norm_f: float
    l1_f: float
    l1: float
    v11p: float

    @property
    def norm(self):
        return self.l1 + self.v11p


def lasota_yorke_probe(op, f, n, label="", rho0=RHO0_DEFAULT, p=4.0):
    """Measure ``||P^n f||_1`` and ``V_{1,1/p}(P^n f)`` on the grid."""
    if n > 12:
        raise PreconditionError("probes are limited to n <= 12")
    rf = seminorm_v11p(f, rho0, p)
    g = op.apply(f, n)
    rg = seminorm_v11p(g, rho0, p)
    return Probe(label, op.eps, n, rf.norm, rf.l1, rg.l1, rg.v11p)


@dataclass
class LasotaYorkeEstimate:
    """``||P^n f|| <= A1 kappa^n ||f|| + A2 ||f||_1`` for every probe."""

    A1: float
    A2: float
    kappa: float
    probes: list
    tolerance: float = 0.0

    def bound(self, probe):
        return self.A1 * self.kappa**probe.n * probe.norm_f + self.A2 * probe.l1_f

    def violations(self):
        return [pr for pr in self.probes if pr.norm > self.bound(pr) + self.tolerance]


def _lp_fit(probes, kappa, tol):
    # minimize the summed bound subject to covering every probe
    a = np.array([[kappa**pr.n * pr.norm_f, pr.l1_f] for pr in probes])
    b = np.array([pr.norm - tol for pr in probes])
    res = linprog(
        c=a.sum(axis=0), A_ub=-a, b_ub=-b, bounds=[(1e-12, None), (1e-12, None)], method="highs"
    )
    if not res.success:
        return None
    x = res.x.copy()
    # the solver meets constraints only up to its feasibility tolerance;
    # raise A2 by the worst deficit so every probe is covered exactly
    deficit = b - a @ x
    bad = deficit > 0
    if bad.any():
        x[1] += float(np.max(deficit[bad] / a[bad, 1])) * (1 + 1e-12)
    return x, float(a.sum(axis=0) @ x)


def fit_lasota_yorke(probes, kappa_max=0.9, tol=0.0, n_kappa=90):
    """Single certificate for all probes, scanning ``kappa`` in ``(0, kappa_max]``.

    For each ``kappa`` the linear program "minimize the summed bound over
    the probes" gives ``(A1, A2)``; the ``kappa`` with the smallest summed
    bound is kept.
    """
    best = None
    for kappa in np.linspace(kappa_max / n_kappa, kappa_max, n_kappa):
        fit = _lp_fit(probes, kappa, tol)
        if fit is not None and (best is None or fit[1] < best[1]):
            best = (fit[0], fit[1], kappa)
    if best is None:
        raise ConvergenceError("no Lasota-Yorke certificate found")
    (A1, A2), _, kappa = best
    return LasotaYorkeEstimate(float(A1), float(A2), float(kappa), list(probes), tol)
