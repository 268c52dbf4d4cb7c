"""Green-Kubo variance, Monte-Carlo CLT checks and variance continuity.

For a centered observable ``psi`` (``int psi h dx = 0``) the asymptotic
variance of the Birkhoff sums is

    sigma^2 = int psi^2 h dx + 2 sum_{i >= 1} int P^i(psi h) psi dx
            = -int psi^2 h dx + 2 int psi (I - P)^{-1}(psi h) dx,

evaluated here with the Ulam matrix in place of ``P``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import stats

from .errors import (
    DegenerateVarianceError,
    PreconditionError,
    PropertyViolation,
    TruncationError,
)
from .function_space import GridFunction
from .maps import DoublingMap
from .transfer import DensityResult, invariant_density, ulam_matrix

ZERO_VARIANCE = 1e-8
CENTERING_TOL = 1e-6
TERM_FLOOR = 1e-24


@dataclass
class CenteredObservable:
    """``centered = raw - int raw h dx``; ``func`` optionally gives exact
    pointwise values of ``raw`` for orbit sampling."""

    raw: GridFunction
    eps: float
    centered: GridFunction
    density: GridFunction
    mean: float
    func: object = None

    def __call__(self, x):
        if self.func is not None:
            return np.asarray(self.func(x), dtype=float) - self.mean
        return self.centered(x)


def _as_grid(density):
    return density.h if isinstance(density, DensityResult) else density


def center_observable(psi_hat, density, eps=0.0, func=None):
    """Subtract the mean of ``psi_hat`` under the invariant density."""
    h = _as_grid(density)
    mean = psi_hat.dot(h)
    return CenteredObservable(psi_hat, eps, psi_hat - mean, h, mean, func)


@dataclass
class VarianceResult:
    sigma2: float
    static: float
    partial_sums: np.ndarray
    truncation: int
    tail_bound: float
    degenerate: bool = False
    sigma2_resolvent: float = None
    correlations: np.ndarray = field(default=None, repr=False)


def _correlations(op, psi, h, max_terms, tol, consecutive=3):
    """Terms ``c_i = int P^i(psi h) psi`` until ``|2 c_i|`` stays below
    ``tol`` times the static term (or ``TERM_FLOOR``) for ``consecutive``
    steps."""
    w = 1.0 / op.n_cells
    static = float(np.dot(psi * psi, h) * w)
    # absolute floor: a round-off sized observable has round-off sized terms
    thresh = max(tol * abs(static), TERM_FLOOR)
    v = psi * h
    terms = []
    quiet = 0
    for _ in range(max_terms):
        v = op.transpose @ v
        c = float(np.dot(v, psi) * w)
        terms.append(c)
        quiet = quiet + 1 if abs(2.0 * c) <= thresh else 0
        if quiet >= consecutive:
            return static, np.array(terms), True
    return static, np.array(terms), False


def _tail_bound(terms):
    tail = np.abs(terms[-4:])
    if tail[-1] == 0.0:
        return 0.0
    ratios = tail[1:] / np.where(tail[:-1] == 0, np.inf, tail[:-1])
    r = float(np.median(ratios)) if ratios.size else 1.0
    if not r < 1.0:
        return np.inf
    return 2.0 * tail[-1] * r / (1.0 - r)


def resolvent_variance(op, psi, h):
    """``-int psi^2 h + 2 int psi (I - P)^{-1}(psi h)`` on mean-zero vectors.

    The singular system is bordered with the normalization ``int v = 0``:

        [ I - M^T   h ] [v]   [psi h]
        [ w 1^T     0 ] [l] = [  0  ]
    """
    n = op.n_cells
    w = 1.0 / n
    A = sp.identity(n, format="csr") - op.transpose
    top = sp.hstack([A, sp.csr_matrix(h.reshape(-1, 1))])
    bottom = sp.csr_matrix(np.concatenate([np.full(n, w), [0.0]]).reshape(1, -1))
    K = sp.vstack([top, bottom]).tocsc()
    rhs = np.concatenate([psi * h, [0.0]])
    sol = spla.spsolve(K, rhs)
    v = sol[:n]
    static = float(np.dot(psi * psi, h) * w)
    return -static + 2.0 * float(np.dot(psi, v) * w)


def green_kubo_variance(obs, op, max_terms=200, tol=1e-10, resolvent=False,
                        centering_tol=CENTERING_TOL):
    """Asymptotic variance of ``obs`` under the Ulam operator ``op``.

    Parameters
    ----------
    obs : CenteredObservable
        Must integrate to zero against its density within ``centering_tol``.
    op : UlamOperator
        The discretized transfer operator consistent with ``obs.density``.
    max_terms : int
        Cap on the number of correlation terms.
    tol : float
        Relative size (w.r.t. the static term) below which a correlation
        term counts as negligible; three in a row stop the series.
    resolvent : bool
        Also evaluate the resolvent form and store it as
        ``sigma2_resolvent``.

    Raises
    ------
    PreconditionError
        If the observable is not centered.
    TruncationError
        If the series is not Cauchy after ``max_terms`` terms.
    """
    psi = obs.centered.values
    h = obs.density.values
    mean = float(np.dot(psi, h) / op.n_cells)
    if abs(mean) > centering_tol:
        raise PreconditionError(f"observable is not centered: int psi h = {mean:.3e}")
    static, terms, converged = _correlations(op, psi, h, max_terms, tol)
    if not converged:
        raise TruncationError(
            f"correlation series not Cauchy after {max_terms} terms "
            f"(last term {terms[-1]:.3e})",
            residual=abs(terms[-1]),
            iterations=max_terms,
        )
    partial = static + 2.0 * np.cumsum(terms)
    sigma2 = float(partial[-1])
    if sigma2 < -ZERO_VARIANCE:
        raise PropertyViolation(f"negative variance {sigma2:.3e}")
    degenerate = abs(sigma2) <= ZERO_VARIANCE
    result = VarianceResult(
        sigma2=0.0 if degenerate else sigma2,
        static=static,
        partial_sums=partial,
        truncation=len(terms),
        tail_bound=_tail_bound(terms),
        degenerate=degenerate,
        correlations=terms,
    )
    if resolvent:
        result.sigma2_resolvent = resolvent_variance(op, psi, h)
    return result


# ---------------------------------------------------------------------------
# Monte-Carlo CLT
# ---------------------------------------------------------------------------


def sample_from_density(h, size, rng):
    """Inverse-CDF sampling from a grid density."""
    h = _as_grid(h)
    cdf = np.cumsum(h.values)
    cdf /= cdf[-1]
    cells = np.searchsorted(cdf, rng.random(size), side="right")
    cells = np.minimum(cells, h.n_cells - 1)
    return -0.5 + (cells + rng.random(size)) / h.n_cells


def birkhoff_sums(tmap, observable, x0, n_steps, rng=None):
    """``sum_{i<n} observable(T^i x0)`` for an array of starting points."""
    x = np.array(x0, dtype=float, copy=True)
    s = np.zeros_like(x)
    exact_doubling = isinstance(tmap, DoublingMap)
    for _ in range(n_steps):
        s += observable(x)
        x = tmap.iterate(x, 1, rng=rng) if exact_doubling else tmap.iterate(x, 1)
    return s


@dataclass
class CLTResult:
    ks: float
    sigma2: float
    normalized_sums: np.ndarray = field(repr=False)
    seed: int = None

    @property
    def empirical_variance(self):
        return float(np.var(self.normalized_sums))


def clt_empirical(tmap, obs, sigma2, n_steps=10_000, n_samples=2000, seed=0):
    """Kolmogorov-Smirnov distance between ``n^{-1/2} S_n`` and ``N(0, sigma2)``.

    Starting points are drawn from the invariant density of ``obs``.
    """
    if sigma2 <= ZERO_VARIANCE:
        raise DegenerateVarianceError(
            "sigma^2 = 0: the observable is a coboundary; test that case with "
            "green_kubo_variance instead of a normal law"
        )
    rng = np.random.default_rng(seed)
    x0 = sample_from_density(obs.density, n_samples, rng)
    sums = birkhoff_sums(tmap, obs, x0, n_steps, rng) / np.sqrt(n_steps)
    ks = stats.kstest(sums, "norm", args=(0.0, np.sqrt(sigma2))).statistic
    return CLTResult(float(ks), float(sigma2), sums, seed)


# ---------------------------------------------------------------------------
# variance continuity
# ---------------------------------------------------------------------------


@dataclass
class ContinuityRow:
    eps: float
    sigma2: float
    diff: float
    diagnostics: dict


def _setup(tmap, psi_hat, n_cells, func, tol):
    op = ulam_matrix(tmap, n_cells)
    h = invariant_density(op).h
    obs = center_observable(psi_hat, h, getattr(tmap, "eps", 0.0), func)
    var = green_kubo_variance(obs, op, tol=tol)
    return op, h, obs, var


def _orbit_of_density(op, v, count):
    out = []
    for _ in range(count):
        v = op.transpose @ v
        out.append(v)
    return out


def variance_continuity_curve(tmap, psi_hat, eps_list, n_cells=8192, block=10,
                              func=None, tol=1e-12, n_tail=200):
    """``sigma^2_eps`` along ``eps_list`` with the error decomposition.

    Diagnostics per ``eps`` (with ``l = block``):

    ``static``
        ``|int (psi0^2 h0 - psi_eps^2 h_eps)|``.
    ``block``
        ``|sum_{i<l} int (P_eps^i(psi_eps h_eps) psi_eps - P^i(psi0 h0) psi0)|``.
    ``tail_0`` and ``tail_eps``
        ``2 ||psi||_inf sum_{i>=l} ||P^i(psi h)||_1`` for the unperturbed and
        the perturbed system.
    ``density_l1`` and ``observable_l1``
        ``||h_eps - h0||_1`` and ``||psi_eps - psi0||_1``.
    """
    if list(eps_list) != sorted(eps_list, key=abs, reverse=True):
        raise PreconditionError("eps_list must decrease towards 0")
    w = 1.0 / n_cells
    op0, h0, obs0, var0 = _setup(tmap.unperturbed(), psi_hat, n_cells, func, tol)
    psi0 = obs0.centered.values
    v0 = _orbit_of_density(op0, psi0 * h0.values, n_tail)
    block0 = sum(np.dot(v, psi0) * w for v in v0[: block - 1])
    tail0 = 2 * np.abs(psi0).max() * sum(np.abs(v).sum() * w for v in v0[block - 1 :])
    static0 = np.dot(psi0**2, h0.values) * w
    rows = []
    for eps in eps_list:
        op, h, obs, var = _setup(tmap.with_eps(eps), psi_hat, n_cells, func, tol)
        psi = obs.centered.values
        ve = _orbit_of_density(op, psi * h.values, n_tail)
        block_e = sum(np.dot(v, psi) * w for v in ve[: block - 1])
        diag = {
            "static": abs(static0 - np.dot(psi**2, h.values) * w),
            "block": abs(block_e - block0),
            "tail_0": tail0,
            "tail_eps": 2 * np.abs(psi).max() * sum(np.abs(v).sum() * w for v in ve[block - 1 :]),
            "density_l1": (h - h0).l1(),
            "observable_l1": (obs.centered - obs0.centered).l1(),
        }
        rows.append(ContinuityRow(float(eps), var.sigma2, abs(var.sigma2 - var0.sigma2), diag))
    return var0.sigma2, rows


def check_decreasing(values, strict=True, atol=0.0):
    """Indices ``k`` where ``values[k+1]`` fails to decrease."""
    bad = []
    for k in range(len(values) - 1):
        a, b = values[k], values[k + 1]
        if (strict and not b < a + atol) or (not strict and b > a + atol):
            bad.append(k)
    return bad


def assert_variance_continuity(rows, terms=("static", "block"), strict=True, atol=0.0):
    """Raise :class:`PropertyViolation` naming the first non-decreasing term."""
    series = {"sigma2 difference": [r.diff for r in rows]}
    for t in terms:
        series[t] = [r.diagnostics[t] for r in rows]
    for name, vals in series.items():
        bad = check_decreasing(vals, strict, atol)
        if bad:
            k = bad[0]
            raise PropertyViolation(
                f"{name} does not decrease between eps={rows[k].eps:g} and eps={rows[k + 1].eps:g}: "
                f"{vals[k]:.3e} -> {vals[k + 1]:.3e}"
            )
