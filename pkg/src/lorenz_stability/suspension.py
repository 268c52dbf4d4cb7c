"""Poincare skew products, logarithmic roof functions and suspension flows.

The section map is ``F(x, y) = (T(x), beta*y + delta*sign(x - O))``: vertical
leaves are mapped into vertical leaves and contracted by ``beta``. The roof
is ``tau(x) = min(-log|x - O| / lambda1, tau_cap)``, depending on ``x``
only, and flow observables are taken constant on leaves,
``psi(xi, t) = base(x) * w(t)``. The induced observable
``Psi(x) = base(x) * int_0^tau(x) w`` is then a function on the interval and
its variance under ``T`` gives the flow variance

    sigma_X^2 = sigma_T^2(Psi_c) / int tau dmu,

where ``Psi_c = Psi - m * tau`` is the induced version of the flow-centered
observable ``psi - m``, ``m = int Psi dmu / int tau dmu``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from .errors import DegenerateVarianceError, DiscontinuityError, PreconditionError
from .function_space import GridFunction, cell_averages
from .maps import DoublingMap
from .statistics import (
    ZERO_VARIANCE,
    center_observable,
    green_kubo_variance,
    sample_from_density,
)
from .transfer import DensityResult, invariant_density, ulam_matrix

log = logging.getLogger(__name__)

LAMBDA1_LORENZ = (-11.0 + np.sqrt(1201.0)) / 2.0

_GL8_NODES, _GL8_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class SkewProduct:
    """``F(x, y) = (T(x), beta*y + delta*sign(x - O))`` on the square I x I."""

    base: object
    beta: float = 0.3
    delta: float = 0.3

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise PreconditionError("beta must lie in (0, 1)")
        if not 0.0 < self.delta <= (1.0 - self.beta) / 2.0 + 1e-15:
            raise PreconditionError("delta must lie in (0, (1 - beta)/2] to keep F(Sigma) in Sigma")

    @property
    def cut(self):
        return self.base.cut

    def fiber(self, x, y):
        return self.beta * np.asarray(y, dtype=float) + self.delta * np.sign(
            np.asarray(x, dtype=float) - self.cut
        )

    def step(self, x, y, rng=None):
        if np.any(np.asarray(x) == self.cut):
            raise DiscontinuityError("the Poincare map is undefined on the leaf x = O")
        y_new = self.fiber(x, y)
        if isinstance(self.base, DoublingMap):
            x_new = self.base.iterate(x, 1, rng=rng)
        else:
            x_new = self.base(x)
        return x_new, y_new

    def project(self, x, y):
        """Projection along the (vertical) stable leaves."""
        return x


def poincare_step(skew, point, rng=None):
    """``(x, y) -> F(x, y)``."""
    x, y = point
    return skew.step(x, y, rng)


@dataclass(frozen=True)
class SuspensionSystem:
    """Suspension of ``skew`` under the logarithmic roof.

    ``constant_roof`` replaces the logarithmic roof by a constant, which is
    used to check the formulas in the degenerate case.
    """

    skew: SkewProduct
    lambda1: float = LAMBDA1_LORENZ
    tau_cap: float = 10.0
    constant_roof: float = None

    def __post_init__(self):
        if self.constant_roof is not None:
            if not self.constant_roof > 0:
                raise PreconditionError("constant roof must be positive")
            return
        if not self.lambda1 > 0:
            raise PreconditionError("lambda1 must be positive")
        if not self.tau_cap >= 10.0:
            raise PreconditionError("tau_cap must be >= 10")

    @property
    def cut(self):
        return self.skew.cut

    @property
    def base(self):
        return self.skew.base

    def neglected_measure(self):
        """Lebesgue measure of the set where the cap is active."""
        if self.constant_roof is not None:
            return 0.0
        return min(1.0, 2.0 * np.exp(-self.lambda1 * self.tau_cap))

    def return_time(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x == self.cut):
            raise DiscontinuityError("return time is infinite on the stable leaf of the cut")
        if self.constant_roof is not None:
            return np.full_like(x, float(self.constant_roof))[()]
        tau = -np.log(np.abs(x - self.cut)) / self.lambda1
        return np.minimum(tau, self.tau_cap)[()]

    def with_eps(self, eps):
        return SuspensionSystem(
            SkewProduct(self.base.with_eps(eps), self.skew.beta, self.skew.delta),
            self.lambda1,
            self.tau_cap,
            self.constant_roof,
        )


def return_time(system, x):
    """``tau(x) = min(-log|x - O| / lambda1, tau_cap)``."""
    return system.return_time(x)


# ---------------------------------------------------------------------------
# integrals of the roof
# ---------------------------------------------------------------------------


def _capped_log_primitive(d, L):
    """``int_0^d min(-log s, L) ds`` for ``d >= 0``."""
    d = np.asarray(d, dtype=float)
    dc = np.exp(-L) if np.isfinite(L) else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        unc = d - np.where(d > 0, d * np.log(d), 0.0) - dc
    return np.where(d <= dc, L * d if np.isfinite(L) else 0.0, unc)


def _roof_cell_integrals(system, n, cap=None):
    """Exact ``int_cell tau`` for the ``n`` uniform cells."""
    e = np.linspace(-0.5, 0.5, n + 1)
    if system.constant_roof is not None:
        c = system.constant_roof if cap is None else min(cap, system.constant_roof)
        return np.full(n, c / n)
    cap = system.tau_cap if cap is None else min(cap, system.tau_cap)
    L = system.lambda1 * cap
    O = system.cut
    a, b = e[:-1], e[1:]
    F = lambda d: _capped_log_primitive(d, L)  # noqa: E731
    right = F(np.maximum(b - O, 0)) - F(np.maximum(a - O, 0))
    left = F(np.maximum(O - a, 0)) - F(np.maximum(O - b, 0))
    return (right + left) / system.lambda1


def roof_cell_averages(system, n):
    return _roof_cell_integrals(system, n) * n


@dataclass
class MeanReturnTime:
    value: float
    cutoffs: dict


def mean_return_time(system, density, cutoffs=(1, 2, 5, 10)):
    """``int tau h dx`` exactly for a grid density, plus ``int min(N, tau) h``.

    ``density`` may be a :class:`DensityResult` or a grid function.
    """
    h = density.h if isinstance(density, DensityResult) else density
    value = float(np.dot(_roof_cell_integrals(system, h.n_cells), h.values))
    cut = {N: float(np.dot(_roof_cell_integrals(system, h.n_cells, cap=N), h.values)) for N in cutoffs}
    return MeanReturnTime(value, cut)


# ---------------------------------------------------------------------------
# flow observables
# ---------------------------------------------------------------------------


@dataclass
class FlowObservableSpec:
    """``psi(xi, t) = base(x) * w(t)``; ``w`` is given by samples
    ``(profile_t, profile_w)`` or is identically one when omitted."""

    base: object
    profile_t: np.ndarray = None
    profile_w: np.ndarray = None
    _cum: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if (self.profile_t is None) != (self.profile_w is None):
            raise PreconditionError("give both profile_t and profile_w, or neither")
        if self.profile_t is not None:
            t = np.asarray(self.profile_t, dtype=float)
            w = np.asarray(self.profile_w, dtype=float)
            if t[0] != 0.0 or np.any(np.diff(t) <= 0) or np.any(w < 0):
                raise PreconditionError("profile must start at t=0, increase and be nonnegative")
            self.profile_t, self.profile_w = t, w
            self._cum = cumulative_trapezoid(w, t, initial=0.0)

    def weight_integral(self, t):
        """``W(t) = int_0^t w``; the last sample of ``w`` is held beyond the grid."""
        t = np.asarray(t, dtype=float)
        if self.profile_t is None:
            return t
        t_end = self.profile_t[-1]
        inside = np.interp(np.minimum(t, t_end), self.profile_t, self._cum)
        return inside + np.maximum(t - t_end, 0.0) * self.profile_w[-1]

    def weight(self, t):
        if self.profile_t is None:
            return np.ones_like(np.asarray(t, dtype=float))
        return np.interp(t, self.profile_t, self.profile_w)

    def __call__(self, x, t):
        return self.base(x) * self.weight(t)


def flow_integral_observable(system, spec, x):
    """``Psi(x) = int_0^tau(x) psi(X_t(x)) dt = base(x) W(tau(x))``."""
    return spec.base(x) * spec.weight_integral(system.return_time(x))


def induced_observable(system, spec, n_cells):
    """Cell averages of ``Psi`` and of ``tau``."""
    cut = None if system.constant_roof is not None else system.cut
    psi = cell_averages(lambda x: flow_integral_observable(system, spec, x), n_cells, cut=cut)
    return GridFunction(psi), GridFunction(roof_cell_averages(system, n_cells))


@dataclass
class FlowVarianceResult:
    sigma2: float
    sigma2_base: float
    mean_return_time: float
    flow_mean: float
    degenerate: bool


def _density_for(system, op, density):
    if density is not None:
        return density.h if isinstance(density, DensityResult) else density
    return invariant_density(op).h


def flow_variance(system, spec, op=None, density=None, n_cells=8192):
    """``sigma^2_X = sigma^2_T(Psi_c) / int tau dmu`` (see module docstring)."""
    if op is None:
        op = ulam_matrix(system.base, n_cells)
    h = _density_for(system, op, density)
    psi, tau = induced_observable(system, spec, op.n_cells)
    mean_tau = tau.dot(h)
    m = psi.dot(h) / mean_tau
    obs = center_observable(psi - m * tau, h, getattr(system.base, "eps", 0.0))
    var = green_kubo_variance(obs, op)
    return FlowVarianceResult(
        sigma2=var.sigma2 / mean_tau,
        sigma2_base=var.sigma2,
        mean_return_time=mean_tau,
        flow_mean=m,
        degenerate=var.degenerate,
    )


# ---------------------------------------------------------------------------
# SRB averages
# ---------------------------------------------------------------------------


@dataclass
class SRBAverage:
    value: float
    stderr: float
    orbit_length: int


def _time_integrals(phi, x, y, tau):
    """``int_0^tau phi(x, y, t) dt`` by 8-point Gauss-Legendre in ``t``."""
    t = 0.5 * tau[:, None] * (1.0 + _GL8_NODES[None, :])
    vals = phi(x[:, None], y[:, None], t)
    vals = np.broadcast_to(vals, t.shape)
    return 0.5 * tau * (vals * _GL8_WEIGHTS[None, :]).sum(axis=1)


def srb_flow_average(system, phi, orbit_length=100_000, seed=0, burn_in=1000, n_chains=100):
    """Time average of ``phi(x, y, t)`` along suspension orbits.

    ``n_chains`` independent Poincare orbits, each discarding ``burn_in``
    steps, share ``orbit_length`` section points between them; their
    empirical measure stands in for ``mu_F``. The estimate is
    ``sum_k int_0^tau_k phi / sum_k tau_k`` and ``stderr`` comes from the
    spread of the per-chain ratios.
    """
    if orbit_length < 10_000:
        raise PreconditionError("orbit_length must be at least 1e4")
    rng = np.random.default_rng(seed)
    skew = system.skew
    steps = -(-orbit_length // n_chains)
    x = rng.uniform(-0.5, 0.5, n_chains)
    y = np.zeros(n_chains)
    num = np.zeros(n_chains)
    den = np.zeros(n_chains)
    for k in range(burn_in + steps):
        x = skew.base._nudge(x)
        if k >= burn_in:
            tau = np.atleast_1d(system.return_time(x))
            num += _time_integrals(phi, x, y, tau)
            den += tau
        x, y = skew.step(x, y, rng)
    value = num.sum() / den.sum()
    chains = num / den
    stderr = chains.std(ddof=1) / np.sqrt(n_chains)
    return SRBAverage(float(value), float(stderr), steps * n_chains)


def srb_flow_average_quadrature(system, phi_base, density=None, n_cells=8192):
    """Same average from the invariant density, for ``phi(x, t)``
    independent of the leaf coordinate:
    ``int h(x) int_0^tau(x) phi(x, t) dt dx / int tau h``."""
    if density is None:
        density = invariant_density(ulam_matrix(system.base, n_cells))
    h = density.h if isinstance(density, DensityResult) else density

    def inner(x):
        tau = np.atleast_1d(system.return_time(x))
        return _time_integrals(lambda xx, yy, t: phi_base(xx, t), np.atleast_1d(x), np.zeros_like(tau), tau)

    cut = None if system.constant_roof is not None else system.cut
    g = GridFunction(cell_averages(inner, h.n_cells, cut=cut))
    tau = GridFunction(roof_cell_averages(system, h.n_cells))
    return g.dot(h) / tau.dot(h)


# ---------------------------------------------------------------------------
# flow CLT
# ---------------------------------------------------------------------------


@dataclass
class FlowCLTResult:
    ks: float
    sigma2: float
    normalized_integrals: np.ndarray = field(repr=False)
    seed: int = None

    @property
    def empirical_variance(self):
        return float(np.var(self.normalized_integrals, ddof=1))


def flow_time_integrals(system, spec, t_horizon, x0, flow_mean=0.0, rng=None):
    """``int_0^t (psi - m)(X_s) ds`` for suspension trajectories started on
    the section at the points ``x0``."""
    base = system.base
    x = np.array(x0, dtype=float, copy=True)
    acc = np.zeros_like(x)
    elapsed = np.zeros_like(x)
    active = np.ones(x.shape, dtype=bool)
    while np.any(active):
        xa = base._nudge(x[active])
        tau = np.atleast_1d(system.return_time(xa))
        rem = t_horizon - elapsed[active]
        full = tau <= rem
        part = np.where(
            full,
            flow_integral_observable(system, spec, xa) - flow_mean * tau,
            spec.base(xa) * spec.weight_integral(rem) - flow_mean * rem,
        )
        acc[active] += part
        elapsed[active] += np.where(full, tau, rem)
        if isinstance(base, DoublingMap):
            x[active] = base.iterate(xa, 1, rng=rng)
        else:
            x[active] = base(xa)
        idx = np.nonzero(active)[0]
        active[idx[~full]] = False
    return acc


def flow_clt_empirical(system, spec, t_horizon=1000.0, n_samples=1000, seed=0,
                       n_cells=8192, variance=None):
    """KS distance of ``t^{-1/2} int_0^t psi_c(X_s) ds`` from ``N(0, sigma_X^2)``.

    ``variance`` may pass a precomputed :class:`FlowVarianceResult`.
    """
    op = ulam_matrix(system.base, n_cells)
    h = invariant_density(op).h
    if variance is None:
        variance = flow_variance(system, spec, op, h)
    if variance.degenerate or variance.sigma2 <= ZERO_VARIANCE:
        raise DegenerateVarianceError(
            "flow variance vanishes; the induced observable is a coboundary"
        )
    rng = np.random.default_rng(seed)
    x0 = sample_from_density(h, n_samples, rng)
    z = flow_time_integrals(system, spec, t_horizon, x0, variance.flow_mean, rng) / np.sqrt(t_horizon)
    ks = stats.kstest(z, "norm", args=(0.0, np.sqrt(variance.sigma2))).statistic
    return FlowCLTResult(float(ks), variance.sigma2, z, seed)


def flow_variance_curve(system, spec, eps_list, n_cells=8192):
    """``[(eps, sigma^2_X(eps), |sigma^2_X(eps) - sigma^2_X(0)|)]``."""
    ref = flow_variance(system.with_eps(0.0), spec, n_cells=n_cells).sigma2
    out = []
    for eps in eps_list:
        s = flow_variance(system.with_eps(eps), spec, n_cells=n_cells).sigma2
        out.append((float(eps), s, abs(s - ref)))
    return ref, out


def return_time_curve(system, eps_list, n_cells=8192):
    """``[(eps, int tau_eps h_eps dx)]`` with the ``eps = 0`` value first."""
    out = []
    for eps in [0.0, *eps_list]:
        sys_e = system.with_eps(eps)
        h = invariant_density(ulam_matrix(sys_e.base, n_cells)).h
        out.append((float(eps), mean_return_time(sys_e, h).value))
    return out
