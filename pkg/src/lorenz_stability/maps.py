"""One-dimensional Lorenz-like interval maps on I = [-1/2, 1/2].

The model family is the odd power law

    T0(x) =  2**g * x**g - 1/2        for 0 < x <= 1/2
    T0(x) = -2**g * (-x)**g + 1/2     for -1/2 <= x < 0

with exponent ``g = gamma`` in (1/2, 1). Both branches are full (each maps
onto all of I), the derivative blows up like ``|x|**(g - 1)`` at the cut and
is smallest, ``2 g``, at the endpoints. The perturbed map ``T_eps`` moves the
discontinuity to ``O = eps`` by pre-composing ``T0`` with the piecewise
affine map sending ``[O, 1/2]`` onto ``[0, 1/2]`` and ``[-1/2, O]`` onto
``[-1/2, 0]``.

A piecewise linear doubling map with the same branch geometry is provided as
an exactly solvable test map (Lebesgue measure is invariant and Ulam
discretization is exact).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BranchRangeError,
    DiscontinuityError,
    PreconditionError,
    ResourceError,
)

log = logging.getLogger(__name__)

LEFT, RIGHT = 0, 1
I_LO, I_HI = -0.5, 0.5


def _branch_id(branch):
    if branch in (LEFT, "left", "L"):
        return LEFT
    if branch in (RIGHT, "right", "R"):
        return RIGHT
    raise PreconditionError(f"unknown branch {branch!r}; use 'left' or 'right'")


class IntervalMap:
    """Two full branches on I split at ``self.cut``; subclasses supply the
    branch formulas in the normalized coordinate ``u`` (see ``_to_u``)."""

    cut: float

    # -- helpers shared by the concrete maps ---------------------------------
    def _check_points(self, x):
        x = np.asarray(x, dtype=float)
        if np.any((x < I_LO) | (x > I_HI)) or not np.all(np.isfinite(x)):
            raise PreconditionError("points must lie in [-1/2, 1/2]")
        if np.any(x == self.cut):
            raise DiscontinuityError(
                f"map is discontinuous at O = {self.cut!r}; evaluate one-sided limits instead"
            )
        return x

    def branch_domains(self):
        """Monotonicity intervals ``[(-1/2, O), (O, 1/2)]``."""
        return [(I_LO, self.cut), (self.cut, I_HI)]

    def one_sided_limits(self):
        """``(T(O-), T(O+))``; always ``(1/2, -1/2)`` for full branches."""
        return (I_HI, I_LO)

    def __call__(self, x):
        return self.evaluate(x)

    def min_slope(self):
        """Infimum of ``T'`` over I minus the cut."""
        raise NotImplementedError

    def iterate(self, x, n=1):
        """Apply the map ``n`` times to an array of points.

        Points that land exactly on the cut (a null event) are nudged by one
        ulp towards the right branch and logged.
        """
        x = np.array(x, dtype=float, copy=True)
        for _ in range(n):
            x = self._nudge(x)
            x = self.evaluate(x)
        return x

    def _nudge(self, x):
        hit = x == self.cut
        if np.any(hit):
            log.info("orbit hit the discontinuity at %d point(s); nudging by one ulp", hit.sum())
            x = np.where(hit, np.nextafter(self.cut, 1.0), x)
        return x


@dataclass(frozen=True)
class ModelMapParams(IntervalMap):
    """Parameters of the power-law family ``T_eps``.

    Parameters
    ----------
    gamma : float
        Branch exponent in (1/2, 1). The Hoelder exponent of ``1/T'`` is
        ``alpha = 1 - gamma`` and the variation exponent is ``p = 1/alpha``.
    eps : float
        Position of the discontinuity ``O_eps = eps``.
    eps_max : float
        Largest ``|eps|`` the family is meant to cover; enters the uniform
        expansion constant ``theta = 2 gamma / (1 + 2 eps_max)``.
    """

    gamma: float = 0.75
    eps: float = 0.0
    eps_max: float = 0.05

    def __post_init__(self):
        g = float(self.gamma)
        if not 0.5 < g < 1.0:
            raise PreconditionError(f"gamma must lie in (0.5, 1), got {g}")
        if not 0.0 <= self.eps_max < g - 0.5:
            raise PreconditionError(
                f"eps_max must satisfy 0 <= eps_max < gamma - 1/2 = {g - 0.5}, got {self.eps_max}"
            )
        if abs(self.eps) > self.eps_max:
            raise PreconditionError(f"|eps| = {abs(self.eps)} exceeds eps_max = {self.eps_max}")

    # -- derived constants -----------------------------------------------------
    @property
    def cut(self):
        return float(self.eps)

    @property
    def alpha(self):
        return 1.0 - self.gamma

    @property
    def p(self):
        return 1.0 / self.alpha

    @property
    def scale(self):
        return 2.0 ** self.gamma

    def with_eps(self, eps):
        return ModelMapParams(self.gamma, eps, self.eps_max)

    def unperturbed(self):
        return self.with_eps(0.0)

    def min_slope(self):
        return 2.0 * self.gamma / (1.0 + 2.0 * abs(self.eps))

    # -- pieces of the affine pre-composition ------------------------------------
    def _widths(self):
        o = self.cut
        return 1.0 + 2.0 * o, 1.0 - 2.0 * o  # left branch, right branch

    def _to_u(self, x):
        wl, wr = self._widths()
        return np.where(x > self.cut, (x - self.cut) / wr, (x - self.cut) / wl)

    # -- map, derivative, inverse ------------------------------------------------
    def evaluate(self, x):
        x = self._check_points(x)
        u = self._to_u(x)
        a, g = self.scale, self.gamma
        with np.errstate(invalid="ignore"):
            right = a * np.abs(u) ** g - 0.5
            left = 0.5 - a * np.abs(u) ** g
        return np.where(x > self.cut, right, left)[()]

    def derivative(self, x):
        x = self._check_points(x)
        u = np.abs(self._to_u(x))
        wl, wr = self._widths()
        a, g = self.scale, self.gamma
        d0 = a * g * u ** (g - 1.0)
        return np.where(x > self.cut, d0 / wr, d0 / wl)[()]

    def branch_inverse(self, branch, y):
        b = _branch_id(branch)
        y = np.asarray(y, dtype=float)
        if np.any((y < I_LO) | (y > I_HI)):
            raise BranchRangeError("y lies outside the branch image [-1/2, 1/2]")
        wl, wr = self._widths()
        g = self.gamma
        if b == RIGHT:
            u = 0.5 * (y + 0.5) ** (1.0 / g)
            x = self.cut + wr * u
        else:
            u = -0.5 * (0.5 - y) ** (1.0 / g)
            x = self.cut + wl * u
        return x[()]


@dataclass(frozen=True)
class DoublingMap(IntervalMap):
    """Piecewise linear slope-2 map with full branches and the cut at 0.

    ``D(x) = 2x + 1/2`` on ``[-1/2, 0)`` and ``2x - 1/2`` on ``[0, 1/2]``; in
    the coordinate ``u = x + 1/2`` this is ``u -> 2u mod 1``.
    """

    eps: float = 0.0
    name: str = field(default="doubling", repr=False)

    @property
    def cut(self):
        return 0.0

    def with_eps(self, eps):
        # the test family is rigid: every eps gives the same dynamics
        return DoublingMap(eps)

    def unperturbed(self):
        return DoublingMap(0.0)

    def min_slope(self):
        return 2.0

    def evaluate(self, x):
        x = self._check_points(x)
        return np.where(x > 0.0, 2.0 * x - 0.5, 2.0 * x + 0.5)[()]

    def derivative(self, x):
        x = self._check_points(x)
        return np.full_like(x, 2.0)[()]

    def branch_inverse(self, branch, y):
        b = _branch_id(branch)
        y = np.asarray(y, dtype=float)
        if np.any((y < I_LO) | (y > I_HI)):
            raise BranchRangeError("y lies outside the branch image [-1/2, 1/2]")
        return ((y + 0.5) / 2.0 if b == RIGHT else (y - 0.5) / 2.0)[()]

    def iterate(self, x, n=1, rng=None):
        """Iterate exactly on 52-bit dyadic states.

        Floating point doubling loses one bit per step and collapses to the
        fixed point after ~53 steps. With ``rng`` given, the bit shifted out
        at the bottom is replaced by a fresh random bit, which reproduces
        the law of the orbit of a Lebesgue-random point.
        """
        k = _to_dyadic(x)
        for _ in range(n):
            k = _dyadic_shift(k, rng)
        return _from_dyadic(k)


_DYADIC_BITS = 52
_DYADIC_MASK = np.uint64((1 << _DYADIC_BITS) - 1)


def _to_dyadic(x):
    u = np.asarray(x, dtype=float) + 0.5
    return np.floor(u * 2.0**_DYADIC_BITS).astype(np.uint64)


def _from_dyadic(k):
    return (k.astype(float) + 0.5) * 2.0**-_DYADIC_BITS - 0.5


def _dyadic_shift(k, rng):
    k = (k << np.uint64(1)) & _DYADIC_MASK
    if rng is not None:
        k = k | rng.integers(0, 2, size=k.shape, dtype=np.uint64)
    return k


# ---------------------------------------------------------------------------
# operation-level API
# ---------------------------------------------------------------------------


def eval_map(params, x):
    """``T_eps(x)``; raises :class:`DiscontinuityError` at ``x = O_eps``."""
    return params.evaluate(x)


def eval_derivative(params, x):
    """``T_eps'(x) > 1``; raises :class:`DiscontinuityError` at the cut."""
    return params.derivative(x)


def branch_inverse(params, branch_id, y):
    """Preimage of ``y`` on the branch ``'left'`` or ``'right'``."""
    return params.branch_inverse(branch_id, y)


def orbit_derivative(params, x, n):
    """``(T^n)'(x)`` by the chain rule along the orbit of ``x``."""
    x = np.array(x, dtype=float, copy=True)
    d = np.ones_like(x)
    for _ in range(n):
        d = d * params.derivative(x)
        x = params.evaluate(x)
    return d


@dataclass(frozen=True)
class CylinderPartition:
    """Level-``n`` dynamical partition; ``breakpoints`` has ``2**n + 1`` entries."""

    level: int
    breakpoints: np.ndarray

    @property
    def intervals(self):
        b = self.breakpoints
        return list(zip(b[:-1], b[1:]))

    @property
    def lengths(self):
        return np.diff(self.breakpoints)

    @property
    def delta(self):
        """Minimal cylinder length, the estimate of ``delta_n``."""
        return float(self.lengths.min())


def cylinder_partition(params, n):
    """Join of ``T^{-j}`` of the branch partition for ``j < n``."""
    if n < 1:
        raise PreconditionError("cylinder level must be >= 1")
    if n > 30:
        raise ResourceError(f"level {n} would need 2**{n} intervals")
    pts = np.array([I_LO, I_HI])
    for _ in range(n):
        left = params.branch_inverse(LEFT, pts)
        right = params.branch_inverse(RIGHT, pts)
        # left(1/2) and right(-1/2) both equal the cut; keep it once
        pts = np.concatenate([left, right[1:]])
    return CylinderPartition(n, pts)


@dataclass(frozen=True)
class ExpansionCertificate:
    """Uniform constants of the family: ``(T^n)' >= C theta**n``, the
    p-variation bound ``W`` of ``1/T'`` per branch and cylinder lengths."""

    C: float
    theta: float
    W: float
    delta_n: dict

    def __post_init__(self):
        if not (self.theta > 1 and self.C > 0 and np.isfinite(self.W)):
            raise PreconditionError("certificate needs theta > 1, C > 0, finite W")
        if any(d <= 0 for d in self.delta_n.values()):
            raise PreconditionError("cylinder lengths must be positive")

    def W_ell(self, ell):
        """Inductive p-variation bound ``W(ell)`` for ``1/(T^{ell+1})'``.

        For ``C = 1`` the closed form is a 0/0 limit; the underlying
        recursion ``W(ell) = W(ell-1) + W`` then gives ``(ell + 1) W``.
        """
        C = self.C
        if ell == 0:
            return self.W
        if np.isclose(C, 1.0):
            return (ell + 1) * self.W
        return (C**ell + C - 2) / (C ** (ell - 1) * (C - 1)) * self.W


def expansion_certificate(params, levels=(1, 2, 3, 4)):
    """Constants valid for every ``|eps| <= params.eps_max`` of the family.

    ``C = 1`` and ``theta = 2 gamma / (1 + 2 eps_max)``. On each branch
    ``1/T'`` is monotone, so its p-variation equals its range, which is
    largest for ``|eps| = eps_max``: ``W = (1 + 2 eps_max) / (2 gamma)``.
    ``delta_n`` is the minimum of the cylinder lengths over
    ``eps in {-eps_max, 0, eps_max}``.
    """
    if isinstance(params, DoublingMap):
        return ExpansionCertificate(1.0, 2.0, 0.0, {n: 0.5**n for n in levels})
    em = params.eps_max
    theta = 2.0 * params.gamma / (1.0 + 2.0 * em)
    W = (1.0 + 2.0 * em) / (2.0 * params.gamma)
    deltas = {}
    for n in levels:
        deltas[n] = min(cylinder_partition(params.with_eps(e), n).delta for e in (-em, 0.0, em))
    return ExpansionCertificate(1.0, theta, W, deltas)


@dataclass(frozen=True)
class NeighborhoodH:
    """Interval around the two cuts excluded from the C^1 comparison."""

    eta: float
    interval: tuple

    def __post_init__(self):
        lo, hi = self.interval
        if not hi - lo < self.eta:
            raise PreconditionError("|H| must be smaller than eta")

    def contains(self, x):
        lo, hi = self.interval
        return (x >= lo) & (x <= hi)


def neighborhood(eps, eta):
    """Symmetric ``H = [-r, r]`` with ``r = max(2|eps|, eta/4)``, shrunk when
    needed so that ``|H| < eta`` while still containing ``0`` and ``eps``."""
    if not eta > 2.0 * abs(eps):
        raise PreconditionError(f"eta = {eta} must exceed 2|eps| = {2 * abs(eps)}")
    r = max(2.0 * abs(eps), eta / 4.0)
    if 2.0 * r >= eta:
        r = 0.5 * (abs(eps) + eta / 2.0)
    return NeighborhoodH(eta, (-r, r))


def _outside_samples(lo, hi, n_uniform, n_geometric=60):
    """Uniform grid on ``[lo, hi]`` plus points clustered at ``lo``."""
    uni = np.linspace(lo, hi, n_uniform)
    geo = lo + (hi - lo) * 2.0 ** -np.arange(1, n_geometric + 1)
    return np.concatenate([uni, geo])


def perturbation_distance(params_eps, eta, n_samples=10_000):
    """``d(T, T_eps) = sup_{x not in H} |T_eps - T| + |T_eps' - T'|``.

    The supremum is taken over a dense sample of each component of ``H^c``
    refined geometrically towards ``H``, where the derivatives blow up.

    Returns
    -------
    H : NeighborhoodH
    d : float
    """
    H = neighborhood(params_eps.eps, eta)
    T0 = params_eps.unperturbed()
    lo, hi = H.interval
    xs = np.concatenate(
        [
            -_outside_samples(-lo, 0.5, n_samples),
            _outside_samples(hi, 0.5, n_samples),
        ]
    )
    xs = xs[(xs != params_eps.cut) & (xs != 0.0)]
    diff = np.abs(params_eps(xs) - T0(xs)) + np.abs(
        params_eps.derivative(xs) - T0.derivative(xs)
    )
    return H, float(diff.max())
