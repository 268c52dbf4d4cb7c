import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorenz_stability.errors import (
    BranchRangeError,
    DiscontinuityError,
    PreconditionError,
    ResourceError,
)
from lorenz_stability.maps import (
    DoublingMap,
    ModelMapParams,
    branch_inverse,
    cylinder_partition,
    eval_derivative,
    eval_map,
    expansion_certificate,
    neighborhood,
    orbit_derivative,
    perturbation_distance,
)

# -- hand-derived values ------------------------------------------------------


def test_endpoint_fixed(model):
    assert eval_map(model, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_quarter_point(model):
    # 2^0.75 * 0.25^0.75 - 1/2 = 2^-0.75 - 1/2
    assert eval_map(model, 0.25) == pytest.approx(2**-0.75 - 0.5, abs=1e-15)
    assert eval_map(model, 0.25) == pytest.approx(0.094604, abs=1e-6)


def test_right_limit_at_cut_is_minus_half():
    m = ModelMapParams(0.75, 0.01)
    x = np.nextafter(0.01, 1.0)
    assert eval_map(m, x) == pytest.approx(-0.5, abs=1e-9)
    assert m.one_sided_limits() == (0.5, -0.5)


def test_evaluation_at_cut_raises():
    with pytest.raises(DiscontinuityError):
        eval_map(ModelMapParams(0.75, 0.01), 0.01)
    with pytest.raises(DiscontinuityError):
        eval_derivative(ModelMapParams(), 0.0)


def test_derivative_values(model):
    assert eval_derivative(model, 0.5) == pytest.approx(1.5, abs=1e-14)
    assert eval_derivative(ModelMapParams(gamma=0.6), 0.5) == pytest.approx(1.2, abs=1e-14)
    # closed form 2^0.75 * 0.75 * (1e-6)^-0.25 = 39.887...; quoted elsewhere as 39.86
    d = eval_derivative(model, 1e-6)
    assert d == pytest.approx(2**0.75 * 0.75 * 1e-6**-0.25, rel=1e-14)
    assert d == pytest.approx(39.86, rel=1e-3)


def test_min_slope_bound():
    m = ModelMapParams(0.75, 0.04)
    x = np.linspace(-0.5, 0.5, 10001)
    x = x[x != m.cut]
    assert m.derivative(x).min() >= m.min_slope() - 1e-12
    assert m.min_slope() == pytest.approx(1.5 / 1.08)


def test_branch_inverse_values(model):
    assert branch_inverse(model, "right", 0.5) == pytest.approx(0.5)
    assert branch_inverse(model, "right", 2**-0.75 - 0.5) == pytest.approx(0.25, abs=1e-14)
    assert branch_inverse(model, "left", -0.5) == pytest.approx(-0.5)
    with pytest.raises(BranchRangeError):
        branch_inverse(model, "left", 0.7)
    with pytest.raises(PreconditionError):
        branch_inverse(model, "middle", 0.0)


def test_gamma_out_of_range():
    with pytest.raises(PreconditionError):
        ModelMapParams(gamma=1.2)
    with pytest.raises(PreconditionError):
        ModelMapParams(gamma=0.75, eps=0.1)


def test_cylinders_level_one():
    c = cylinder_partition(ModelMapParams(), 1)
    np.testing.assert_allclose(c.breakpoints, [-0.5, 0.0, 0.5])
    assert c.delta == 0.5
    c = cylinder_partition(ModelMapParams(0.75, 0.01), 1)
    np.testing.assert_allclose(c.breakpoints, [-0.5, 0.01, 0.5])


def test_cylinders_level_two(model):
    c = cylinder_partition(model, 2)
    q = branch_inverse(model, "right", 0.0)
    # right preimage of 0: u = 0.5 * 0.5^(4/3)
    assert q == pytest.approx(0.5 * 0.5 ** (4 / 3))
    np.testing.assert_allclose(c.breakpoints, [-0.5, -q, 0.0, q, 0.5], atol=1e-15)
    assert q == pytest.approx(0.19843, abs=1e-5)


def test_cylinder_resource_cap(model):
    with pytest.raises(ResourceError):
        cylinder_partition(model, 31)


def test_certificate(model):
    cert = expansion_certificate(model)
    assert cert.C == 1.0
    assert cert.theta == pytest.approx(1.5 / 1.1)
    assert cert.W == pytest.approx(1.1 / 1.5)
    assert all(d > 0 for d in cert.delta_n.values())
    assert cert.W_ell(0) == cert.W
    # the C = 1 limit of the closed form
    assert cert.W_ell(3) == pytest.approx(4 * cert.W)


def test_orbit_derivative_is_chain_rule(model):
    x = 0.3
    y = eval_map(model, x)
    assert orbit_derivative(model, x, 2) == pytest.approx(
        eval_derivative(model, x) * eval_derivative(model, y)
    )


def test_neighborhood():
    H = neighborhood(0.001, 0.01)
    lo, hi = H.interval
    assert lo <= 0 <= hi and lo <= 0.001 <= hi and hi - lo < 0.01
    with pytest.raises(PreconditionError):
        neighborhood(0.01, 0.02)


def test_perturbation_distance_zero_for_identical_maps(model):
    _, d = perturbation_distance(model, 0.05)
    assert d == 0.0


def test_perturbation_distance_decreasing(model):
    ds = [perturbation_distance(model.with_eps(e), 0.05)[1] for e in (1e-2, 1e-3, 1e-4)]
    assert ds[0] > ds[1] > ds[2] > 0
    _, d = perturbation_distance(model.with_eps(1e-3), 1e-2)
    assert d > 0


# -- doubling map ------------------------------------------------------------


def test_doubling_branches():
    D = DoublingMap()
    assert D(0.25) == pytest.approx(0.0)
    assert D(-0.25) == pytest.approx(0.0)
    assert D.branch_inverse("right", 0.0) == 0.25


def test_doubling_exact_orbit_stays_random():
    D = DoublingMap()
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.5, 0.5, 4000)
    y = D.iterate(x, 200, rng=rng)
    # plain floating point doubling would have collapsed after ~53 steps
    assert abs(y.mean()) < 0.03 and 0.07 < y.var() < 0.1


# -- invariants --------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(
    gamma=st.floats(0.55, 0.95),
    frac=st.floats(-0.9, 0.9),
    x=st.floats(-0.5, 0.5),
)
def test_map_invariants(gamma, frac, x):
    em = 0.5 * (gamma - 0.5)
    m = ModelMapParams(gamma, frac * em, em)
    if x == m.cut:
        return
    y = m(x)
    assert -0.5 - 1e-12 <= y <= 0.5 + 1e-12
    assert m.derivative(x) >= m.min_slope() * (1 - 1e-12)
    branch = "right" if x > m.cut else "left"
    assert m.branch_inverse(branch, np.clip(y, -0.5, 0.5)) == pytest.approx(x, abs=1e-9)
