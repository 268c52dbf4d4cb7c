import numpy as np
import pytest

from conftest import EPS_GRID
from lorenz_stability.errors import DegenerateVarianceError, DiscontinuityError, PreconditionError
from lorenz_stability.function_space import GridFunction
from lorenz_stability.maps import DoublingMap, ModelMapParams
from lorenz_stability.statistics import center_observable, green_kubo_variance
from lorenz_stability.suspension import (
    LAMBDA1_LORENZ,
    FlowObservableSpec,
    SkewProduct,
    SuspensionSystem,
    flow_clt_empirical,
    flow_integral_observable,
    flow_variance,
    flow_variance_curve,
    mean_return_time,
    poincare_step,
    return_time,
    return_time_curve,
    srb_flow_average,
    srb_flow_average_quadrature,
)
from lorenz_stability.transfer import invariant_density, ulam_matrix


def cos_obs(x):
    return np.cos(2 * np.pi * (np.asarray(x) + 0.5))


@pytest.fixture(scope="module")
def model_system():
    return SuspensionSystem(SkewProduct(ModelMapParams()))


@pytest.fixture(scope="module")
def doubling_system():
    return SuspensionSystem(SkewProduct(DoublingMap()), constant_roof=1.0)


# -- skew product ---------------------------------------------------------------------


def test_poincare_step_example():
    sk = SkewProduct(ModelMapParams(), 0.3, 0.3)
    x, y = poincare_step(sk, (np.array([0.25]), np.array([0.0])))
    assert x[0] == pytest.approx(2**-0.75 - 0.5)
    assert y[0] == pytest.approx(0.3)


def test_leaves_contract():
    sk = SkewProduct(ModelMapParams())
    x = np.array([0.1, 0.1])
    y = np.array([0.2, -0.3])
    for n in range(1, 6):
        x, y = sk.step(x, y)
        assert abs(y[0] - y[1]) == pytest.approx(0.3**n * 0.5)


def test_skew_preconditions():
    with pytest.raises(PreconditionError):
        SkewProduct(ModelMapParams(), 0.3, 0.4)
    with pytest.raises(DiscontinuityError):
        SkewProduct(ModelMapParams()).step(np.array([0.0]), np.array([0.0]))


# -- roof -------------------------------------------------------------------------


def test_lorenz_lambda():
    assert LAMBDA1_LORENZ == pytest.approx(11.8277, abs=1e-4)


def test_return_time_examples(model_system):
    assert return_time(model_system, 0.5) == pytest.approx(np.log(2) / LAMBDA1_LORENZ)
    assert return_time(model_system, 0.5) == pytest.approx(0.0586, abs=1e-4)
    unit = SuspensionSystem(SkewProduct(ModelMapParams()), lambda1=1.0)
    assert return_time(unit, np.exp(-1.0)) == pytest.approx(1.0)
    deep = np.exp(-2 * LAMBDA1_LORENZ * 10.0)
    assert return_time(model_system, deep) == 10.0
    with pytest.raises(DiscontinuityError):
        return_time(model_system, 0.0)


def test_roof_preconditions():
    with pytest.raises(PreconditionError):
        SuspensionSystem(SkewProduct(ModelMapParams()), tau_cap=5.0)


def test_mean_return_time_closed_form():
    system = SuspensionSystem(SkewProduct(DoublingMap()), lambda1=1.0, tau_cap=np.inf)
    mrt = mean_return_time(system, GridFunction.constant(1.0, 1024))
    assert mrt.value == pytest.approx(1 + np.log(2), abs=1e-12)


def test_cutoffs_increase_to_full_value(model_system, model_density):
    mrt = mean_return_time(model_system, model_density, cutoffs=(0.01, 0.05, 0.1, 0.5, 1, 5))
    vals = list(mrt.cutoffs.values())
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(mrt.value, rel=1e-12)


def test_return_time_continuity(model_system):
    rows = return_time_curve(model_system, EPS_GRID)
    ref = rows[0][1]
    diffs = [abs(v - ref) for _, v in rows[1:]]
    assert all(a > b for a, b in zip(diffs, diffs[1:]))


# -- flow observables -------------------------------------------------------------


def test_flow_integral_examples(model_system):
    x = np.array([0.1, -0.3])
    spec = FlowObservableSpec(lambda x: 2 * x)
    np.testing.assert_allclose(
        flow_integral_observable(model_system, spec, x), 2 * x * return_time(model_system, x)
    )
    zero = FlowObservableSpec(lambda x: 0 * x)
    np.testing.assert_allclose(flow_integral_observable(model_system, zero, x), 0.0)
    two = SuspensionSystem(SkewProduct(DoublingMap()), constant_roof=2.0)
    ramp = FlowObservableSpec(lambda x: np.ones_like(x), np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 2.0]))
    assert flow_integral_observable(two, ramp, np.array([0.2]))[0] == pytest.approx(2.0)


def test_profile_must_be_valid():
    with pytest.raises(PreconditionError):
        FlowObservableSpec(lambda x: x, np.array([0.5, 1.0]), np.array([1.0, 1.0]))


# -- flow variance ----------------------------------------------------------------


def test_constant_roof_collapse(doubling_system):
    res = flow_variance(doubling_system, FlowObservableSpec(cos_obs), n_cells=1024)
    assert res.sigma2 == pytest.approx(0.5, abs=1e-3)
    assert res.sigma2 == pytest.approx(res.sigma2_base, abs=1e-12)


def test_constant_roof_scaling():
    c = 2.5
    system = SuspensionSystem(SkewProduct(DoublingMap()), constant_roof=c)
    op = ulam_matrix(system.base, 1024)
    h = GridFunction.constant(1.0, 1024)
    base = green_kubo_variance(center_observable(GridFunction.from_callable(cos_obs, 1024), h), op).sigma2
    res = flow_variance(system, FlowObservableSpec(cos_obs), op, h)
    assert res.sigma2 == pytest.approx(c * base, abs=1e-8)


def test_constant_flow_observable_is_degenerate():
    system = SuspensionSystem(SkewProduct(DoublingMap()), constant_roof=3.0)
    res = flow_variance(system, FlowObservableSpec(lambda x: 4.0 + 0 * x), n_cells=1024)
    assert res.sigma2 == 0.0 and res.degenerate
    with pytest.raises(DegenerateVarianceError):
        flow_clt_empirical(system, FlowObservableSpec(lambda x: 0 * x), 10.0, 50, n_cells=1024)


def test_model_flow_variance_frozen(model_system):
    res = flow_variance(model_system, FlowObservableSpec(lambda x: x))
    assert res.sigma2 == pytest.approx(0.0113033, abs=1e-6)
    assert res.mean_return_time == pytest.approx(0.1546060, abs=1e-6)
    assert res.flow_mean == pytest.approx(0.0, abs=1e-12)


def test_flow_variance_continuity(model_system):
    _, rows = flow_variance_curve(model_system, FlowObservableSpec(lambda x: x), EPS_GRID)
    d = [r[2] for r in rows]
    assert all(a > b for a, b in zip(d, d[1:]))


def test_flow_clt_doubling(doubling_system):
    res = flow_clt_empirical(doubling_system, FlowObservableSpec(cos_obs), 1000.0, 1000, seed=4, n_cells=1024)
    assert res.ks <= 0.07


def test_flow_clt_model(model_system):
    res = flow_clt_empirical(model_system, FlowObservableSpec(lambda x: x), 1000.0, 1000, seed=5)
    assert res.ks <= 0.07
    assert res.empirical_variance == pytest.approx(res.sigma2, rel=0.15)


# -- SRB averages -----------------------------------------------------------------


def test_srb_normalization(model_system):
    res = srb_flow_average(model_system, lambda x, y, t: 1.0 + 0 * x + 0 * t, 20_000, seed=0)
    assert res.value == pytest.approx(1.0, abs=1e-12)
    assert srb_flow_average_quadrature(model_system, lambda x, t: 1.0 + 0 * t) == pytest.approx(1.0, abs=1e-12)


def test_srb_collapse_constant_roof():
    system = SuspensionSystem(SkewProduct(DoublingMap()), constant_roof=1.7)
    ind = lambda x, t: ((x >= 0.1) & (x < 0.35)).astype(float) + 0 * t  # noqa: E731
    h = invariant_density(ulam_matrix(system.base, 1024))
    assert srb_flow_average_quadrature(system, ind, h) == pytest.approx(0.25, abs=1e-8)
    orbit = srb_flow_average(system, lambda x, y, t: ind(x, t), 50_000, seed=2)
    assert abs(orbit.value - 0.25) <= 4 * orbit.stderr + 1e-3


def test_srb_orbit_matches_quadrature(model_system):
    phi = lambda x, t: x**2 + 0 * t  # noqa: E731
    q = srb_flow_average_quadrature(model_system, phi)
    o = srb_flow_average(model_system, lambda x, y, t: phi(x, t), 100_000, seed=3)
    assert abs(o.value - q) <= 4 * o.stderr


def test_srb_orbit_length_floor(model_system):
    with pytest.raises(PreconditionError):
        srb_flow_average(model_system, lambda x, y, t: x, 100)
