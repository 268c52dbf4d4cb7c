"""Experiment runners behind the command line.

Each runner takes a resolved config and an output directory and returns
``(outputs, derived, checks)``: the files it wrote, the constants worth
recording in the manifest and named pass/fail property checks.
"""

from __future__ import annotations

import json
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import check, config_hash, output_dir
from .function_space import GridFunction, cell_averages
from .io import write_csv
from .lorenz import (
    VectorFieldParams,
    gronwall_check,
    integrate,
    lorenz_return_fit,
    origin_spectrum,
    rk4_order,
    section_crossings,
    crossings_to_csv,
)
from .maps import DoublingMap, ModelMapParams, expansion_certificate
from .statistics import (
    ZERO_VARIANCE,
    center_observable,
    check_decreasing,
    clt_empirical,
    green_kubo_variance,
    variance_continuity_curve,
)
from .suspension import (
    LAMBDA1_LORENZ,
    FlowObservableSpec,
    SkewProduct,
    SuspensionSystem,
    flow_clt_empirical,
    flow_variance,
    mean_return_time,
    srb_flow_average_quadrature,
)
from .transfer import (
    default_basket,
    fit_lasota_yorke,
    invariant_density,
    lasota_yorke_probe,
    loglog_slope,
    mixed_norm_distance,
    second_eigenvalue,
    ulam_matrix,
)

log = logging.getLogger(__name__)

LY_BASKET = ("ind[0,1/2]", "spike(0.2)", "cos(2pi x)", "sin(6pi x)", "h0")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def build_map(c, eps=None):
    mp = c["map"]
    if mp["family"] == "doubling":
        return DoublingMap(0.0 if eps is None else eps)
    return ModelMapParams(mp["gamma"], mp["eps"] if eps is None else eps, mp["eps_max"])


def variation_exponent(c):
    if c["grid"]["p"]:
        return float(c["grid"]["p"])
    return 1.0 / (1.0 - c["map"]["gamma"]) if c["map"]["family"] == "model" else 4.0


def build_observable(c, tmap):
    """``(grid cell averages, pointwise callable)`` of the configured observable."""
    ob = c["observable"]
    n = c["grid"]["n_cells"]
    kind = ob["kind"]
    if kind == "x":
        func = _identity
    elif kind == "cos":
        func = _cos
    elif kind == "indicator":
        func = _Indicator(ob["a"], ob["b"])
    else:
        rng = np.random.default_rng(ob["nu_seed"])
        func = _Coboundary(tmap, rng.normal(size=ob["nu_cells"]))
    return GridFunction(cell_averages(func, n, cut=tmap.cut)), func


def _identity(x):
    return np.asarray(x, dtype=float)


def _cos(x):
    return np.cos(2.0 * np.pi * (np.asarray(x, dtype=float) + 0.5))


@dataclass
class _Indicator:
    a: float
    b: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return ((x >= self.a) & (x < self.b)).astype(float)


@dataclass
class _Coboundary:
    """``nu(T x) - nu(x)`` for ``nu`` constant on ``len(nu)`` uniform cells."""

    tmap: object
    nu: np.ndarray = field(repr=False)

    def _nu(self, x):
        m = len(self.nu)
        idx = np.clip(np.floor((np.asarray(x) + 0.5) * m).astype(int), 0, m - 1)
        return self.nu[idx]

    def __call__(self, x):
        x = self.tmap._nudge(np.asarray(x, dtype=float))
        return self._nu(self.tmap(x)) - self._nu(x)


def build_system(c, eps=None):
    fl = c["flow"]
    skew = SkewProduct(build_map(c, eps), fl["beta"], fl["delta"])
    lam = fl["lambda1"] or LAMBDA1_LORENZ
    roof = fl["constant_roof"] or None
    return SuspensionSystem(skew, lam, fl["tau_cap"], roof)


def _pmap(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*items)))


def _certificate(c):
    tmap = build_map(c)
    cert = expansion_certificate(tmap)
    return {
        "C": cert.C,
        "theta": cert.theta,
        "W": cert.W,
        "delta_n": {str(k): v for k, v in cert.delta_n.items()},
    }


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def run_density(c, out, h):
    tmap = build_map(c)
    n = c["grid"]["n_cells"]
    op = ulam_matrix(tmap, n)
    d = invariant_density(op, tol=c["tolerances"]["density"])
    path = os.path.join(out, "density.csv")
    write_csv(
        path,
        [("midpoint", "cell midpoint"), ("value", "invariant density on the cell")],
        zip(d.h.midpoints, d.h.values),
        h,
    )
    derived = {
        "iterations": d.iterations,
        "residual": d.residual,
        "second_eigenvalue": second_eigenvalue(op),
        "certificate": _certificate(c),
    }
    checks = {"residual <= tolerance": d.residual <= c["tolerances"]["density"]}
    if isinstance(tmap, DoublingMap):
        err = (d.h - 1.0).l1()
        derived["l1_distance_to_lebesgue"] = err
        checks["doubling density == 1 within 1e-8"] = err <= 1e-8
    return {"density": path}, derived, checks


def _density_l1(c, eps, n, tol):
    h0 = invariant_density(ulam_matrix(build_map(c, 0.0), n), tol).h
    h = invariant_density(ulam_matrix(build_map(c, eps), n), tol).h
    return (h - h0).l1()


def run_stability_curve(c, out, h):
    n, tol = c["grid"]["n_cells"], c["tolerances"]["density"]
    eps = c["sweep"]["eps"]
    dists = _pmap(_density_l1, [(c, e, n, tol) for e in eps], c["experiment"]["workers"])
    path = os.path.join(out, "stability.csv")
    write_csv(path, [("eps", "perturbation size"), ("l1_distance", "||h_eps - h_0||_1")],
              zip(eps, dists), h)
    return (
        {"stability": path},
        {"final_distance": dists[-1], "certificate": _certificate(c)},
        {"strictly decreasing": not check_decreasing(dists)},
    )


def _basket(c):
    n = c["grid"]["n_cells"]
    h0 = invariant_density(ulam_matrix(build_map(c, 0.0), n), c["tolerances"]["density"]).h
    return default_basket(n, h0, c["grid"]["rho0"], variation_exponent(c))


def _mixed(c, eps, basket):
    return mixed_norm_distance(build_map(c, eps), basket)


def run_mixed_norm(c, out, h):
    eps = c["sweep"]["eps"]
    basket = _basket(c)
    dists = _pmap(_mixed, [(c, e, basket) for e in eps], c["experiment"]["workers"])
    slope = loglog_slope(eps, dists)
    path = os.path.join(out, "mixed_norm.csv")
    write_csv(path, [("eps", "perturbation size"),
                     ("distance", "max over the basket of ||(P_eps - P_0) f||_1 with ||f||_{1,1/p} = 1")],
              zip(eps, dists), h, comments=[f"basket: {', '.join(basket)}"])
    alpha = 1.0 - c["map"]["gamma"]
    return (
        {"mixed_norm": path},
        {"loglog_slope": slope, "final_distance": dists[-1], "alpha": alpha},
        {"strictly decreasing": not check_decreasing(dists), "slope >= alpha/2": slope >= 0.5 * alpha},
    )


def run_ly_probe(c, out, h):
    n = c["grid"]["n_cells"]
    rho0, p = c["grid"]["rho0"], variation_exponent(c)
    basket = _basket(c)
    tol = c["tolerances"]["probe"] or 4.0 / n
    probes = []
    for eps in [0.0, *c["sweep"]["eps"]]:
        op = ulam_matrix(build_map(c, eps), n)
        for label in LY_BASKET:
            for k in range(1, c["ly"]["n_max"] + 1):
                probes.append(lasota_yorke_probe(op, basket[label], k, label, rho0, p))
    est = fit_lasota_yorke(probes, c["ly"]["kappa_max"], tol)
    path = os.path.join(out, "ly_probes.csv")
    write_csv(
        path,
        [("label", "basket function"), ("eps", "perturbation size"), ("n", "iterate"),
         ("norm_f", "||f||_{1,1/p}"), ("l1_f", "||f||_1"), ("norm_Pnf", "||P^n f||_{1,1/p}"),
         ("bound", "A1 kappa^n ||f|| + A2 ||f||_1")],
        [(pr.label, pr.eps, pr.n, pr.norm_f, pr.l1_f, pr.norm, est.bound(pr)) for pr in probes],
        h,
    )
    viol = est.violations()
    derived = {"A1": est.A1, "A2": est.A2, "kappa": est.kappa, "tolerance": tol,
               "n_probes": len(probes), "violations": len(viol), "certificate": _certificate(c)}
    checks = {"all probes covered": not viol, "kappa <= kappa_max": est.kappa <= c["ly"]["kappa_max"]}
    return {"ly_probes": path}, derived, checks


def run_variance_curve(c, out, h):
    tmap = build_map(c, 0.0)
    psi, func = build_observable(c, tmap)
    sigma0, rows = variance_continuity_curve(
        tmap, psi, c["sweep"]["eps"], c["grid"]["n_cells"], c["variance"]["block"], func,
    )
    keys = ("static", "block", "tail_0", "tail_eps", "density_l1", "observable_l1")
    path = os.path.join(out, "variance.csv")
    write_csv(
        path,
        [("eps", "perturbation size"), ("sigma2", "Green-Kubo variance"),
         ("diff", "|sigma2_eps - sigma2_0|"), ("static", "static-term difference"),
         ("block", "finite-block correlation difference"), ("tail_0", "unperturbed tail bound"),
         ("tail_eps", "perturbed tail bound"), ("density_l1", "||h_eps - h_0||_1"),
         ("observable_l1", "||psi_eps - psi_0||_1")],
        [(r.eps, r.sigma2, r.diff, *(r.diagnostics[k] for k in keys)) for r in rows],
        h,
        comments=[f"sigma2_0 = {sigma0!r}"],
    )
    col = lambda k: [r.diagnostics[k] for r in rows]  # noqa: E731
    checks = {
        "diff strictly decreasing": not check_decreasing([r.diff for r in rows]),
        "static strictly decreasing": not check_decreasing(col("static")),
        "block strictly decreasing": not check_decreasing(col("block")),
        "tail_0 non-increasing": not check_decreasing(col("tail_0"), strict=False),
        "tail_eps strictly decreasing": not check_decreasing(col("tail_eps")),
    }
    return {"variance": path}, {"sigma2_0": sigma0, "block": c["variance"]["block"]}, checks


def run_clt(c, out, h):
    tmap = build_map(c)
    n = c["grid"]["n_cells"]
    op = ulam_matrix(tmap, n)
    dens = invariant_density(op, c["tolerances"]["density"]).h
    psi, func = build_observable(c, tmap)
    obs = center_observable(psi, dens, tmap.eps, func)
    var = green_kubo_variance(obs, op, c["tolerances"]["max_terms"], c["tolerances"]["variance"])
    res = clt_empirical(tmap, obs, var.sigma2, c["clt"]["n_steps"], c["clt"]["n_samples"],
                        c["experiment"]["seed"])
    path = os.path.join(out, "clt.csv")
    write_csv(path, [("sample", "index"), ("normalized_sum", "n^{-1/2} S_n of the centered observable")],
              enumerate(res.normalized_sums), h)
    derived = {"sigma2": var.sigma2, "truncation_N": var.truncation, "ks": res.ks,
               "empirical_variance": res.empirical_variance, "mean": obs.mean}
    return {"clt": path}, derived, {"ks <= ks_max": res.ks <= c["clt"]["ks_max"]}


def run_flow_variance(c, out, h):
    system = build_system(c)
    n = c["grid"]["n_cells"]
    op = ulam_matrix(system.base, n)
    dens = invariant_density(op, c["tolerances"]["density"]).h
    _, func = build_observable(c, system.base)
    spec = FlowObservableSpec(func)
    fv = flow_variance(system, spec, op, dens)
    res = flow_clt_empirical(system, spec, c["flow"]["t_horizon"], c["flow"]["n_samples"],
                             c["experiment"]["seed"], n, variance=fv)
    batch = res.empirical_variance
    rel = abs(batch - fv.sigma2) / fv.sigma2
    path = os.path.join(out, "flow_variance.csv")
    write_csv(path, [("sample", "index"),
                     ("normalized_integral", "t^{-1/2} int_0^t (psi - m)(X_s) ds")],
              enumerate(res.normalized_integrals), h)
    derived = {
        "sigma2_flow": fv.sigma2, "sigma2_batch_means": batch, "relative_difference": rel,
        "sigma2_induced": fv.sigma2_base, "mean_return_time": fv.mean_return_time,
        "flow_mean": fv.flow_mean, "ks": res.ks, "tau_cap": system.tau_cap,
        "lambda1": system.lambda1, "neglected_measure": system.neglected_measure(),
    }
    checks = {"ratio formula vs batch means within rel_tol": rel <= c["flow"]["rel_tol"]}
    if system.constant_roof is not None:
        psi, _ = build_observable(c, system.base)
        gk = green_kubo_variance(center_observable(psi, dens), op).sigma2
        derived["collapse_sigma2_base"] = gk
        checks["constant-roof collapse exact"] = abs(fv.sigma2 - system.constant_roof * gk) <= 1e-8
    return {"flow_variance": path}, derived, checks


def _flow_point(c, eps):
    system = build_system(c, eps)
    n = c["grid"]["n_cells"]
    op = ulam_matrix(system.base, n)
    dens = invariant_density(op, c["tolerances"]["density"]).h
    _, func = build_observable(c, system.base)
    fv = flow_variance(system, FlowObservableSpec(func), op, dens)
    mrt = mean_return_time(system, dens).value
    srb = srb_flow_average_quadrature(system, _BaseOnly(func), dens)
    return fv.sigma2, mrt, srb


@dataclass
class _BaseOnly:
    func: object

    def __call__(self, x, t):
        return self.func(x) + 0.0 * t


def run_flow_stability(c, out, h):
    eps = [0.0, *c["sweep"]["eps"]]
    pts = _pmap(_flow_point, [(c, e) for e in eps], c["experiment"]["workers"])
    s0, m0, a0 = pts[0]
    rows = [(e, s, abs(s - s0), m, abs(m - m0), a, abs(a - a0)) for e, (s, m, a) in zip(eps, pts)]
    path = os.path.join(out, "flow_stability.csv")
    write_csv(
        path,
        [("eps", "perturbation size"), ("sigma2_flow", "flow variance"),
         ("sigma2_diff", "|sigma2_eps - sigma2_0|"), ("mean_return_time", "int tau_eps dmu_eps"),
         ("return_time_diff", "difference to eps = 0"), ("srb_average", "flow average of the observable"),
         ("srb_diff", "difference to eps = 0")],
        rows,
        h,
    )
    system = build_system(c)
    checks = {
        "flow variance difference decreasing": not check_decreasing([r[2] for r in rows[1:]]),
        "mean return time difference decreasing": not check_decreasing([r[4] for r in rows[1:]]),
    }
    derived = {"sigma2_flow_0": s0, "mean_return_time_0": m0, "srb_average_0": a0,
               "tau_cap": system.tau_cap, "lambda1": system.lambda1}
    return {"flow_stability": path}, derived, checks


def run_ode_validate(c, out, h):
    od = c["ode"]
    params = VectorFieldParams(od["sigma"], od["r"], od["b"], bump_width=od["bump_width"])
    spec = origin_spectrum(params)
    order = rk4_order(params, (1.0, 1.0, 1.0))
    crossings = section_crossings(params, (1.0, 1.0, 1.0), n_crossings=od["n_crossings"],
                                  dt=od["dt"], t_transient=od["t_transient"])
    fit = lorenz_return_fit(crossings, od["top_fraction"])
    p_cross = os.path.join(out, "crossings.csv")
    crossings_to_csv(crossings, p_cross, [f"config_hash: {h}",
                                          "columns: t = crossing time; x, y = point on z = r - 1; "
                                          "dt = time since previous crossing; direction = sign of dz/dt"])
    rows, all_hold = [], True
    for seed in od["gronwall_seeds"]:
        rng = np.random.default_rng(seed)
        start = integrate(params, (1.0, 1.0, 1.0) + rng.normal(size=3), 20.0, od["dt"], 20000).states[-1]
        ref = None
        for amp in [0.0, *od["gronwall_amps"]]:
            rep = gronwall_check(params, amp, start, od["gronwall_t"], od["dt"])
            all_hold &= rep.holds
            if amp == 0.0:
                ref = rep.lhs.max()
            rows.append((seed, amp, rep.times[-1], rep.lhs[-1], rep.bound[-1], rep.margin_ratio, rep.c1))
    p_gr = os.path.join(out, "gronwall.csv")
    write_csv(p_gr, [("seed", "start seed"), ("amp", "bump amplitude"), ("t", "final time"),
                     ("lhs", "|X_eps(t) - X(t)|"), ("bound", "t ||X_eps - X|| exp(||X||_C1 t)"),
                     ("margin_ratio", "max over sampled t of lhs/bound"), ("c1", "||X||_C1 bound")],
              rows, h)
    derived = {
        "lambda": [spec.lambda1, spec.lambda2, spec.lambda3],
        "rk4_order": order,
        "fit_C": fit.C, "fit_O": fit.O, "fit_A": fit.A, "fit_r_squared": fit.r_squared,
        "n_crossings": len(crossings), "unperturbed_lhs_max": ref,
    }
    checks = {
        "eigenvalue ordering": spec.ordering_holds,
        "rk4 order within 0.5 of 4": abs(order - 4.0) <= 0.5,
        "return-time fit r2 >= r2_min": fit.r_squared >= od["r2_min"],
        "gronwall never violated": bool(all_hold),
    }
    return {"crossings": p_cross, "gronwall": p_gr}, derived, checks


RUNNERS = {
    "density": run_density,
    "stability-curve": run_stability_curve,
    "ly-probe": run_ly_probe,
    "mixed-norm": run_mixed_norm,
    "variance-curve": run_variance_curve,
    "clt": run_clt,
    "flow-variance": run_flow_variance,
    "flow-stability": run_flow_stability,
    "ode-validate": run_ode_validate,
}


@dataclass
class RunManifest:
    config: dict
    resolved: dict
    config_hash: str
    version: str
    outputs: dict
    derived: dict
    checks: dict
    timings: dict
    environment: dict

    @property
    def passed(self):
        return all(self.checks.values())

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def run(cfg, out=None):
    """Validate ``cfg``, run its experiment and write the manifest.

    Returns the :class:`RunManifest`; failed property checks are recorded
    in it, not raised.
    """
    c = check(cfg)
    out = output_dir(cfg, out)
    os.makedirs(out, exist_ok=True)
    h = config_hash(cfg)
    t0 = time.perf_counter()
    outputs, derived, checks = RUNNERS[c["experiment"]["kind"]](c, out, h)
    wall = time.perf_counter() - t0
    manifest = RunManifest(
        config=cfg,
        resolved=c,
        config_hash=h,
        version=__version__,
        outputs={k: os.path.basename(v) for k, v in outputs.items()},
        derived=derived,
        checks={k: bool(v) for k, v in checks.items()},
        timings={"wall_seconds": wall},
        environment={"python": platform.python_version(), "numpy": np.__version__},
    )
    manifest.to_json(os.path.join(out, "manifest.json"))
    return manifest
