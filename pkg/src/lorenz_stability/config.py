"""Experiment configuration: TOML files, defaults and validation.

A configuration is a small TOML document with one table per concern::

    [experiment]
    kind = "stability-curve"
    seed = 0

    [map]
    family = "model"
    gamma = 0.75

    [grid]
    n_cells = 8192

    [sweep]
    eps = [1e-2, 1e-3, 1e-4]

Every table and key is optional except ``experiment.kind``; missing values
come from :data:`DEFAULTS`. Unknown tables or keys are errors.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .errors import ConfigError

OUTPUT_ENV = "LORENZ_STABILITY_OUTPUT"

EXPERIMENTS = {
    "density": "invariant density of one map by the Ulam method",
    "stability-curve": "||h_eps - h_0||_1 along an eps sweep",
    "ly-probe": "uniform Lasota-Yorke constants fitted to probe data",
    "mixed-norm": "basket estimate of the mixed norm |||P_eps - P_0||| along a sweep",
    "variance-curve": "Green-Kubo variance and its error terms along a sweep",
    "clt": "Monte-Carlo CLT check against the Green-Kubo variance",
    "flow-variance": "suspension-flow variance: ratio formula vs batch means",
    "flow-stability": "flow variance, mean return time and SRB average along a sweep",
    "ode-validate": "Lorenz ODE: origin spectrum, RK4 order, return-time fit, Gronwall",
}

OBSERVABLES = ("x", "cos", "indicator", "coboundary")

DEFAULTS = {
    "experiment": {"kind": None, "seed": 0, "output": "", "workers": 1},
    "map": {"family": "model", "gamma": 0.75, "eps": 0.0, "eps_max": 0.05},
    "grid": {"n_cells": 8192, "rho0": 0.05, "p": 0.0},
    "sweep": {"eps": [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]},
    "observable": {"kind": "x", "a": 0.0, "b": 0.5, "nu_cells": 16, "nu_seed": 1},
    "tolerances": {"density": 1e-10, "variance": 1e-10, "max_terms": 200, "probe": 0.0},
    "clt": {"n_steps": 10_000, "n_samples": 2000, "ks_max": 0.05},
    "ly": {"n_max": 6, "kappa_max": 0.9},
    "variance": {"block": 10},
    "flow": {
        "beta": 0.3, "delta": 0.3, "lambda1": 0.0, "tau_cap": 10.0, "constant_roof": 0.0,
        "t_horizon": 1000.0, "n_samples": 1000, "rel_tol": 0.15,
        "srb_orbit_length": 100_000,
    },
    "ode": {
        "sigma": 10.0, "r": 28.0, "b": 8.0 / 3.0, "dt": 1e-3, "n_crossings": 5000,
        "t_transient": 10.0, "top_fraction": 0.1, "r2_min": 0.9,
        "gronwall_amps": [1e-4, 1e-3], "gronwall_seeds": [0, 1, 2], "gronwall_t": 1.0,
        "bump_width": 15.0,
    },
}


def load(path):
    """Parse a TOML config (or the ``config`` echo of a JSON run manifest)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if str(path).endswith(".json"):
        data = json.loads(raw)
        return data["config"] if "config" in data else data
    return tomllib.loads(raw.decode())


def resolve(cfg):
    """Defaults merged with ``cfg``; unknown keys are kept so that
    :func:`validate` can report them."""
    out = copy.deepcopy(DEFAULTS)
    for section, body in cfg.items():
        if isinstance(body, dict) and section in out:
            out[section].update(body)
        else:
            out[section] = body
    return out


def config_hash(cfg):
    """SHA-256 of the canonical JSON of the resolved config."""
    blob = json.dumps(resolve(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(cfg):
    """All violated preconditions of ``cfg`` as a list of messages.

    Nothing is computed; an empty list means the config can be run.
    """
    errs = []
    for section, body in cfg.items():
        if section not in DEFAULTS:
            errs.append(f"unknown section [{section}]")
            continue
        if not isinstance(body, dict):
            errs.append(f"[{section}] must be a table")
            continue
        for key in body:
            if key not in DEFAULTS[section]:
                errs.append(f"unknown key {section}.{key}")
    c = resolve(cfg)
    ex, mp, gr = c["experiment"], c["map"], c["grid"]

    kind = ex["kind"]
    if kind not in EXPERIMENTS:
        errs.append(f"experiment.kind {kind!r} not in {sorted(EXPERIMENTS)}")
    if not isinstance(ex["seed"], int) or ex["seed"] < 0:
        errs.append("experiment.seed must be a nonnegative integer")
    if not isinstance(ex["workers"], int) or ex["workers"] < 1:
        errs.append("experiment.workers must be a positive integer")

    if mp["family"] not in ("model", "doubling"):
        errs.append(f"map.family {mp['family']!r} not in ['doubling', 'model']")
    g = mp["gamma"]
    if not _num(g) or not 0.5 < g < 1.0:
        errs.append(f"map.gamma = {g} violates gamma in (0.5, 1)")
    elif not _num(mp["eps_max"]) or not 0.0 <= mp["eps_max"] < g - 0.5:
        errs.append(f"map.eps_max = {mp['eps_max']} violates 0 <= eps_max < gamma - 1/2")
    elif mp["family"] == "model":
        eps_all = [mp["eps"], *c["sweep"]["eps"]] if isinstance(c["sweep"]["eps"], list) else [mp["eps"]]
        big = [e for e in eps_all if _num(e) and abs(e) > mp["eps_max"]]
        if big:
            errs.append(f"eps values {big} exceed map.eps_max = {mp['eps_max']}")

    n = gr["n_cells"]
    if not isinstance(n, int) or n < 16:
        errs.append(f"grid.n_cells = {n} must be an integer >= 16")
    elif n > 2**20:
        errs.append(f"grid.n_cells = {n} exceeds the memory cap 2**20")
    rho0 = gr["rho0"]
    if not _num(rho0) or not rho0 > 0:
        errs.append("grid.rho0 must be positive")
    elif isinstance(n, int) and n >= 1 and rho0 < 4.0 / n:
        errs.append(f"grid.rho0 = {rho0:g} violates rho0 >= 4/n_cells = {4.0 / n:g}")
    if not _num(gr["p"]) or not (gr["p"] == 0 or gr["p"] >= 1):
        errs.append("grid.p must be >= 1 (or 0 for p = 1/(1 - gamma))")

    eps = c["sweep"]["eps"]
    if not isinstance(eps, list) or not eps or not all(_num(e) for e in eps):
        errs.append("sweep.eps must be a nonempty list of numbers")
    else:
        if any(e == 0 for e in eps):
            errs.append("sweep.eps must not contain 0 (the reference value is added automatically)")
        if [abs(e) for e in eps] != sorted((abs(e) for e in eps), reverse=True) or len(set(eps)) != len(eps):
            errs.append("sweep.eps must decrease strictly in absolute value")

    ob = c["observable"]
    if ob["kind"] not in OBSERVABLES:
        errs.append(f"observable.kind {ob['kind']!r} not in {list(OBSERVABLES)}")
    if ob["kind"] == "indicator" and not -0.5 <= ob["a"] < ob["b"] <= 0.5:
        errs.append("observable indicator needs -1/2 <= a < b <= 1/2")
    if ob["kind"] == "coboundary" and isinstance(n, int):
        m = ob["nu_cells"]
        if not isinstance(m, int) or m < 2 or (n % (2 * m)) != 0:
            errs.append("observable.nu_cells must be >= 2 with 2*nu_cells dividing grid.n_cells")

    tol = c["tolerances"]
    for k in ("density", "variance"):
        if not _num(tol[k]) or not 0 < tol[k] < 1:
            errs.append(f"tolerances.{k} must lie in (0, 1)")
    if not isinstance(tol["max_terms"], int) or tol["max_terms"] < 1:
        errs.append("tolerances.max_terms must be a positive integer")

    cl = c["clt"]
    if not isinstance(cl["n_steps"], int) or cl["n_steps"] < 1:
        errs.append("clt.n_steps must be a positive integer")
    if not isinstance(cl["n_samples"], int) or cl["n_samples"] < 10:
        errs.append("clt.n_samples must be an integer >= 10")

    ly = c["ly"]
    if not isinstance(ly["n_max"], int) or not 1 <= ly["n_max"] <= 12:
        errs.append("ly.n_max must be an integer in [1, 12]")
    if not _num(ly["kappa_max"]) or not 0 < ly["kappa_max"] < 1:
        errs.append("ly.kappa_max must lie in (0, 1)")

    if not isinstance(c["variance"]["block"], int) or c["variance"]["block"] < 2:
        errs.append("variance.block must be an integer >= 2")

    fl = c["flow"]
    if not _num(fl["beta"]) or not 0 < fl["beta"] < 1:
        errs.append("flow.beta must lie in (0, 1)")
    elif not _num(fl["delta"]) or not 0 < fl["delta"] <= (1 - fl["beta"]) / 2 + 1e-15:
        errs.append("flow.delta must lie in (0, (1 - beta)/2]")
    if not _num(fl["lambda1"]) or fl["lambda1"] < 0:
        errs.append("flow.lambda1 must be >= 0 (0 selects the Lorenz value)")
    if fl["constant_roof"] == 0 and (not _num(fl["tau_cap"]) or fl["tau_cap"] < 10):
        errs.append("flow.tau_cap must be >= 10")
    if not _num(fl["constant_roof"]) or fl["constant_roof"] < 0:
        errs.append("flow.constant_roof must be >= 0 (0 selects the logarithmic roof)")
    if not _num(fl["t_horizon"]) or fl["t_horizon"] <= 0:
        errs.append("flow.t_horizon must be positive")
    if not isinstance(fl["srb_orbit_length"], int) or fl["srb_orbit_length"] < 10_000:
        errs.append("flow.srb_orbit_length must be an integer >= 10000")

    od = c["ode"]
    if not _num(od["dt"]) or not 0 < od["dt"] <= 1e-3:
        errs.append("ode.dt must lie in (0, 1e-3]")
    if not isinstance(od["n_crossings"], int) or od["n_crossings"] < 1000:
        errs.append("ode.n_crossings must be an integer >= 1000")
    if not _num(od["gronwall_t"]) or not 0 < od["gronwall_t"] <= 2:
        errs.append("ode.gronwall_t must lie in (0, 2]")
    if not _num(od["top_fraction"]) or not 0 < od["top_fraction"] <= 1:
        errs.append("ode.top_fraction must lie in (0, 1]")

    if not isinstance(ex["output"], str):
        errs.append("experiment.output must be a string path")
    return errs


def check(cfg):
    """Resolved config, or :class:`ConfigError` listing every violation."""
    errs = validate(cfg)
    if errs:
        raise ConfigError(errs)
    return resolve(cfg)


def output_dir(cfg, override=None):
    """``override``, else ``experiment.output``, else
    ``$LORENZ_STABILITY_OUTPUT/<kind>-<hash8>`` (``./runs`` when unset)."""
    if override:
        return override
    c = resolve(cfg)
    if c["experiment"]["output"]:
        return c["experiment"]["output"]
    root = os.environ.get(OUTPUT_ENV, "runs")
    return os.path.join(root, f"{c['experiment']['kind']}-{config_hash(cfg)[:8]}")
