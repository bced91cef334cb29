"""
Task definitions for the command line: parameter defaults and validation,
per-cell computations, and the ordered writers that turn cell results into
CSV/JSON artifacts.

A plain run is a one-value sweep over the task's primary axis (``K`` for the
map tasks, ``h`` for the chain tasks), so both paths share all code.
"""
from __future__ import annotations

import math
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .chaoskit import brody_fit, gap_ratio, ipr, is_degenerate, rpr_spectrum, sigma_otoc, xi_otoc
from .chaoskit.spectral import unfold_spectrum
from .io import config_hash, mean_sem, sidecar, write_csv, write_json
from .otoc import (CSV_HEADER, default_decay_window, default_growth_window, ehrenfest_time,
                   fit_decay_rate, fit_growth_rate, otoc_series)
from .qmap import CONVENTIONS, MAP_KINDS, TorusMap, lyapunov_exponent, quantize, schwinger_ops
from .spinchain import (SpinChainModel, build_hamiltonian, chain_otoc, chain_otoc_curves,
                        cone_from_curves, diagonalize)

TASKS = ("map-otoc", "map-rpr", "chain-otoc", "chain-spectrum", "indicators", "sweep")

MAP_DEFAULTS = {"map": "cat", "K": 0.0, "extra": None, "N": 1024}
CHAIN_DEFAULTS = {"L": 9, "nup": 5, "h": 1.0, "realizations": 20}

DEFAULTS = {
    "map-otoc": {**MAP_DEFAULTS, "tmax": 50, "W": "Q", "V": "P", "lyap_iter": 10000,
                 "lyap_samples": 100},
    "map-rpr": {**MAP_DEFAULTS, "K": 0.25, "eps": 0.02, "xi_max": 40, "num": 3},
    "chain-otoc": {**CHAIN_DEFAULTS, "l": [1, 2, 3], "tmax": 100.0, "dt": 0.1, "theta": 0.5},
    "chain-spectrum": {**CHAIN_DEFAULTS},
    "indicators": {**CHAIN_DEFAULTS, "system": "chain", "l": 1, "window": [200.0, 400.0],
                   "dt": 0.25, "spectrum_L": None, "map": "harper", "K": 0.5, "extra": None,
                   "N": 256},
}

CHAIN_TASKS = ("chain-otoc", "chain-spectrum")

SEED_DERIVATION = ("disorder stream for realization r at axis index i is "
                   "SeedSequence([SeedSequence([seed, i]).generate_state(1, uint64)[0], r])")

PINNED = {
    "maps": {k: CONVENTIONS[k] for k in MAP_KINDS},
    "dft": CONVENTIONS["dft"],
    "unitary": CONVENTIONS["unitary"],
    "otoc_normalization": "Tr(.)/N over the full space (maps) or the magnetization sector (chains)",
    "operators": "maps: Q = (U - U^dag)/2i, P = (V - V^dag)/2i from the Schwinger clock/shift; "
                 "chains: W = sigma^z_0, V = sigma^z_l",
    "growth_window": "[2, floor(t_E) - 1] unless given",
    "decay_window": "[ceil(t_E) + 1, ceil(t_E) + 15] unless given",
    "xi_otoc": "participation number of the normalized one-sided power spectrum of the "
               "mean-subtracted windowed C(t), zero bin excluded, rectangular window",
    "sigma_otoc": "population standard deviation over the window",
    "inverse_sigma": "1 / (disorder mean of sigma_otoc)",
    "brody": "MLE on [0, 1.5], degree-7 polynomial unfolding of the central 60% of levels",
    "seed_derivation": SEED_DERIVATION,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


def primary_axis(task: str, params: dict) -> str:
    if task in ("map-otoc", "map-rpr"):
        return "K"
    if task == "indicators" and params.get("system") == "map":
        return "K"
    return "h"


def resolve(task: str, given: dict) -> dict:
    """Defaults overlaid with ``given``; unknown keys are a config error."""
    if task not in DEFAULTS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
    params = dict(DEFAULTS[task])
    unknown = sorted(set(given) - set(params))
    if unknown:
        raise ConfigError(f"parameters not accepted by {task}: {', '.join(unknown)}")
    params.update(given)
    validate(task, params)
    return params


def _finite(name, x, lo=None, strict=False):
    try:
        x = float(x)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {x!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{name} must be finite")
    if lo is not None and (x <= lo if strict else x < lo):
        raise ConfigError(f"{name} must be {'>' if strict else '>='} {lo}")
    return x


def _int(name, x, lo):
    try:
        ok = not isinstance(x, bool) and float(x).is_integer()
    except (TypeError, ValueError):
        ok = False
    if not ok:
        raise ConfigError(f"{name} must be an integer, got {x!r}")
    x = int(x)
    if x < lo:
        raise ConfigError(f"{name} must be >= {lo}")
    return x


def validate(task: str, p: dict) -> None:
    uses_map = task in ("map-otoc", "map-rpr") or (task == "indicators" and p["system"] == "map")
    uses_chain = task in CHAIN_TASKS or (task == "indicators" and p["system"] == "chain")
    if task == "indicators" and p["system"] not in ("chain", "map"):
        raise ConfigError("system must be 'chain' or 'map'")
    if uses_map:
        if p["map"] not in MAP_KINDS:
            raise ConfigError(f"map must be one of {MAP_KINDS}")
        p["K"] = _finite("K", p["K"])
        p["N"] = _int("N", p["N"], 2)
        if p["extra"] is not None:
            if p["map"] != "harper":
                raise ConfigError("extra only applies to the harper map")
            p["extra"] = _finite("extra", p["extra"])
    if uses_chain:
        p["L"] = _int("L", p["L"], 2)
        p["nup"] = _int("nup", p["nup"], 0)
        if p["nup"] > p["L"]:
            raise ConfigError("nup must not exceed L")
        p["h"] = _finite("h", p["h"], 0)
        p["realizations"] = _int("realizations", p["realizations"], 1)
    if task == "map-otoc":
        p["tmax"] = _int("tmax", p["tmax"], 0)
        for name in ("W", "V"):
            if p[name] not in ("Q", "P"):
                raise ConfigError(f"{name} must be 'Q' or 'P'")
        p["lyap_iter"] = _int("lyap_iter", p["lyap_iter"], 100)
        p["lyap_samples"] = _int("lyap_samples", p["lyap_samples"], 1)
    if task == "map-rpr":
        p["eps"] = _finite("eps", p["eps"], 0, strict=True)
        p["xi_max"] = _int("xi_max", p["xi_max"], 4)
        p["num"] = _int("num", p["num"], 1)
        if 2 * p["xi_max"] + 1 > p["N"]:
            raise ConfigError("xi_max too large for N (need 2 xi_max + 1 <= N)")
    if task == "chain-otoc":
        ls = p["l"] if isinstance(p["l"], (list, tuple)) else [p["l"]]
        p["l"] = [_int("l", x, 1) for x in ls]
        if not p["l"] or max(p["l"]) >= p["L"]:
            raise ConfigError(f"l values must lie in [1, {p['L'] - 1}]")
        p["tmax"] = _finite("tmax", p["tmax"], 0)
        p["dt"] = _finite("dt", p["dt"], 0, strict=True)
        p["theta"] = _finite("theta", p["theta"])
        if not 0 < p["theta"] < 1:
            raise ConfigError("theta must lie in (0, 1)")
    if task == "indicators":
        w = p["window"]
        if not isinstance(w, (list, tuple)) or len(w) != 2:
            raise ConfigError("window must be two numbers t_a,t_b")
        p["window"] = [_finite("window", w[0], 0), _finite("window", w[1], 0)]
        if p["window"][1] <= p["window"][0]:
            raise ConfigError("window must satisfy t_a < t_b")
        p["dt"] = _finite("dt", p["dt"], 0, strict=True)
        if p["system"] == "chain":
            if isinstance(p["l"], (list, tuple)):
                if len(p["l"]) != 1:
                    raise ConfigError("indicators take a single separation l")
                p["l"] = p["l"][0]
            p["l"] = _int("l", p["l"], 1)
            if p["l"] >= p["L"]:
                raise ConfigError(f"l must lie in [1, {p['L'] - 1}]")
            if p["spectrum_L"] is not None:
                p["spectrum_L"] = _int("spectrum_L", p["spectrum_L"], 2)
                if p["nup"] > p["spectrum_L"]:
                    raise ConfigError("nup must not exceed spectrum_L")


def realizations(task: str, params: dict) -> int:
    uses_chain = task in CHAIN_TASKS or (task == "indicators" and params["system"] == "chain")
    return params["realizations"] if uses_chain else 1


def axis_seed(master: int, value_index: int) -> int:
    ss = np.random.SeedSequence([int(master), int(value_index)])
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------- cells


def _tmap(p) -> TorusMap:
    return TorusMap(p["map"], p["K"], p.get("extra"))


def _map_otoc(p, seed, r):
    tmap = _tmap(p)
    qm = quantize(tmap, p["N"])
    ops = schwinger_ops(p["N"])
    series = otoc_series(qm, getattr(ops, p["W"]), getattr(ops, p["V"]), p["tmax"])
    summary = {"lambda": None, "t_E": None, "growth_rate": None, "growth_r2": None,
               "decay_rate": None, "decay_r2": None, "notes": []}
    lam = lyapunov_exponent(tmap, p["lyap_iter"], p["lyap_samples"], seed=seed % 2**32)
    summary["lambda"] = lam
    if lam > 0:
        tE = ehrenfest_time(lam, p["N"]).t_E
        summary["t_E"] = tE
        for kind, window, fit in (("growth", default_growth_window(tE),
                                   lambda w: fit_growth_rate(series, w)),
                                  ("decay", default_decay_window(tE),
                                   lambda w: fit_decay_rate(series.F, w, series.times))):
            try:
                summary[f"{kind}_rate"], summary[f"{kind}_r2"] = fit(window)
                summary[f"{kind}_window"] = list(window)
            except ValueError as exc:
                summary["notes"].append(f"{kind} fit skipped: {exc}")
    else:
        summary["notes"].append("non-positive Lyapunov exponent; no Ehrenfest time")
    return {"rows": list(series.rows()), "summary": summary,
            "decomposition_error": series.decomposition_error()}


def _map_rpr(p, seed, r):
    est = rpr_spectrum(quantize(_tmap(p), p["N"]), p["eps"], p["xi_max"], k=p["num"], seed=seed % 2**32)
    return {"rpr": est.to_json()}


def _time_grid(tmax, dt, start=0.0):
    n = int(round((tmax - start) / dt))
    return start + dt * np.arange(n + 1)


def _chain_model(p, seed, r, L=None):
    return SpinChainModel.random(L or p["L"], p["nup"], p["h"], seed, r)


def _chain_otoc(p, seed, r):
    model = _chain_model(p, seed, r)
    eig = diagonalize(build_hamiltonian(model))
    t = _time_grid(p["tmax"], p["dt"])
    curves = {l: 1.0 - f for l, f in chain_otoc_curves(model, p["l"], t, eig).items()}
    return {"t": t, "curves": curves, "fields": list(model.fields)}


def _spectral_row(model, want_vectors=True):
    H = build_hamiltonian(model)
    if want_vectors:
        eig = diagonalize(H)
        E, Q = eig.energies, eig.vectors
    else:
        E, Q = np.linalg.eigvalsh(H), None
    out = {"brody": None, "gap_ratio": None, "ipr": None, "notes": []}
    for name, fn in (("brody", lambda: brody_fit(unfold_spectrum(E))),
                     ("gap_ratio", lambda: gap_ratio(E)),
                     ("ipr", lambda: ipr(Q))):
        try:
            out[name] = fn()
        except ValueError as exc:
            out["notes"].append(f"{name}: {exc}")
    return out, E, Q


def _chain_spectrum(p, seed, r):
    row, _, _ = _spectral_row(_chain_model(p, seed, r))
    return {"row": row}


def _indicators(p, seed, r):
    t_a, t_b = p["window"]
    if p["system"] == "map":
        ops = schwinger_ops(p["N"])
        series = otoc_series(quantize(_tmap(p), p["N"]), ops.Q, ops.P, int(math.floor(t_b)))
        t, C = series.times, series.C
        row = {"brody": None, "gap_ratio": None, "ipr": None, "notes": []}
    else:
        model = _chain_model(p, seed, r)
        eig = diagonalize(build_hamiltonian(model))
        t = _time_grid(t_b, p["dt"], start=t_a)
        C = chain_otoc(model, p["l"], t, eig).C
        if p["spectrum_L"] is None or p["spectrum_L"] == p["L"]:
            row, _, _ = _spectral_row(model)
        else:
            row, _, _ = _spectral_row(_chain_model(p, seed, r, L=p["spectrum_L"]))
    xi = xi_otoc(C, (t_a, t_b), t)
    row["xi_otoc"] = None if is_degenerate(xi) else xi
    if is_degenerate(xi):
        row["notes"].append("xi_otoc degenerate (constant signal)")
    row["sigma_otoc"] = sigma_otoc(C, (t_a, t_b), t)
    return {"row": row}


CELL_FUNCS = {"map-otoc": _map_otoc, "map-rpr": _map_rpr, "chain-otoc": _chain_otoc,
              "chain-spectrum": _chain_spectrum, "indicators": _indicators}


def run_cell(job):
    """Worker entry point: job = (task, params, seed, value_index, realization)."""
    task, params, seed, i, r = job
    try:
        with np.errstate(all="ignore"):
            return {"ok": True, **CELL_FUNCS[task](params, seed, r)}
    except Exception as exc:  # recorded in the failure manifest
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc()}


# ---------------------------------------------------------------- plan


def plan(task: str, params: dict, axis: str, values, master_seed: int):
    """Canonical axis values and the ordered list of (value_index, realization, job)."""
    jobs, canon = [], []
    for i, v in enumerate(values):
        p = dict(params)
        p[axis] = v
        validate(task, p)
        canon.append(p[axis])
        seed = axis_seed(master_seed, i)
        for r in range(realizations(task, p)):
            jobs.append((i, r, (task, p, seed, i, r)))
    return canon, jobs


# ---------------------------------------------------------------- writers


def _meta(task, params, axis, values, seed, extra=None):
    template = {k: v for k, v in params.items() if k != axis}
    cfg = {"task": task, "params": template, "axis": axis, "values": list(values), "seed": seed}
    return {"config": cfg, "config_hash": config_hash(cfg), "conventions": PINNED,
            "code_version": __version__, **(extra or {})}


def _cell_meta(job):
    task, p, seed, i, r = job
    cfg = {"task": task, "params": p, "seed_stream": [seed, r], "value_index": i, "realization": r}
    return {"cell": cfg, "cell_hash": config_hash(cfg)}


def write_outputs(task, params, axis, values, master_seed, jobs, results, out: Path, plot=False):
    """Write every artifact in a fixed order; returns the failure list."""
    out.mkdir(parents=True, exist_ok=True)
    base = _meta(task, params, axis, values, master_seed)
    failures = []
    by_cell = {}
    for (i, r, job), res in zip(jobs, results):
        if not res["ok"]:
            failures.append({"value_index": i, "param": values[i], "realization": r,
                             "error": res["error"], "traceback": res["traceback"]})
        by_cell[(i, r)] = (job, res)

    writer = WRITERS[task]
    writer(params, axis, values, by_cell, out, base)
    if plot:
        from .plots import make_plots
        make_plots(task, params, axis, values, by_cell, out)
    return failures


def _ok(by_cell, i, r):
    job, res = by_cell[(i, r)]
    return res if res["ok"] else None


def _write_map_otoc(params, axis, values, by_cell, out, base):
    summary_rows = []
    for i, v in enumerate(values):
        job, res = by_cell[(i, 0)]
        if not res["ok"]:
            continue
        path = write_csv(out / f"p{i:03d}" / "otoc.csv", CSV_HEADER, res["rows"])
        s = res["summary"]
        sidecar(path, {**_cell_meta(job), "conventions": PINNED, "summary": s,
                       "decomposition_error": res["decomposition_error"]})
        summary_rows.append((v, s["lambda"], s["t_E"], s["growth_rate"], s["growth_r2"],
                             s["decay_rate"], s["decay_r2"]))
    path = write_csv(out / "summary.csv", (axis, "lambda", "t_E", "growth_rate", "growth_r2",
                                           "decay_rate", "decay_r2"), summary_rows)
    sidecar(path, base)


def _write_map_rpr(params, axis, values, by_cell, out, base):
    rows = []
    for i, v in enumerate(values):
        job, res = by_cell[(i, 0)]
        if not res["ok"]:
            continue
        rpr = res["rpr"]
        write_json(out / f"p{i:03d}" / "rpr.json", {**_cell_meta(job), "conventions": PINNED,
                                                   "code_version": __version__, **rpr})
        for k, (re, im) in enumerate(rpr["resonances"], start=1):
            rows.append((v, k, re, im, math.hypot(re, im)))
    path = write_csv(out / "resonances.csv", (axis, "k", "re", "im", "modulus"), rows)
    sidecar(path, base)


def _write_chain_otoc(params, axis, values, by_cell, out, base):
    agg = []
    cone_rows = []
    cones = {}
    for i, v in enumerate(values):
        stacks = {}
        t = None
        for r in range(params["realizations"]):
            job, res = by_cell[(i, r)]
            if not res["ok"]:
                continue
            t = res["t"]
            rows = [(tk, l, res["curves"][l][k]) for l in sorted(res["curves"])
                    for k, tk in enumerate(t)]
            path = write_csv(out / f"p{i:03d}" / f"r{r:04d}.csv", ("t", "l", "C"), rows)
            sidecar(path, {**_cell_meta(job), "conventions": PINNED, "fields": res["fields"]})
            for l, C in res["curves"].items():
                stacks.setdefault(l, []).append(C)
        if t is None:
            continue
        means = {}
        for l in sorted(stacks):
            arr = np.array(stacks[l])
            n = arr.shape[0]
            mean = arr.mean(axis=0)
            sem = arr.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else [None] * t.size
            means[l] = mean
            agg.extend((v, tk, l, mean[k], sem[k], n) for k, tk in enumerate(t))
        cone = cone_from_curves(t, means, params["theta"])
        cones[str(v)] = {"velocity": cone.velocity, "monotone": cone.monotone,
                         "arrival": {str(l): a for l, a in cone.arrival.items()}}
        cone_rows.extend((v, l, a) for l, a in cone.arrival.items())
    path = write_csv(out / "chain_otoc.csv", (axis, "t", "l", "C_mean", "C_sem", "n"), agg)
    sidecar(path, base)
    path = write_csv(out / "cone.csv", (axis, "l", "arrival_time"), cone_rows)
    sidecar(path, {**base, "theta": params["theta"], "cones": cones})


SPECTRAL_COLS = ("brody", "gap_ratio", "ipr")
INDICATOR_COLS = ("xi_otoc", "sigma_otoc") + SPECTRAL_COLS


def _write_rows(name, cols, params, axis, values, by_cell, out, base, task):
    rows, agg, notes = [], [], []
    for i, v in enumerate(values):
        n_real = realizations(task, {**params, axis: v})
        cell_rows = []
        for r in range(n_real):
            res = _ok(by_cell, i, r)
            if res is None:
                continue
            row = res["row"]
            cell_rows.append(row)
            rows.append((v, r) + tuple(row[c] for c in cols))
            for note in row.get("notes", []):
                notes.append({"param": v, "realization": r, "note": note})
        stats = []
        for c in cols:
            m, s, _ = mean_sem(row[c] for row in cell_rows)
            stats.extend((m, s))
        extra = ()
        if "sigma_otoc" in cols:
            ms = mean_sem(row["sigma_otoc"] for row in cell_rows)[0]
            extra = (None if not ms else 1.0 / ms,)
        agg.append((v, len(cell_rows)) + tuple(stats) + extra)
    path = write_csv(out / f"{name}.csv", ("param", "realization") + cols, rows)
    sidecar(path, {**base, "notes": notes})
    header = ["param", "n"]
    for c in cols:
        header += [f"{c}_mean", f"{c}_sem"]
    if "sigma_otoc" in cols:
        header.append("inv_sigma")
    path = write_csv(out / f"{name}_aggregate.csv", header, agg)
    sidecar(path, base)


def _write_spectrum(params, axis, values, by_cell, out, base):
    _write_rows("spectrum", SPECTRAL_COLS, params, axis, values, by_cell, out, base,
                "chain-spectrum")


def _write_indicators(params, axis, values, by_cell, out, base):
    _write_rows("indicators", INDICATOR_COLS, params, axis, values, by_cell, out, base,
                "indicators")


WRITERS = {"map-otoc": _write_map_otoc, "map-rpr": _write_map_rpr,
           "chain-otoc": _write_chain_otoc, "chain-spectrum": _write_spectrum,
           "indicators": _write_indicators}
