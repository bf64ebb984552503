"""``levyrotor`` command line: simulate, theory, fit, compare, renewal-tables.

Exit status is 0 on success, 1 when ``compare`` finds the tolerance exceeded, and 2 on
any error, with a JSON object ``{"error": ..., "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunManifest, config_hash, parse_config, parse_hbar, parse_number
from .harness import compare_theory_sim, fit_dstar, fit_exponent, run_ensemble, theory_for
from .io import emit_grid, emit_series, read_series
from .renewal import coherence_time, renewal_tables
from .theory import (
    DEFAULT_HBAR,
    ml_decoherence,
    stationary_crossover,
    subdiffusion_asymptote,
)

__all__ = ["main", "build_parser"]


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _add_noise_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--dist", choices=["yule_simon", "deterministic", "geometric"])
    p.add_argument("--alpha")
    p.add_argument("--tau0")
    p.add_argument("--p", dest="p_geom", metavar="P")
    p.add_argument("--kappa")
    p.add_argument("--W", dest="W")
    p.add_argument("--T")
    p.add_argument("--K")
    p.add_argument("--hbar")
    p.add_argument("--Dstar")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="levyrotor", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="noise-averaged var p(t) ensemble")
    _add_noise_flags(s)
    s.add_argument("--n")
    s.add_argument("--seed")
    s.add_argument("--M")
    s.add_argument("--precision", choices=["double", "single"])
    s.add_argument("--batch-size")
    s.add_argument("--points-per-decade")
    s.add_argument("--guard-fraction")
    s.add_argument("--leak-threshold")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", required=True,
                   help="CSV path; a directory when --alpha or --kappa lists several values")

    t = sub.add_parser("theory", help="predicted var p(t) or decoherence curves")
    _add_noise_flags(t)
    t.add_argument("--tc", help="coherence time; sets kappa = 2 hbar**2 / tc when kappa is absent")
    t.add_argument("--model", default="full", choices=["full", "crossover", "ml", "asymptote"])
    t.add_argument("--form", default="double_sum", choices=["double_sum", "integral"])
    t.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit D* (eq3) or a power-law exponent to a CSV series")
    f.add_argument("input")
    f.add_argument("--model", required=True, choices=["eq3", "power"])
    f.add_argument("--column", default="var_p")
    f.add_argument("--hbar", default=None)
    f.add_argument("--window", nargs=2, metavar=("T_LO", "T_HI"))

    c = sub.add_parser("compare", help="relative deviation of a simulation CSV from a theory CSV")
    c.add_argument("simulation")
    c.add_argument("theory")
    c.add_argument("--column", default="var_p")
    c.add_argument("--window", nargs=2, metavar=("T_LO", "T_HI"))
    c.add_argument("--tolerance", default="0.15", help="bound on the median deviation")
    c.add_argument("--max-tolerance", default=None, help="bound on the maximum deviation")
    c.add_argument("--out", help="optional CSV of per-time deviations")

    r = sub.add_parser("renewal-tables", help="sprinkling density, mean event count and D(t,0)")
    _add_noise_flags(r)
    r.add_argument("--tc")
    r.add_argument("--out", required=True)
    return ap


def _list(value):
    if value is None:
        return [None]
    return [v.strip() for v in str(value).split(",")]


def _noise_overrides(a) -> dict:
    return {"dist": a.dist, "alpha": a.alpha, "tau0": a.tau0, "p": a.p_geom, "kappa": a.kappa,
            "W": a.W, "T": a.T, "K": a.K, "hbar": a.hbar, "D_star": a.Dstar}


def _resolve_tc(a, overrides):
    """Fill ``kappa`` from ``--tc`` when only the coherence time is given."""
    if a.tc is None:
        return None
    tc = parse_number(a.tc, "tc")
    if not tc > 0:
        raise ConfigError("tc: must be positive")
    if overrides.get("kappa") is None and overrides.get("W") is None:
        file_vals = json.loads(Path(a.config).read_text()) if a.config else {}
        if "kappa" not in file_vals and "W" not in file_vals:
            hb = overrides.get("hbar") or file_vals.get("hbar")
            hbar = DEFAULT_HBAR if hb is None else parse_hbar(hb)
            overrides["kappa"] = 2.0 * hbar * hbar / tc
    return tc


def _cmd_simulate(a) -> int:
    base = _noise_overrides(a)
    base.update({"n_realizations": a.n, "base_seed": a.seed, "M": a.M, "precision": a.precision,
                 "batch_size": a.batch_size, "points_per_decade": a.points_per_decade,
                 "guard_fraction": a.guard_fraction, "leak_threshold": a.leak_threshold})
    cells = list(itertools.product(_list(a.alpha), _list(a.kappa)))
    results, manifests = [], []
    for alpha, kappa in cells:
        ov = dict(base, alpha=alpha, kappa=kappa)
        cfg = parse_config(a.config, ov)
        man = RunManifest.for_config(cfg, command="simulate")
        res = run_ensemble(cfg, workers=a.workers)
        man.extra.update({"M": res.M, "n_ok": res.n_ok,
                          "failures": {str(k): v for k, v in res.failures.items()}})
        results.append(res)
        manifests.append(man)
    if len(cells) == 1:
        written = emit_series(results[0], a.out, manifests[0])
    else:
        written = emit_grid(results, a.out, manifests)
    print(json.dumps({"outputs": [str(p) for p in written],
                      "config_hash": [m.config_hash for m in manifests]}))
    return 0


def _cmd_theory(a) -> int:
    ov = _noise_overrides(a)
    tc = _resolve_tc(a, ov)
    cfg = parse_config(a.config, ov)
    t_c = cfg.t_c if tc is None else tc
    t = np.arange(cfg.T + 1)
    model = cfg.model()
    if a.model == "full":
        obj = theory_for(cfg, model, form=a.form, t_c=tc)
    elif a.model == "crossover":
        obj = (["t", "var_p"], [t, stationary_crossover(model, t_c, t)])
    else:
        tables = renewal_tables(cfg.waiting_time_distribution(), t_c, cfg.T)
        if a.model == "ml":
            obj = (["t", "D_exact", "D_ml"], [t, tables.D1, ml_decoherence(cfg.alpha, tables, t_c, t)])
        else:
            obj = (["t", "var_p"], [t, subdiffusion_asymptote(model, tables, t_c, t)])
    man = RunManifest.for_config(cfg, command="theory", model=a.model, form=a.form, t_c=t_c)
    written = emit_series(obj, a.out, man)
    print(json.dumps({"outputs": [str(p) for p in written], "config_hash": config_hash(cfg), "t_c": t_c}))
    return 0


def _column(data, name, path):
    if name not in data:
        raise ConfigError(f"{path}: no column {name!r} (have {sorted(data)})")
    if "t" not in data:
        raise ConfigError(f"{path}: no column 't'")
    return data["t"], data[name]


def _window(a):
    if a.window is None:
        return None
    return parse_number(a.window[0], "window"), parse_number(a.window[1], "window")


def _cmd_fit(a) -> int:
    t, y = _column(read_series(a.input), a.column, a.input)
    if a.model == "eq3":
        hbar = DEFAULT_HBAR if a.hbar is None else parse_hbar(a.hbar)
        w = _window(a)
        sel = np.ones(t.size, dtype=bool) if w is None else (t >= w[0]) & (t <= w[1])
        D, ts, rms = fit_dstar(t[sel], y[sel], hbar)
        out = {"model": "eq3", "D_star": D, "t_star": ts, "rms_residual": rms}
    else:
        w = _window(a)
        if w is None:
            hi = float(t.max())
            w = (hi / 10, hi)
        fit = fit_exponent(t, y, w)
        out = {"model": "power", "alpha": fit.alpha, "ci": fit.ci, "window": list(w), "n_points": fit.n_points}
    print(json.dumps(out))
    return 0


def _cmd_compare(a) -> int:
    ts, vs = _column(read_series(a.simulation), a.column, a.simulation)
    tt, vt = _column(read_series(a.theory), a.column, a.theory)
    # a dense theory grid is sampled at the simulation times
    if ts.shape != tt.shape or np.any(ts != tt):
        idx = np.searchsorted(tt, ts)
        if np.any(idx >= tt.size) or np.any(tt[np.minimum(idx, tt.size - 1)] != ts):
            raise ValueError("simulation times are not all present in the theory CSV")
        vt = vt[idx]
    mt = None if a.max_tolerance is None else parse_number(a.max_tolerance, "max-tolerance")
    rep = compare_theory_sim((ts, vs), (ts, vt), window=_window(a),
                             tolerance=parse_number(a.tolerance, "tolerance"), max_tolerance=mt)
    if a.out:
        emit_series((["t", "deviation"], [rep.t, rep.deviation]), a.out)
    print(json.dumps(rep.summary()))
    return 0 if rep.passed else 1


def _cmd_renewal(a) -> int:
    ov = _noise_overrides(a)
    tc = _resolve_tc(a, ov)
    cfg = parse_config(a.config, ov)
    t_c = cfg.t_c if tc is None else tc
    tables = renewal_tables(cfg.waiting_time_distribution(), t_c, cfg.T)
    man = RunManifest.for_config(cfg, command="renewal-tables", t_c=t_c)
    written = emit_series(tables, a.out, man)
    print(json.dumps({"outputs": [str(p) for p in written], "t_c": t_c}))
    return 0


_COMMANDS = {"simulate": _cmd_simulate, "theory": _cmd_theory, "fit": _cmd_fit,
             "compare": _cmd_compare, "renewal-tables": _cmd_renewal}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return _COMMANDS[args.command](args)
    except Exception as exc:  # every failure becomes a machine-readable error
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
