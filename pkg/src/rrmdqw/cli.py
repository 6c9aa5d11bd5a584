"""Command line: ``rrmdqw {run,sweep-tr,profile,correlation,verify}``.

Settings come from a JSON experiment document (``--config``), overridden by
flags.  The seed falls back to ``$RRMDQW_SEED`` and then to 0.  Every output
directory gets a ``summary.json`` whose ``config`` entry is itself a valid
``--config`` document reproducing the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import experiments as ex
from .detector import PolicyKind, PolicySpec
from .ensemble import RecordSpec, RunConfig
from .observables import profile_ratio, saturation
from .output import OutputRecord, clean, profile_table, series_table, Table
from .walk import LatticeError

log = logging.getLogger("rrmdqw")

DEFAULTS = {
    "model": "rr1",
    "x_D": 10,
    "t_R": 20,
    "t_max": 1000,
    "n": 500,
    "seed": None,
    "L_R": None,
    "window_upper": "exclusive",
    "t_q": None,
    "origin": 0,
    "coin": None,
    "workers": 1,
    "snapshot_times": [],
    "t": None,
    "r_min": None,
    "r_max": None,
    "r": [20, -20],
    "horizon_factor": ex.DEFAULT_HORIZON_FACTOR,
    "band": 0.005,
    "band_stderr_k": 0.0,
    "window_fraction": 0.25,
    "out": "rrmdqw-out",
    "format": "csv",
}

FLAG_KEYS = {
    "model": "model", "xd": "x_D", "tr": "t_R", "tmax": "t_max", "n": "n",
    "seed": "seed", "lr": "L_R", "window_upper": "window_upper", "out": "out",
    "format": "format", "workers": "workers", "t": "t", "r_min": "r_min",
    "r_max": "r_max", "r": "r", "horizon_factor": "horizon_factor",
    "band": "band", "band_stderr_k": "band_stderr_k",
}


class UsageError(ValueError):
    pass


def parse_int_list(text):
    """``"20"``, ``"10,20,50"`` or ``"10:100:10"`` (stop inclusive) to a list of ints."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    if isinstance(text, dict):
        return _range_doc(text)
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            start, stop = bits[0], bits[1]
            stride = bits[2] if len(bits) > 2 else 1
            out.extend(range(start, stop + 1, stride))
        else:
            out.append(int(part))
    return out


def _range_doc(d):
    if "geomspace" in d:
        a, b, n = d["geomspace"]
        return sorted(set(int(round(v)) for v in np.geomspace(a, b, int(n))))
    start, stop = int(d["start"]), int(d["stop"])
    return list(range(start, stop + 1, int(d.get("step", 1))))


def load_doc(path):
    with open(path) as fh:
        doc = json.load(fh)
    # a summary.json from an earlier run carries its config under "config"
    if "command" in doc and "config" in doc:
        doc = doc["config"]
    unknown = set(doc) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return doc


def resolve(args) -> dict:
    doc = dict(DEFAULTS)
    if args.config:
        doc.update(load_doc(args.config))
    for flag, key in FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            doc[key] = v
    for key in ("x_D", "t_R", "r"):
        if isinstance(doc[key], str):
            vals = parse_int_list(doc[key])
            doc[key] = vals[0] if len(vals) == 1 and key != "r" else vals
    if doc["seed"] is None:
        env = os.environ.get("RRMDQW_SEED")
        doc["seed"] = int(env) if env else 0
    doc["seed"] = int(doc["seed"])
    if not 0 <= doc["seed"] < 2 ** 64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    return doc


def _single(doc, key):
    vals = parse_int_list(doc[key]) if key in ("t_R", "x_D") else doc[key]
    if isinstance(vals, list):
        if len(vals) != 1:
            raise UsageError(f"{key} must be a single value for this command, got {vals}")
        return vals[0]
    return vals


def _models(doc):
    m = doc["model"]
    models = m if isinstance(m, list) else [s.strip() for s in str(m).split(",")]
    for name in models:
        PolicyKind(name)
    return models


def run_config(doc, model=None, x_D=None, t_R=None, record=None) -> RunConfig:
    model = model or _models(doc)[0]
    x_D = _single(doc, "x_D") if x_D is None else x_D
    t_R = _single(doc, "t_R") if t_R is None else t_R
    policy = PolicySpec(PolicyKind(model), int(x_D), int(t_R), doc["L_R"],
                        doc["window_upper"], doc["t_q"])
    kwargs = {}
    if doc["coin"] is not None:
        kwargs["coin"] = tuple(complex(re, im) for re, im in doc["coin"])
    return RunConfig(policy, t_max=int(doc["t_max"]), origin=int(doc["origin"]),
                     n_realizations=int(doc["n"]), base_seed=doc["seed"],
                     record=record or RecordSpec(), **kwargs)


def _estimate(s):
    return {"value": s.value, "window": list(s.window), "slope": s.slope,
            "converged": s.converged, "stderr": s.stderr, "n_points": s.n_points}


def _crossings(c):
    return {"count": c.count, "last": c.last_crossing, "all": list(c.crossings)}


def cmd_run(doc) -> OutputRecord:
    times = sorted(set(int(t) for t in doc["snapshot_times"]) | {int(doc["t_max"])})
    cfg = run_config(doc)
    cfg = cfg.replace(record=RecordSpec(tuple(times), (cfg.policy.x_D,)))
    workers = int(doc["workers"])
    dr = ex.detector_ratio(cfg, workers, doc["window_fraction"], doc["band"])
    stats = dr.stats
    rec = OutputRecord("run", doc, doc["seed"])
    for t in times:
        prof = ex.snapshot_profile(stats, cfg, t)
        rec.tables[f"profile_t{t}"] = profile_table(prof)
    f = ex.site_series(stats, cfg, cfg.policy.x_D)
    rec.tables["f_xd"] = series_table(f)
    rec.tables["ratio_xd"] = series_table(dr.ratio)
    t_axis = np.arange(cfg.t_max + 1)
    rec.tables["survival"] = Table.from_columns(
        t=t_axis, value=stats.mean["survival"], stderr=stats.stderr("survival"), n=stats.count)
    rec.derived = clean({
        "saturation": _estimate(dr.saturation),
        "crossings": _crossings(dr.crossings),
        "final_survival": float(stats.mean["survival"][-1]),
        "mean_detections": float(stats.mean["detections"]),
        "profile_sum": {str(t): float(stats.mean["profiles"][i].sum())
                        for i, t in enumerate(cfg.record.snapshot_times)},
    })
    return rec


def cmd_sweep_tr(doc, progress=None) -> OutputRecord:
    t_R_values = parse_int_list(doc["t_R"])
    x_D_values = parse_int_list(doc["x_D"])
    if not t_R_values or not x_D_values:
        raise UsageError("sweep axes must be non-empty")
    rec = OutputRecord("sweep-tr", doc, doc["seed"])
    curves = {}
    for model in _models(doc):
        for x_D in x_D_values:
            base = run_config(doc, model=model, x_D=x_D, t_R=t_R_values[0])
            sc = ex.saturation_curve(base, t_R_values, x_D, doc["horizon_factor"],
                                     int(doc["workers"]), doc["band"], progress,
                                     doc["band_stderr_k"])
            name = f"sat_{model}_xd{x_D}"
            rec.tables[name] = series_table(sc.curve, axis="t_R")
            fit = None
            if sc.fit is not None:
                fit = {"t_R_star": sc.fit.t_R_star, "slope_below": sc.fit.slope_below,
                       "slope_above": sc.fit.slope_above, "sse": sc.fit.sse,
                       "degenerate": sc.fit.degenerate, "decade_above": sc.fit.decade_above}
            curves[name] = {
                "model": model, "x_D": x_D,
                "crossings": _crossings(sc.crossings),
                "crossover_fit": fit, "fit_error": sc.fit_error,
                "points": [{"t_R": int(p.config.policy.t_R), "t_max": p.config.t_max,
                            **_estimate(p.saturation)} for p in sc.points],
            }
    rec.derived = clean({"curves": curves})
    return rec


def cmd_profile(doc) -> OutputRecord:
    cfg = run_config(doc)
    t = int(doc["t"]) if doc["t"] is not None else cfg.t_max
    x_D = cfg.policy.x_D
    workers = int(doc["workers"])
    prof, iw = ex.profile_snapshot(cfg, t, workers)
    siw, _ = ex.profile_snapshot(cfg.replace(policy=PolicySpec(PolicyKind.FIXED, x_D, 1)), t)
    r_min = doc["r_min"] if doc["r_min"] is not None else cfg.window[0] - x_D
    r_max = doc["r_max"] if doc["r_max"] is not None else cfg.window[1] - x_D
    keep = (prof.x - x_D >= r_min) & (prof.x - x_D <= r_max)
    rec = OutputRecord("profile", doc, doc["seed"])
    for name, p in ((cfg.policy.kind.value, prof), ("iw", iw), ("siw", siw)):
        tab = profile_table(p)
        tab.rows = [row for row, k in zip(tab.rows, keep) if k]
        rec.tables[f"profile_{name}_t{t}"] = tab
    ratio = profile_ratio(prof, iw, x_D)
    rkeep = (ratio.x >= r_min) & (ratio.x <= r_max)
    tab = profile_table(ratio, axis="r")
    tab.rows = [row for row, k in zip(tab.rows, rkeep) if k]
    rec.tables[f"profile_ratio_{cfg.policy.kind.value}_t{t}"] = tab
    rec.derived = clean({
        "t": t,
        "l1_to_iw": ex.l1_distance(prof, iw),
        "l1_to_siw": ex.l1_distance(prof, siw),
        "l1_stderr": ex.l1_stderr(prof),
        "profile_sum": float(prof.value.sum()),
    })
    return rec


def cmd_correlation(doc) -> OutputRecord:
    r_values = parse_int_list(doc["r"])
    odd = [r for r in r_values if r % 2]
    if odd:
        raise UsageError(f"odd r {odd}: sites x_D+r and x_D are never occupied on the "
                         "same tick, so g/g_inf is undefined; use even r")
    cfg = run_config(doc)
    series = ex.correlation_series(cfg, r_values, int(doc["workers"]))
    rec = OutputRecord("correlation", doc, doc["seed"])
    derived = {}
    for r, s in series.items():
        rec.tables[f"correlation_r{r}"] = series_table(s)
        derived[str(r)] = _estimate(saturation(s, doc["window_fraction"]))
    rec.derived = clean({"saturation": derived})
    return rec


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rrmdqw", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--model", help="iw, siw, qqw, rr1 or rr2 (sweep-tr: comma list)")
        sp.add_argument("--xd", help="initial detector site (sweep-tr: list or a:b:step)")
        sp.add_argument("--tr", help="relocation period (sweep-tr: list or a:b:step)")
        sp.add_argument("--tmax", type=int)
        sp.add_argument("--n", type=int, help="number of realizations")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--lr", type=int, help="Model 1 upper relocation bound L_R")
        sp.add_argument("--window-upper", choices=["exclusive", "inclusive"])
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--format", choices=["csv", "json"])
        sp.add_argument("--workers", type=int)

    common(sub.add_parser("run", help="single experiment: profiles, f and f/f_inf at x_D, survival"))
    sp = sub.add_parser("sweep-tr", help="saturation ratio against t_R, crossings, crossover fit")
    common(sp)
    sp.add_argument("--horizon-factor", type=float,
                    help="run each point to max(tmax, factor * t_R) ticks (0 disables)")
    sp.add_argument("--band", type=float, help="unity-crossing hysteresis half-width (0.005)")
    sp.add_argument("--band-stderr-k", type=float,
                    help="widen the band to k standard errors where that is larger (0)")
    sp = sub.add_parser("profile", help="profile snapshot and f/f_inf against r = x - x_D")
    common(sp)
    sp.add_argument("--t", type=int, help="snapshot time (default tmax)")
    sp.add_argument("--r-min", type=int)
    sp.add_argument("--r-max", type=int)
    sp = sub.add_parser("correlation", help="correlation ratio g/g_inf against t")
    common(sp)
    sp.add_argument("--r", help="even displacements, e.g. 20,-20")
    sp = sub.add_parser("verify", help="oracle equivalence and invariant checks")
    sp.add_argument("--mutation", choices=["swap-shift"],
                    help="run the checks against a deliberately broken engine")
    return p


COMMANDS = {"run": cmd_run, "sweep-tr": cmd_sweep_tr, "profile": cmd_profile,
            "correlation": cmd_correlation}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify":
        from .verify import verify
        return 0 if verify(args.mutation) else 1
    try:
        doc = resolve(args)
        if doc["format"] not in ("csv", "json"):
            raise UsageError("format must be csv or json")
        rec = COMMANDS[args.command](doc)
        for path in rec.write(doc["out"], doc["format"]):
            print(path)
    except (ValueError, LatticeError, OSError) as exc:
        print(f"rrmdqw {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
