"""Command-line front end.

Commands write delimited data files (CSV with 17-digit round-trip
floats) or JSON reports; standard output carries machine-readable JSON
only, progress goes to standard error.  Every command defaults to a
fixed seed so bare invocations are reproducible.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 failed
--check validation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, fokker_planck
from .integrate import (simulate_ensemble, simulate_trajectory, write_csv)
from .model import ModelParams, predicted_ratio, steady_state

DEFAULT_SEED = 8675309

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CHECK = 4

# Fig-1a-style defaults; config-file keys use these names.
_DEFAULTS = {
    "g": 0.6,
    "t_decay": 1.0,
    "alpha": 10.0,
    "dt": 1e-4,
    "steps": 2_000_000,
    "stride": 100,
    "seed": DEFAULT_SEED,
    "n_traj": 10_000,
    "delta": analysis.DEFAULT_BAND,
    "burn_in": None,      # None -> analysis.default_burn_in
    "smooth_width": None,  # None -> no smoothed output
    "bins": 50,
    "n_grid": 4096,
    "y_margin": 1e-3,
    "max_steps": 100_000,
    "workers": None,      # None -> QTELEGRAPH_WORKERS or 1
    "format": "csv",
}


class ConfigError(Exception):
    pass


def _value_seed(master_seed: int, value: float) -> np.random.SeedSequence:
    """Per-entry sweep stream keyed by the parameter value itself, so
    duplicate entries produce identical rows."""
    bits = int(np.float64(value).view(np.uint64))
    return np.random.SeedSequence(entropy=(int(master_seed), bits))


def _merged(args: argparse.Namespace, keys, local_defaults=None) -> dict:
    """flag > config file > per-command default > built-in default."""
    defaults = dict(_DEFAULTS)
    if local_defaults:
        defaults.update(local_defaults)
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config file: {exc}") from exc
        unknown = set(cfg) - set(_DEFAULTS) - {"out"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key in keys:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            out[key] = cli_val
        elif key in cfg:
            out[key] = cfg[key]
        else:
            out[key] = defaults[key]
    return out


def _model(c: dict, **overrides) -> ModelParams:
    # physics keys absent from the command's option set must arrive as
    # overrides (e.g. g for ratio-sweep, alpha for alpha-sweep)
    kw = {k: c[k] for k in ("g", "t_decay", "alpha", "dt") if k in c}
    kw.update(overrides)
    try:
        return ModelParams(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _burn_in(c: dict, params: ModelParams) -> float:
    return analysis.default_burn_in(params) if c["burn_in"] is None \
        else float(c["burn_in"])


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _dwell_dict(rep: analysis.DwellReport) -> dict:
    from dataclasses import asdict
    return asdict(rep)


def _write_table(path: Path, fmt: str, header: list, rows: list) -> None:
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump([dict(zip(header, r)) for r in rows], fh, indent=2)
            fh.write("\n")
    else:
        write_csv(path, ",".join(header), np.asarray(rows, dtype=float))


# ---------------------------------------------------------------------------
# Commands


def cmd_simulate(args) -> int:
    c = _merged(args, ["g", "t_decay", "alpha", "dt", "steps", "stride",
                       "seed", "delta", "burn_in", "smooth_width"])
    params = _model(c)
    if c["steps"] % c["stride"] != 0:
        raise ConfigError("steps must be a multiple of stride")
    _progress(f"simulating {c['steps']} steps (dt={params.dt:g})")
    traj = simulate_trajectory(params, 1.0, int(c["steps"]),
                               int(c["stride"]), seed=int(c["seed"]))
    out = Path(args.out)
    traj.to_csv(out)
    files = [str(out)]
    if c["smooth_width"] is not None:
        smoothed = analysis.smooth(traj, float(c["smooth_width"]))
        spath = out.with_suffix(".smoothed.csv")
        smoothed.to_csv(spath)
        files.append(str(spath))
    burn = _burn_in(c, params)
    stats_traj = traj.after(burn) if burn < traj.times[-1] else traj
    rep = analysis.dwell_statistics(stats_traj, float(c["delta"]))
    print(json.dumps({
        "duration": traj.duration,
        "burn_in": burn,
        "steady_state": steady_state(params.g, params.t_decay),
        "dwell": _dwell_dict(rep),
        "files": files,
    }))
    return EXIT_OK


def cmd_ratio_sweep(args) -> int:
    c = _merged(args, ["t_decay", "alpha", "dt", "steps", "seed", "delta",
                       "burn_in", "format"], {"steps": 20_000_000})
    gt_list = [float(x) for x in args.gt_list.split(",")]
    if any(gt <= 0 for gt in gt_list):
        raise ConfigError("every GT must be > 0")
    tol = args.tol
    rows = []
    worst = 0.0
    for gt in gt_list:
        g = gt / c["t_decay"]
        params = _model(c, g=g)
        _progress(f"GT={gt:g}: {c['steps']} steps")
        traj = simulate_trajectory(params, 1.0, int(c["steps"]),
                                   seed=_value_seed(c["seed"], gt))
        burn = _burn_in(c, params)
        rep = analysis.dwell_statistics(traj.after(burn), float(c["delta"]))
        if not rep.ratio_defined:
            raise RuntimeError(f"no lower-band occupancy at GT={gt:g}")
        predicted = predicted_ratio(g, c["t_decay"])
        rel = abs(rep.ratio - predicted) / predicted
        worst = max(worst, rel)
        rows.append([gt, rep.ratio, predicted, rel, int(c["steps"])])
    header = ["gt", "measured_ratio", "predicted_ratio", "rel_error",
              "steps"]
    _write_table(Path(args.out), c["format"], header, rows)
    print(json.dumps({"rows": len(rows), "max_rel_error": worst,
                      "tol": tol, "out": str(args.out)}))
    if args.check and worst >= tol:
        return EXIT_CHECK
    return EXIT_OK


def cmd_alpha_sweep(args) -> int:
    c = _merged(args, ["g", "t_decay", "dt", "steps", "seed", "delta",
                       "burn_in", "format"], {"steps": 10_000_000})
    alpha_list = [float(x) for x in args.alpha_list.split(",")]
    if any(a < 0 for a in alpha_list):
        raise ConfigError("every alpha must be >= 0")
    rows = []
    for alpha in alpha_list:
        params = _model(c, alpha=alpha)
        _progress(f"alpha={alpha:g}: {c['steps']} steps")
        traj = simulate_trajectory(params, 1.0, int(c["steps"]),
                                   seed=_value_seed(c["seed"], alpha))
        burn = _burn_in(c, params)
        frac = analysis.occupancy_fraction(traj.after(burn),
                                           float(c["delta"]))
        rows.append([alpha, frac, int(c["steps"])])
    header = ["alpha", "occupancy_fraction", "steps"]
    _write_table(Path(args.out), c["format"], header, rows)
    print(json.dumps({"rows": len(rows), "out": str(args.out)}))
    return EXIT_OK


def cmd_density(args) -> int:
    c = _merged(args, ["g", "t_decay", "alpha", "dt", "steps", "seed",
                       "burn_in", "bins", "n_grid", "y_margin"],
                {"steps": 10_000_000})
    params = _model(c)
    _progress(f"stationary density on {c['n_grid']} points")
    dens = fokker_planck.stationary_density(params, int(c["n_grid"]),
                                            float(c["y_margin"]))
    out = Path(args.out)
    dens.to_csv(out)
    _progress(f"empirical histogram from {c['steps']} steps")
    traj = simulate_trajectory(params, 1.0, int(c["steps"]),
                               seed=int(c["seed"]))
    burn = _burn_in(c, params)
    hist = analysis.histogram(traj.after(burn), int(c["bins"]))
    hpath = out.with_suffix(".hist.csv")
    hist.to_csv(hpath)
    tv = analysis.tv_distance(hist.probabilities,
                              dens.bin_masses(hist.bin_edges))
    print(json.dumps({"tv_distance": tv, "bins": int(c["bins"]),
                      "files": [str(out), str(hpath)]}))
    if args.check and tv >= args.tol:
        return EXIT_CHECK
    return EXIT_OK


def cmd_exit_time(args) -> int:
    c = _merged(args, ["g", "t_decay", "alpha", "dt", "seed", "delta",
                       "n_traj", "max_steps", "workers"])
    params = _model(c)
    delta = float(c["delta"])
    seeds = np.random.SeedSequence(int(c["seed"])).spawn(2)
    reports = {}
    for name, start, ss in (("lower", -1.0, seeds[0]),
                            ("upper", 1.0, seeds[1])):
        _progress(f"exit times from {name} band: {c['n_traj']} runs")
        # worker-count invariance: derive a plain integer key per branch
        branch_seed = int(ss.generate_state(1)[0])
        reports[name] = analysis.exit_time_mc(
            params, start, delta, int(c["n_traj"]), int(c["max_steps"]),
            branch_seed, n_workers=c["workers"])
    lo, up = reports["lower"], reports["upper"]
    ratio = up.mc_mean / lo.mc_mean
    gt = predicted_ratio(params.g, params.t_decay)
    flags = {
        "lower_within_20pct": abs(lo.mc_mean - lo.analytic_value)
        <= 0.2 * lo.analytic_value,
        "upper_within_20pct": abs(up.mc_mean - up.analytic_value)
        <= 0.2 * up.analytic_value,
        "lower_below_bound": lo.analytic_bound is not None
        and lo.mc_mean <= lo.analytic_bound,
        "ratio_within_25pct": abs(ratio - gt) <= 0.25 * gt,
    }
    from dataclasses import asdict
    payload = {
        "lower": asdict(lo),
        "upper": asdict(up),
        "mean_ratio_upper_over_lower": ratio,
        "predicted_gt": gt,
        "flags": flags,
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(json.dumps(payload))
    if args.check and not all(flags.values()):
        return EXIT_CHECK
    return EXIT_OK


def cmd_born(args) -> int:
    c = _merged(args, ["alpha", "dt", "seed", "n_traj", "steps", "workers"],
                {"steps": 10_000})
    u0_list = [float(x) for x in args.u0_list.split(",")]
    if any(abs(u) > 1 for u in u0_list):
        raise ConfigError("every u0 must lie in [-1, 1]")
    params = _model(c, g=0.0, t_decay=1.0, no_decay=True)
    entries = []
    all_ok = True
    for u0 in u0_list:
        _progress(f"u0={u0:g}: {c['n_traj']} pure-noise trajectories")
        seed = int(_value_seed(c["seed"], u0).generate_state(1)[0])
        summary = simulate_ensemble(params, u0, int(c["steps"]),
                                    int(c["n_traj"]), seed,
                                    n_workers=c["workers"])
        frac = float((summary.terminal_values > 0).mean())
        expected = (1.0 + u0) / 2.0
        se = math.sqrt(max(expected * (1.0 - expected), 1e-300)
                       / int(c["n_traj"]))
        z = (frac - expected) / se if se > 0 else 0.0
        ok = abs(frac - expected) <= 3.0 * se
        all_ok = all_ok and ok
        entries.append({
            "u0": u0, "fraction_positive": frac, "expected": expected,
            "binomial_se": se, "z_score": z, "within_3sigma": ok,
        })
    payload = {"n_traj": int(c["n_traj"]), "steps": int(c["steps"]),
               "alpha": params.alpha, "entries": entries}
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(json.dumps(payload))
    if args.check and not all_ok:
        return EXIT_CHECK
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_common(p, *names):
    opts = {
        "g": lambda: p.add_argument("--G", dest="g", type=float,
                                    help="incoherent pump rate"),
        "t_decay": lambda: p.add_argument("--T", dest="t_decay", type=float,
                                          help="decay time"),
        "alpha": lambda: p.add_argument("--alpha", type=float,
                                        help="noise strength"),
        "dt": lambda: p.add_argument("--dt", type=float,
                                     help="integration step"),
        "steps": lambda: p.add_argument("--steps", type=int,
                                        help="number of steps"),
        "stride": lambda: p.add_argument("--stride", type=int,
                                         help="output decimation"),
        "seed": lambda: p.add_argument("--seed", type=int,
                                       help="master seed"),
        "n_traj": lambda: p.add_argument("--n-traj", dest="n_traj",
                                         type=int, help="ensemble size"),
        "delta": lambda: p.add_argument("--delta", type=float,
                                        help="endpoint band half-width"),
        "burn_in": lambda: p.add_argument("--burn-in", dest="burn_in",
                                          type=float,
                                          help="transient to discard "
                                               "(time units)"),
        "smooth_width": lambda: p.add_argument(
            "--smooth-width", dest="smooth_width", type=float,
            help="Gaussian instrumental width; writes a smoothed copy"),
        "bins": lambda: p.add_argument("--bins", type=int,
                                       help="histogram bin count"),
        "n_grid": lambda: p.add_argument("--n-grid", dest="n_grid",
                                         type=int, help="density grid size"),
        "y_margin": lambda: p.add_argument("--y-margin", dest="y_margin",
                                           type=float,
                                           help="initial grid margin"),
        "max_steps": lambda: p.add_argument("--max-steps", dest="max_steps",
                                            type=int,
                                            help="censoring cap per run"),
        "workers": lambda: p.add_argument("--workers", type=int,
                                          help="parallel worker count"),
        "format": lambda: p.add_argument("--format",
                                         choices=("csv", "json"),
                                         help="table output format"),
    }
    for n in names:
        opts[n]()
    p.add_argument("--config", help="JSON config file (flags override)")
    p.add_argument("--out", required=True, help="output file path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qtelegraph",
        description="Telegraph-noise collapse simulation and "
                    "cross-validation suite")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="single telegraph trajectory")
    _add_common(p, "g", "t_decay", "alpha", "dt", "steps", "stride", "seed",
                "delta", "burn_in", "smooth_width")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("ratio-sweep",
                       help="occupancy-time ratio across GT values")
    _add_common(p, "t_decay", "alpha", "dt", "steps", "seed", "delta",
                "burn_in", "format")
    p.add_argument("--gt-list", dest="gt_list", default="0.25,0.5,1,2,4",
                   help="comma-separated GT values")
    p.add_argument("--check", action="store_true")
    p.add_argument("--tol", type=float, default=0.15,
                   help="--check relative-error tolerance")
    p.set_defaults(fn=cmd_ratio_sweep)

    p = sub.add_parser("alpha-sweep",
                       help="endpoint occupancy fraction across alpha")
    _add_common(p, "g", "t_decay", "dt", "steps", "seed", "delta",
                "burn_in", "format")
    p.add_argument("--alpha-list", dest="alpha_list",
                   default="0.05,0.5,10",
                   help="comma-separated alpha values")
    p.set_defaults(fn=cmd_alpha_sweep)

    p = sub.add_parser("density",
                       help="stationary density vs empirical histogram")
    _add_common(p, "g", "t_decay", "alpha", "dt", "steps", "seed",
                "burn_in", "bins", "n_grid", "y_margin")
    p.add_argument("--check", action="store_true")
    p.add_argument("--tol", type=float, default=0.05,
                   help="--check total-variation tolerance")
    p.set_defaults(fn=cmd_density)

    p = sub.add_parser("exit-time",
                       help="Monte-Carlo band exit times vs analytic values")
    _add_common(p, "g", "t_decay", "alpha", "dt", "seed", "delta",
                "n_traj", "max_steps", "workers")
    p.add_argument("--check", action="store_true")
    p.set_defaults(fn=cmd_exit_time)

    p = sub.add_parser("born",
                       help="pure-noise trapping fractions vs (1+u0)/2")
    _add_common(p, "alpha", "dt", "seed", "n_traj", "steps", "workers")
    p.add_argument("--u0-list", dest="u0_list", default="-0.5,0,0.5",
                   help="comma-separated initial values")
    p.add_argument("--check", action="store_true")
    p.set_defaults(fn=cmd_born)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
