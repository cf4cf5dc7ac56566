"""``pushguide`` command-line entry point."""

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .errors import PushGuideError
from .output import (
    MC_COLUMNS,
    PROFILE_COLUMNS,
    header_items,
    json_text,
    mc_rows,
    profile_rows,
    write_csv,
    write_json,
)

SUBCOMMANDS = ("simulate", "sweep", "optimize", "mc", "rates", "figures")
REPORT_FIELDS = (
    "v0", "v_arrival", "travel_time_ms", "z_out_cm", "delta_r_out_um", "delta_r_arrival_mm", "Th_out_uK",
    "fall_time_ms", "eta_percent", "delta_bar_GHz", "v_capture", "adiabaticity_max", "two_level_score",
    "refined_score", "validity_flags",
)


def build_parser():
    parser = argparse.ArgumentParser(prog="pushguide", description="Cold-atom transfer through a pushing-guiding beam.")
    parser.add_argument("--version", action="version", version=f"pushguide {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file, or a bundled name (cs_paper, rb_paper)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key, e.g. --set 'beam.power_mW=15'")
    common.add_argument("--out", default=".", help="directory for output files (default: current)")
    common.add_argument("--json", action="store_true", help="print the result as JSON on stdout")
    common.add_argument("--threads", type=int, default=1, help="worker count; results do not depend on it")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "run the refined model once: report JSON and profile CSV",
        "sweep": "evaluate an objective on a 1-3 axis grid",
        "optimize": "grid-seeded simplex search over free beam parameters",
        "mc": "Monte Carlo ensemble through the guide",
        "rates": "MOT flux and transfer-efficiency bookkeeping",
        "figures": "write the figure datasets from the bundled configs",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _emit(args, summary, human):
    if args.json:
        sys.stdout.write(summary)
    else:
        for key, value in human:
            print(f"{key}: {value}")


def _human(d):
    return [(k, v) for k, v in d.items() if not isinstance(v, (list, dict)) or k == "validity_flags"]


def cmd_simulate(args, cfg, out):
    from .transport import simulate

    sim = simulate(cfg.beam, cfg.species, cfg.geometry, cfg.T0, cfg.options)
    header = header_items(cfg, "simulate")
    report = sim.report.to_dict()
    write_csv(out / "profile.csv", PROFILE_COLUMNS, profile_rows(sim.profile), header)
    text = json_text({"report": report}, header)
    (out / "report.json").write_text(text)
    _emit(args, text, _human(report))


def cmd_sweep(args, cfg, out):
    from .sweep import run_sweep

    spec = cfg.sweep
    result = run_sweep(spec, cfg, threads=args.threads)
    keys = [a.key for a in spec.axes]
    header = header_items(cfg, "sweep", [("sweep.objective", spec.objective)])
    write_csv(out / "sweep.csv", keys + ["objective"] + list(REPORT_FIELDS) + ["error"], result.rows, header)
    best = result.argmax()
    summary = {
        "objective": spec.objective,
        "points": len(result.rows),
        "invalid": sum(r["error"] is not None for r in result.rows),
        "best": None if best is None else {k: result.rows[best][k] for k in keys + ["objective"]},
    }
    _emit(args, json_text({"sweep": summary}, header), [(k, json.dumps(v)) for k, v in summary.items()])


def cmd_optimize(args, cfg, out):
    from .sweep import optimize

    spec = cfg.optimize
    res = optimize(spec, cfg, threads=args.threads)
    header = header_items(cfg, "optimize", [("optimize.objective", spec.objective)])
    payload = {
        "best": res.best,
        "objective": res.objective,
        "seed_best": res.seed_best,
        "evaluations": len(res.trace),
        "report": res.report,
    }
    write_json(out / "optimize.json", {**payload, "trace": res.trace}, header)
    _emit(args, json_text({"optimize": payload}, header),
          [("best", json.dumps(res.best)), ("objective", res.objective), ("evaluations", len(res.trace))])


def cmd_mc(args, cfg, out):
    from .light_atom import guide_depth, pumping_state
    from .monte_carlo import run_ensemble

    mc = cfg.mc
    pumping = pumping_state(cfg.beam, cfg.species, warn=False)
    stats = run_ensemble(mc, cfg.beam, cfg.species, cfg.geometry, pumping, threads=args.threads)
    depth = np.abs(guide_depth(cfg.beam, cfg.species, pumping, stats.z))
    header = header_items(cfg, "mc")
    write_csv(out / "mc_profile.csv", MC_COLUMNS, mc_rows(stats, depth), header)
    summary = {
        "n_atoms": stats.n_atoms,
        "seed": mc.seed,
        "steps": stats.steps,
        "n_captured": stats.n_captured,
        "captured_fraction": stats.captured_fraction,
        "v_arrival": stats.mean_vz[-1],
        "stderr_v_arrival": stats.stderr_vz[-1],
        "travel_time_ms": stats.mean_time[-1] * 1e3,
        "Th_arrival_uK": stats.T_h[-1] * 1e6,
        "delta_r_arrival_mm": stats.delta_r[-1] * 1e3,
        "bound_fraction_arrival": stats.bound_fraction[-1],
    }
    text = json_text({"mc": summary}, header)
    (out / "mc_summary.json").write_text(text)
    _emit(args, text, _human(summary))


def cmd_rates(args, cfg, out):
    from .mot_rates import MotRateParams, outgoing_flux, steady_state_number, transfer_efficiency

    r = cfg.rates
    gamma = r["gamma"] if "gamma" in r else 1.0 / r["tau"]
    l_out = outgoing_flux(r["L1"], gamma, r["N1_push"])
    result = {"gamma": gamma, "L_out": l_out}
    params = MotRateParams(r["L1"], gamma, r.get("push_loss", 0.0), r.get("beta", 0.0), r.get("density", 0.0))
    result["N1_steady"] = steady_state_number(params)
    if "L2" in r:
        result["L2"] = r["L2"]
        result["efficiency"] = transfer_efficiency(r["L2"], l_out)
    header = header_items(cfg, "rates")
    text = json_text({"rates": result}, header)
    (out / "rates.json").write_text(text)
    _emit(args, text, _human(result))


def cmd_figures(args, cfg, out):
    from .figures import write_figures

    paths = write_figures(out)
    files = [p.name for p in paths]
    _emit(args, json.dumps({"figures": files}, indent=2) + "\n", [("wrote", f) for f in files])


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "mc": cmd_mc,
    "rates": cmd_rates,
    "figures": cmd_figures,
}


def _error_line(exc, code):
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n"


def main(argv=None):
    args = build_parser().parse_args(argv)
    error = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if args.threads < 1:
                from .errors import ConfigError

                raise ConfigError("--threads must be >= 1")
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            cfg = None
            if args.command != "figures":
                cfg = load_config(args.config, args.command, args.overrides)
            COMMANDS[args.command](args, cfg, out)
            code = 0
        except PushGuideError as exc:
            code, error = exc.exit_code, _error_line(exc, exc.exit_code)
        except Exception as exc:  # anything unexpected still ends with a JSON error
            code, error = 1, _error_line(exc, 1)
    seen = set()
    for w in caught:
        msg = str(w.message)
        if msg not in seen:
            seen.add(msg)
            sys.stderr.write(json.dumps({"warning": w.category.__name__, "message": msg}) + "\n")
    # the error, if any, is always the last stderr line
    if error:
        sys.stderr.write(error)
    return code


if __name__ == "__main__":
    sys.exit(main())
