"""Command-line front end.

Exit codes: 0 success, 1 internal error, 2 usage, 3 configuration,
4 data or file I/O, 5 simulation, 6 estimation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import csvio
from .estimator import EstimatorConfig, NotIdentifiableError, StreamError, estimate_series
from .metrics import (MetricsReport, final_rel_err, format_replay_table, inf_norm,
                      metric_e_avg, metric_freq_replay)
from .model import FrequencyCollapseError, TruthTrace
from .scenarios import (PRESETS, ConfigError, ScenarioConfig, estimates_columns,
                        estimator_overrides, load_config, preset, run_pipeline,
                        run_simulation, write_outputs)

OUTPUT_ENV = "DREMINERTIA_OUTPUT_DIR"

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_CONFIG, EXIT_DATA, EXIT_SIM, EXIT_EST = 0, 1, 2, 3, 4, 5, 6


class CliError(Exception):
    def __init__(self, code: int, category: str, message: str):
        super().__init__(message)
        self.code = code
        self.category = category


# estimator fields exposed as flags: (flag, field, type, nargs)
_EST_FLAGS = [
    ("--alpha", "alpha", float, None),
    ("--d", "d", float, None),
    ("--gamma1", "gamma1", float, None),
    ("--gamma2", "gamma2", float, None),
    ("--dt", "dt", float, None),
    ("--warmup", "warmup", float, None),
    ("--y-guard", "y_guard", float, None),
    ("--eta-init", "eta_init", float, 2),
    ("--omega0", "omega0", float, None),
    ("--pfc-source", "pfc_source", str, None),
    ("--power-hold", "power_hold", str, None),
    ("--eps-div", "eps_div", float, None),
    ("--update", "update", str, None),
]


def _add_estimator_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("estimator overrides")
    for flag, name, typ, nargs in _EST_FLAGS:
        g.add_argument(flag, dest=f"est_{name}", type=typ, nargs=nargs, default=None,
                       metavar=name.upper())


def _estimator_from_args(args, base: EstimatorConfig) -> EstimatorConfig:
    vals = {name: getattr(args, f"est_{name}") for _, name, _, _ in _EST_FLAGS
            if getattr(args, f"est_{name}") is not None}
    return estimator_overrides(base, vals)


def _add_scenario_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=PRESETS, help="built-in scenario (default nominal-outage)")
    src.add_argument("--config", help="TOML scenario file")
    p.add_argument("--seed", type=int, help="seed for fleet heterogeneity and noise")
    p.add_argument("--duration", type=float, help="override scenario duration [s]")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./out)")


def _outdir(args) -> str:
    out = args.out or os.environ.get(OUTPUT_ENV) or "out"
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_DATA, "io", f"cannot create output directory {out}: {exc.strerror}")
    return out


def _scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else preset(args.preset or "nominal-outage")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.duration is not None:
        cfg.duration = args.duration
    if hasattr(args, "est_alpha"):
        cfg.estimator = _estimator_from_args(args, cfg.estimator)
        cfg.dt = cfg.estimator.dt
    return cfg


def _load_truth(path) -> TruthTrace:
    header, data = csvio.read_table(path)
    if header != ["t", "h_tot", "p_m_pfc"]:
        raise csvio.CsvFormatError(f"header {','.join(header)!r} does not match t,h_tot,p_m_pfc",
                                   path, 1)
    return TruthTrace(data[:, 0], data[:, 1], data[:, 2])


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    out = _outdir(args)
    sim = run_simulation(cfg)
    csvio.emit_csv(sim.series, os.path.join(out, "measurements.csv"), unit=args.unit,
                   f_nom=sim.replay_params.f_nom)
    csvio.write_table(os.path.join(out, "truth.csv"), ("t", "h_tot", "p_m_pfc"),
                      [sim.truth.t, sim.truth.h_tot, sim.truth.p_m_pfc])
    print(f"wrote {len(sim.series)} samples to {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    base = load_config(args.config).estimator if args.config else EstimatorConfig()
    cfg = _estimator_from_args(args, base)
    series = csvio.ingest_csv(args.input, unit=args.unit, f_nom=args.f_nom)
    if len(series) >= 2 and abs(series.dt - cfg.dt) > 1e-9:
        cfg = estimator_overrides(cfg, {"dt": series.dt})
    out = _outdir(args)
    t0 = time.perf_counter()
    try:
        est = estimate_series(series, cfg)
    except FrequencyCollapseError as exc:
        raise CliError(EXIT_EST, "estimation", str(exc)) from None
    runtime = time.perf_counter() - t0
    csvio.write_table(os.path.join(out, "estimates.csv"), *estimates_columns(est))
    metrics: dict = {"h_tot_hat": float(est.h_tot_hat[-1]) if len(est) else None,
                     "p_m_pfc_hat": float(est.p_m_pfc_hat[-1]) if len(est) else None,
                     "delta_l2": float(est.delta_l2[-1]) if len(est) else 0.0}
    if args.truth:
        truth = _load_truth(args.truth)
        if len(truth) != len(est):
            raise csvio.CsvFormatError("truth and measurement files differ in length", args.truth)
        e_avg = metric_e_avg(est.t, est.eta_hat, truth.eta, tuple(args.window)) if args.window else None
        report = MetricsReport(tuple(float(v) for v in final_rel_err(est.eta_hat, truth.eta)),
                               e_avg, None, runtime)
        metrics.update(report.to_dict(args.include_runtime))
    elif args.include_runtime:
        metrics["runtime"] = runtime
    with open(os.path.join(out, "metrics.json"), "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"H_tot estimate {metrics['h_tot_hat']} s, P_m,PFC estimate {metrics['p_m_pfc_hat']} pu")
    return EXIT_OK


def cmd_run_scenario(args) -> int:
    cfg = _scenario(args)
    out = _outdir(args)
    result = run_pipeline(cfg)
    files = write_outputs(result, out, decimate=args.decimate, include_runtime=args.include_runtime)
    r = result.report
    print(f"{cfg.name}: final relative error eta1 {r.final_rel_err[0]:.3e}, "
          f"eta2 {r.final_rel_err[1]:.3e}")
    if r.e_avg is not None:
        print(f"e_avg over {cfg.window}: {r.e_avg:.4f}")
    if r.delta_f_max is not None:
        print(format_replay_table([(cfg.name, *r.delta_f_max)]))
    print(f"{len(files)} files in {out}")
    return EXIT_OK


def cmd_replay_metrics(args) -> int:
    cfg = _scenario(args)
    series = csvio.ingest_csv(args.measurements, unit=args.unit, f_nom=cfg.params.f_nom)
    truth = _load_truth(args.truth)
    if len(truth) != len(series):
        raise csvio.CsvFormatError("truth and measurement files differ in length", args.truth)
    if args.h_hat is not None:
        h_hat = args.h_hat
    else:
        header, data = csvio.read_table(args.estimates)
        if "h_tot_hat" not in header:
            raise csvio.CsvFormatError("estimates file has no h_tot_hat column", args.estimates, 1)
        h_hat = float(data[-1, header.index("h_tot_hat")])
    if not (np.isfinite(h_hat) and h_hat > 0):
        raise CliError(EXIT_EST, "estimation", f"estimated H_tot {h_hat} is not usable")
    sim = run_simulation(cfg) if cfg.model == "multimachine" else None
    params = sim.replay_params if sim else cfg.params
    nominal = args.nominal_h if args.nominal_h is not None else (
        sim.nominal_h if sim else cfg.params.h_tot)
    schedule = sim.schedule if sim is not None and len(sim.schedule) == len(series) else None
    traces = metric_freq_replay(series, truth, {"nominal": nominal, "estimated": h_hat}, params,
                                schedule)
    out = _outdir(args)
    csvio.write_table(os.path.join(out, "replay.csv"),
                      ("t", "delta_f_nominal_mhz", "delta_f_estimated_mhz"),
                      [series.t, traces["nominal"], traces["estimated"]], args.decimate)
    row = (cfg.name, inf_norm(traces["nominal"]), inf_norm(traces["estimated"]))
    with open(os.path.join(out, "replay_metrics.json"), "w") as fh:
        json.dump({"case": row[0], "h_nominal": nominal, "h_estimated": h_hat,
                   "nominal_h_mhz": row[1], "estimated_h_mhz": row[2]}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(format_replay_table([row]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dreminertia",
                                description="Online inertia estimation with regressor mixing.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a measurement stream and its ground truth")
    _add_scenario_source(s)
    s.add_argument("--unit", choices=("pu", "hz"), default="pu", help="frequency unit in the CSV")
    _add_out(s)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="run the estimator on a measurement CSV")
    e.add_argument("input", help="CSV with header t,f_av,p_pfc_tot,p_e_pfc")
    e.add_argument("--truth", help="truth CSV (t,h_tot,p_m_pfc) for error metrics")
    e.add_argument("--config", help="TOML file; only its [estimator] section is used")
    e.add_argument("--unit", choices=("pu", "hz"), help="frequency unit (inferred if omitted)")
    e.add_argument("--f-nom", type=float, default=50.0)
    e.add_argument("--window", type=float, nargs=2, metavar=("T1", "T2"), help="e_avg window [s]")
    e.add_argument("--include-runtime", action="store_true")
    _add_estimator_flags(e)
    _add_out(e)
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("run-scenario", help="simulate, estimate, score and export plot data")
    _add_scenario_source(r)
    r.add_argument("--decimate", type=int, default=1, help="keep every n-th row in plot data")
    r.add_argument("--include-runtime", action="store_true",
                   help="record wall time in metrics.json (breaks byte-identical reruns)")
    _add_estimator_flags(r)
    _add_out(r)
    r.set_defaults(func=cmd_run_scenario)

    m = sub.add_parser("replay-metrics", help="frequency replay under nominal and estimated inertia")
    _add_scenario_source(m)
    m.add_argument("--measurements", required=True)
    m.add_argument("--truth", required=True)
    hh = m.add_mutually_exclusive_group(required=True)
    hh.add_argument("--h-hat", type=float, help="estimated H_tot [s]")
    hh.add_argument("--estimates", help="estimates CSV; its last h_tot_hat is used")
    m.add_argument("--nominal-h", type=float, help="nominal H_tot [s]")
    m.add_argument("--unit", choices=("pu", "hz"))
    m.add_argument("--decimate", type=int, default=1)
    _add_out(m)
    m.set_defaults(func=cmd_replay_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if getattr(args, "decimate", 1) < 1:
        print("error[usage]: --decimate must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        code, cat, msg = exc.code, exc.category, str(exc)
    except ConfigError as exc:
        code, cat, msg = EXIT_CONFIG, "config", str(exc)
    except (csvio.CsvFormatError, OSError) as exc:
        code, cat, msg = EXIT_DATA, "data", str(exc)
    except FrequencyCollapseError as exc:
        code, cat, msg = EXIT_SIM, "simulation", str(exc)
    except (StreamError, NotIdentifiableError) as exc:
        code, cat, msg = EXIT_EST, "estimation", str(exc)
    except ValueError as exc:
        code, cat, msg = EXIT_CONFIG, "config", str(exc)
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        code, cat, msg = EXIT_INTERNAL, "internal", f"{type(exc).__name__}: {exc}"
    print(f"error[{cat}]: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
