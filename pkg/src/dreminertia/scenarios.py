"""Scenario presets, config-file loading and the end-to-end pipeline."""

from __future__ import annotations

import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import csvio
from .estimator import EstimateSeries, EstimatorConfig, estimate_series
from .grid import (LoadStep, MachineParams, Outage, RescheduleRamp, ScenarioSpec,
                   aggregate_params, default_fleet, homogeneous_fleet, schedule_trace,
                   simulate_scenario)
from .metrics import (MetricsReport, final_rel_err, inf_norm, metric_e_avg,
                      metric_freq_replay)
from .model import (ENTSOE_PARAMS, AggParams, AggregatedScenario, MeasurementSeries, StepChange,
                    TruthTrace, governor_steady_state, simulate_aggregated)
from .filters import LowPass

OUTAGE_MW = 1455.0
PRESETS = ("nominal-outage", "reconstructed-outage", "multimachine-outage", "rescheduling")
AGG_EVENTS = ("setpoint_step", "load_step", "inertia_step")
GRID_EVENTS = ("outage", "load_step", "reschedule_ramp")


class ConfigError(ValueError):
    """Invalid or unreadable scenario configuration."""


@dataclass(frozen=True)
class EventSpec:
    time: float
    kind: str
    delta: float = 0.0
    machine: int | None = None
    ramp_time: float = 0.0


@dataclass
class ScenarioConfig:
    name: str = "custom"
    model: str = "aggregated"
    duration: float = 100.0
    dt: float = 1e-3
    seed: int = 0
    noise: tuple[float, float, float] | None = None
    params: AggParams = ENTSOE_PARAMS
    fleet: str = "default"
    machines: list[MachineParams] | None = None
    fleet_options: dict = field(default_factory=dict)
    events: list[EventSpec] = field(default_factory=list)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    window: tuple[float, float] | None = None
    nominal_h: float | None = None

    def __post_init__(self):
        if self.model not in ("aggregated", "multimachine"):
            raise ConfigError(f"unknown model {self.model!r}")
        kinds = AGG_EVENTS if self.model == "aggregated" else GRID_EVENTS
        for ev in self.events:
            if ev.kind not in kinds:
                raise ConfigError(f"event kind {ev.kind!r} not valid for the {self.model} model")
        if abs(self.estimator.dt - self.dt) > 1e-12:
            raise ConfigError(f"estimator dt {self.estimator.dt} differs from scenario dt {self.dt}")

    def build_machines(self) -> list[MachineParams]:
        if self.machines is not None:
            return list(self.machines)
        if self.fleet == "default":
            return default_fleet(self.seed, **self.fleet_options)
        if self.fleet == "homogeneous":
            return homogeneous_fleet(**self.fleet_options)
        raise ConfigError(f"unknown fleet {self.fleet!r}")


def _rescheduling_events() -> list[EventSpec]:
    # schedule changes compressed to a 60 s cadence: two generators ramp to
    # new setpoints while the matching load change arrives as a step with a
    # mismatch in size and timing, which is what excites the frequency
    events = []
    rng = np.random.default_rng(7)
    for j, t0 in enumerate(np.arange(30.0, 790.0, 60.0)):
        sign = 1.0 if j % 2 == 0 else -1.0
        total = 0.0
        for m in rng.choice(7, 2, replace=False):
            dp = sign * float(rng.uniform(1e-3, 3e-3))
            total += dp
            events.append(EventSpec(float(t0), "reschedule_ramp", dp, int(m),
                                    float(rng.uniform(5.0, 20.0))))
        events.append(EventSpec(float(t0) + float(rng.uniform(-10.0, 10.0)) + 15.0, "load_step",
                                total * float(rng.uniform(0.6, 1.4))))
    return events


def preset(name: str) -> ScenarioConfig:
    """Named scenario with the reference estimator configuration."""
    step = -OUTAGE_MW / ENTSOE_PARAMS.s_b
    if name == "nominal-outage":
        return ScenarioConfig(name=name, model="aggregated", duration=100.0,
                              events=[EventSpec(10.0, "setpoint_step", step)])
    if name == "reconstructed-outage":
        return ScenarioConfig(name=name, model="aggregated", duration=100.0,
                              events=[EventSpec(10.0, "setpoint_step", step)],
                              estimator=EstimatorConfig(pfc_source="reconstructed"))
    if name == "multimachine-outage":
        return ScenarioConfig(name=name, model="multimachine", duration=100.0,
                              events=[EventSpec(10.0, "outage", machine=7)],
                              nominal_h=ENTSOE_PARAMS.h_tot)
    if name == "rescheduling":
        return ScenarioConfig(name=name, model="multimachine", duration=800.0,
                              events=_rescheduling_events(), window=(300.0, 761.0),
                              nominal_h=ENTSOE_PARAMS.h_tot)
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


# ---- config files -------------------------------------------------------

_EST_FIELDS = {f.name for f in dataclasses.fields(EstimatorConfig)} - {"governor"}
_AGG_FIELDS = {f.name for f in dataclasses.fields(AggParams)}
_MACHINE_FIELDS = {f.name for f in dataclasses.fields(MachineParams)}


def _check_keys(section: str, got: dict, allowed) -> None:
    extra = set(got) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")


def estimator_overrides(base: EstimatorConfig, values: dict) -> EstimatorConfig:
    """Apply named field overrides to an estimator config."""
    _check_keys("estimator", values, _EST_FIELDS)
    vals = dict(values)
    if "eta_init" in vals:
        vals["eta_init"] = tuple(float(v) for v in vals["eta_init"])
    try:
        return replace(base, **vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[estimator]: {exc}") from None


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from parsed config-file content."""
    _check_keys("top level", data, {"scenario", "aggregated", "fleet", "events", "estimator"})
    sc = dict(data.get("scenario", {}))
    _check_keys("scenario", sc, {"preset", "name", "model", "duration", "dt", "seed", "noise",
                                 "window", "nominal_h"})
    cfg = preset(sc.pop("preset")) if "preset" in sc else ScenarioConfig()
    try:
        for key in ("name", "model", "duration", "dt", "seed", "nominal_h"):
            if key in sc:
                setattr(cfg, key, sc[key])
        if "noise" in sc:
            cfg.noise = tuple(float(v) for v in sc["noise"])
            if len(cfg.noise) != 3:
                raise ConfigError("noise needs three standard deviations (f_av, p_pfc_tot, p_e_pfc)")
        if "window" in sc:
            cfg.window = tuple(float(v) for v in sc["window"])
        if "aggregated" in data:
            _check_keys("aggregated", data["aggregated"], _AGG_FIELDS)
            cfg.params = replace(cfg.params, **data["aggregated"])
        if "fleet" in data:
            fl = dict(data["fleet"])
            _check_keys("fleet", fl, {"kind", "machines", "k_sync", "k_damp", "h_tot", "k_p",
                                      "p_m_pfc", "trip_share", "n", "h", "s_bi", "p_mi", "k",
                                      "t_p", "t_z"})
            cfg.fleet = fl.pop("kind", cfg.fleet)
            if "machines" in fl:
                ms = fl.pop("machines")
                for m in ms:
                    _check_keys("fleet.machines", m, _MACHINE_FIELDS)
                cfg.machines = [MachineParams(**m) for m in ms]
            cfg.fleet_options = fl
        if "events" in data:
            evs = []
            for ev in data["events"]:
                _check_keys("events", ev, {f.name for f in dataclasses.fields(EventSpec)})
                evs.append(EventSpec(**ev))
            cfg.events = evs
        est = dict(data.get("estimator", {}))
        base = cfg.estimator
        if "dt" in sc and "dt" not in est:
            est["dt"] = cfg.dt
        cfg.estimator = estimator_overrides(base, est)
        cfg.__post_init__()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


# ---- pipeline -----------------------------------------------------------

@dataclass
class SimulationResult:
    series: MeasurementSeries
    truth: TruthTrace
    replay_params: AggParams
    nominal_h: float
    schedule: np.ndarray | None = None


def run_simulation(cfg: ScenarioConfig) -> SimulationResult:
    if cfg.model == "aggregated":
        by_kind = {k: [StepChange(e.time, e.delta) for e in cfg.events if e.kind == k]
                   for k in AGG_EVENTS}
        try:
            scen = AggregatedScenario(cfg.duration, cfg.dt, by_kind["setpoint_step"],
                                      by_kind["load_step"], by_kind["inertia_step"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        series, truth = simulate_aggregated(cfg.params, scen)
        if cfg.noise is not None and any(cfg.noise):
            series = series.with_noise(cfg.noise, np.random.default_rng(cfg.seed))
        nominal = cfg.nominal_h if cfg.nominal_h is not None else cfg.params.h_tot
        return SimulationResult(series, truth, cfg.params, nominal)

    machines = cfg.build_machines()
    events = []
    for e in cfg.events:
        if e.kind == "outage":
            events.append(Outage(e.time, e.machine))
        elif e.kind == "load_step":
            events.append(LoadStep(e.time, e.delta))
        else:
            events.append(RescheduleRamp(e.time, e.machine, e.delta, e.ramp_time))
    try:
        spec = ScenarioSpec(cfg.duration, cfg.dt, events, cfg.noise)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    series, truth = simulate_scenario(machines, spec, seed=cfg.seed, f_nom=cfg.params.f_nom)
    tripped = {e.machine for e in cfg.events if e.kind == "outage"}
    survivors = [m for i, m in enumerate(machines) if i not in tripped]
    params = aggregate_params(survivors, f_nom=cfg.params.f_nom)
    nominal = cfg.nominal_h if cfg.nominal_h is not None else aggregate_params(machines).h_tot
    return SimulationResult(series, truth, params, nominal, schedule_trace(machines, spec))


def reconstruct_pfc(series: MeasurementSeries, params: AggParams) -> np.ndarray:
    """Governor-model PFC injection driven by the recorded frequency."""
    ratio = params.t_z / params.t_p
    u_g = -params.k_p * (series.omega_av - params.omega0)
    lag = LowPass(1.0 / params.t_p, series.dt, hold="linear",
                  y0=governor_steady_state(float(series.omega_av[0]), params))
    g = np.array([lag.step(v) for v in ((1.0 - ratio) * u_g).tolist()])
    return ratio * u_g + g


@dataclass
class PipelineResult:
    sim: SimulationResult
    estimates: EstimateSeries
    report: MetricsReport
    replay: dict[str, np.ndarray]
    name: str = "custom"


def evaluate(sim: SimulationResult, estimates: EstimateSeries,
             window: tuple[float, float] | None = None, runtime: float | None = None,
             replay: bool = True) -> tuple[MetricsReport, dict]:
    eta_true = sim.truth.eta
    err = final_rel_err(estimates.eta_hat, eta_true)
    e_avg = None
    if window is not None:
        e_avg = metric_e_avg(estimates.t, estimates.eta_hat, eta_true, window)
    traces, dfm = {}, None
    h_hat = float(estimates.h_tot_hat[-1])
    if replay and np.isfinite(h_hat) and h_hat > 0:
        traces = metric_freq_replay(sim.series, sim.truth,
                                    {"nominal": sim.nominal_h, "estimated": h_hat},
                                    sim.replay_params, sim.schedule)
        dfm = (inf_norm(traces["nominal"]), inf_norm(traces["estimated"]))
    report = MetricsReport(tuple(float(v) for v in err), e_avg, dfm, runtime)
    return report, traces


def run_pipeline(cfg: ScenarioConfig) -> PipelineResult:
    t0 = time.perf_counter()
    sim = run_simulation(cfg)
    est = estimate_series(sim.series, cfg.estimator, keep_internals=True)
    runtime = time.perf_counter() - t0
    report, traces = evaluate(sim, est, cfg.window, runtime)
    return PipelineResult(sim, est, report, traces, cfg.name)


def estimates_columns(est: EstimateSeries):
    header = ("t", "eta1_hat", "eta2_hat", "h_tot_hat", "p_m_pfc_hat", "delta_l2")
    cols = [est.t, est.eta_hat[:, 0], est.eta_hat[:, 1], est.h_tot_hat, est.p_m_pfc_hat,
            est.delta_l2]
    return header, cols


def write_outputs(result: PipelineResult, outdir, decimate: int = 1,
                  include_runtime: bool = False) -> list[str]:
    """Write streams, estimates, metrics and plot-ready traces.

    Returns the written paths relative to ``outdir``.
    """
    sim, est = result.sim, result.estimates
    f_nom = sim.replay_params.f_nom
    files = []

    def put(name, header, cols, dec=1):
        csvio.write_table(os.path.join(outdir, name), header, cols, dec)
        files.append(name)

    csvio.emit_csv(sim.series, os.path.join(outdir, "measurements.csv"))
    files.append("measurements.csv")
    put("truth.csv", ("t", "h_tot", "p_m_pfc"), [sim.truth.t, sim.truth.h_tot, sim.truth.p_m_pfc])
    put("estimates.csv", *estimates_columns(est))

    t = sim.series.t
    eta = sim.truth.eta
    replay_true = metric_freq_replay(sim.series, sim.truth, {"true": sim.truth.h_tot},
                                     sim.replay_params, sim.schedule)["true"]
    put("plots/frequency.csv", ("t", "f_av_hz", "f_av_model_hz"),
        [t, f_nom * sim.series.omega_av, f_nom * sim.series.omega_av + replay_true / 1e3], decimate)
    p_model = reconstruct_pfc(sim.series, sim.replay_params)
    if sim.schedule is not None:
        p_model = p_model + sim.schedule
    put("plots/pfc_power.csv", ("t", "p_pfc_tot", "p_pfc_model"),
        [t, sim.series.p_pfc_tot, p_model], decimate)
    put("plots/eta_hat.csv", ("t", "eta1_hat", "eta2_hat", "eta1", "eta2"),
        [t, est.eta_hat[:, 0], est.eta_hat[:, 1], eta[:, 0], eta[:, 1]], decimate)
    put("plots/eta_ratio.csv", ("t", "eta1_ratio", "eta2_ratio"),
        [t, est.eta_hat[:, 0] / eta[:, 0], est.eta_hat[:, 1] / eta[:, 1]], decimate)
    put("plots/excitation.csv", ("t", "delta_l2"), [t, est.delta_l2], decimate)
    if result.replay:
        put("plots/replay_delta_f.csv", ("t", "delta_f_nominal_mhz", "delta_f_estimated_mhz"),
            [t, result.replay["nominal"], result.replay["estimated"]], decimate)

    metrics = result.report.to_dict(include_runtime)
    metrics["scenario"] = result.name
    metrics["h_tot_true"] = float(sim.truth.h_tot[-1])
    metrics["h_tot_hat"] = float(est.h_tot_hat[-1])
    metrics["h_tot_nominal"] = float(sim.nominal_h)
    with open(os.path.join(outdir, "metrics.json"), "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    files.append("metrics.json")
    return files
