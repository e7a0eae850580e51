"""Accuracy metrics for estimator runs and the frequency replay comparison."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Mapping, Sequence

import numpy as np

from .model import (AggParams, AggState, MeasurementSeries, TrueTheta, TruthTrace,
                    governor_steady_state, step_aggregated)


def _eta_true(eta_true, n: int) -> np.ndarray:
    eta = np.asarray(eta_true, dtype=float)
    if eta.shape == (2,):
        return np.broadcast_to(eta, (n, 2))
    if eta.shape != (n, 2):
        raise ValueError(f"true eta must have shape (2,) or ({n}, 2), got {eta.shape}")
    return eta


def final_rel_err(eta_hat: np.ndarray, eta_true) -> np.ndarray:
    """``|eta_hat_i/eta_i - 1|`` at the last sample."""
    eta_hat = np.asarray(eta_hat, dtype=float)
    eta = _eta_true(eta_true, len(eta_hat))
    return np.abs(eta_hat[-1] / eta[-1] - 1.0)


def rel_err_trace(eta_hat: np.ndarray, eta_true) -> np.ndarray:
    eta_hat = np.asarray(eta_hat, dtype=float)
    eta = _eta_true(eta_true, len(eta_hat))
    return np.abs(eta_hat - eta) / np.abs(eta)


def metric_e_avg(t: np.ndarray, eta_hat: np.ndarray, eta_true,
                 window: tuple[float, float] = (300.0, 761.0)) -> float:
    """Largest time-averaged relative error of the two components on ``window``.

    Rectangle rule on the samples in ``[T1, T2)``; ``eta_true`` is either a
    constant pair or a per-sample ``(N, 2)`` array.
    """
    t = np.asarray(t, dtype=float)
    t1, t2 = window
    if not t2 > t1:
        raise ValueError("window must have T2 > T1")
    if len(t) < 2:
        raise ValueError("trace too short")
    dt = t[1] - t[0]
    if t1 < t[0] - 1e-9 or t2 > t[-1] + dt + 1e-9:
        raise ValueError(f"window [{t1}, {t2}] not covered by trace [{t[0]}, {t[-1]}]")
    err = rel_err_trace(eta_hat, eta_true)
    sel = (t >= t1 - 1e-9) & (t < t2 - 1e-9)
    return float(np.max(err[sel].sum(axis=0) * dt / (t2 - t1)))


def replay_frequency(series: MeasurementSeries, h_candidate, p_m_pfc, params: AggParams,
                     p_sched=None) -> np.ndarray:
    """Re-simulate the aggregated model under a candidate inertia.

    The recorded ``P_e,PFC`` drives the model (held over each interval), the
    PFC injection comes from the model's own governor ``params``, and the
    start is the recorded first frequency with a settled governor.
    ``h_candidate`` and ``p_m_pfc`` may be scalars or per-sample arrays.
    A known scheduled injection ``p_sched`` enters as negative load.
    Returns the replayed ``omega_av`` in pu.
    """
    n = len(series)
    h = np.broadcast_to(np.asarray(h_candidate, dtype=float), (n,)).tolist()
    p_m = np.broadcast_to(np.asarray(p_m_pfc, dtype=float), (n,)).tolist()
    p_e = series.p_e_pfc if p_sched is None else series.p_e_pfc - np.asarray(p_sched, dtype=float)
    p_e = p_e.tolist()
    dt = series.dt
    y0 = float(series.omega_av[0])
    state = AggState(y0, governor_steady_state(y0, params), params.b1)
    out = np.empty(n)
    key, theta = None, None
    for k in range(n):
        out[k] = state.omega_av
        if k == n - 1:
            break
        if key != (h[k], p_m[k]):
            key = (h[k], p_m[k])
            theta = TrueTheta.from_physical(*key)
        state = step_aggregated(state, p_e[k], theta, params, dt)
    return out


def metric_freq_replay(series: MeasurementSeries, truth: TruthTrace,
                       candidates: Mapping[str, object], params: AggParams,
                       p_sched=None) -> dict[str, np.ndarray]:
    """Frequency deviation traces in mHz for each named inertia candidate.

    ``Delta f = f_nom * (omega_replay - omega_recorded)``, converted to mHz.
    """
    out = {}
    for name, h in candidates.items():
        omega = replay_frequency(series, h, truth.p_m_pfc, params, p_sched)
        out[name] = 1e3 * params.f_nom * (omega - series.omega_av)
    return out


def inf_norm(trace: np.ndarray) -> float:
    return float(np.max(np.abs(trace))) if len(trace) else 0.0


@dataclass
class MetricsReport:
    final_rel_err: tuple[float, float]
    e_avg: float | None = None
    delta_f_max: tuple[float, float] | None = None
    runtime: float | None = None

    def __post_init__(self):
        vals = list(self.final_rel_err) + [v for v in (self.e_avg, self.runtime) if v is not None]
        vals += list(self.delta_f_max or ())
        if any(not v >= 0 for v in vals if not np.isnan(v)):
            raise ValueError("metrics must be non-negative")

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = asdict(self)
        d["final_rel_err"] = [float(v) for v in self.final_rel_err]
        if self.delta_f_max is not None:
            d["delta_f_max"] = {"nominal_h_mhz": float(self.delta_f_max[0]),
                                "estimated_h_mhz": float(self.delta_f_max[1])}
        if not include_runtime:
            d.pop("runtime")
        return d


def format_replay_table(rows: Sequence[tuple[str, float, float]]) -> str:
    """Plain-text table of max frequency deviations per case, in mHz."""
    lines = [f"{'case':<28}{'nominal H [mHz]':>18}{'estimated H [mHz]':>20}"]
    for name, nom, est in rows:
        lines.append(f"{name:<28}{nom:>18.3f}{est:>20.3f}")
    return "\n".join(lines)
