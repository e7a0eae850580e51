"""DREM-based online estimator of total inertia and PFC mechanical setpoint.

Pipeline per sample:

1. regression ``z = eta1*xi2 + eta2*xi3`` from filtered measurements,
2. extension by a pure delay ``d`` and mixing with the adjugate of the
   2x2 extended regressor, giving ``Z_i = Delta*eta_i``,
3. two decoupled scalar gradient estimators,
   ``d(eta_i)/dt = gamma_i*Delta*(Z_i - Delta*eta_i)``. With ``Delta`` and
   ``Z_i`` held over a sample interval each flow is a scalar linear ODE, so
   the default update integrates it exactly (``update="exact"``); plain
   explicit Euler is available as ``update="euler"`` and agrees with it
   whenever ``gamma*Delta**2*dt`` is small.

Regression filters work on interval averages of their inputs: the frequency
and the PFC injection are taken as smooth between samples (trapezoid), the
electrical power as held from the left sample (``power_hold="zoh"``), which
is how sample-and-hold acquisition and the simulators in this package
deliver it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .filters import DelayLine, DirtyDerivative, LowPass
from .model import (ENTSOE_PARAMS, AggParams, FrequencyCollapseError, MeasurementSeries, Sample,
                    governor_steady_state)

EPS_DIV = 1e-6
_T_TOL = 1e-9


class NotIdentifiableError(ValueError):
    """Parameter recovery asked for while ``eta1`` is not usable yet."""


class StreamError(ValueError):
    """Input stream does not match the estimator's sample period."""


class DivergenceWarning(RuntimeWarning):
    """Euler step of the gradient estimator is beyond its stability limit."""

UPDATES = ("exact", "euler")


def default_eta_init(params: AggParams = ENTSOE_PARAMS, scale=(0.3, 0.2)) -> tuple[float, float]:
    """Initial estimates ``diag(scale) @ eta`` for a given aggregate."""
    theta = params.theta()
    return scale[0] * theta.eta1, scale[1] * theta.eta2


@dataclass(frozen=True)
class EstimatorConfig:
    alpha: float = 1e3
    d: float = 2.0
    gamma1: float = 1e10
    gamma2: float = 1e10
    dt: float = 1e-3
    warmup: float | None = None
    y_guard: float = 0.1
    eta_init: tuple[float, float] = field(default_factory=default_eta_init)
    omega0: float = 1.0
    pfc_source: str = "measured"
    governor: AggParams = ENTSOE_PARAMS
    power_hold: str = "zoh"
    eps_div: float = EPS_DIV
    update: str = "exact"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        n = round(self.d / self.dt)
        if not self.d > 0 or n < 1 or abs(n * self.dt - self.d) > _T_TOL * max(1.0, self.d):
            raise ValueError(f"d={self.d!r} must be a positive integer multiple of dt={self.dt!r}")
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("gains must be positive")
        if self.warmup is not None and not self.warmup >= self.d:
            raise ValueError("warmup must be at least d")
        if self.pfc_source not in ("measured", "reconstructed"):
            raise ValueError(f"unknown pfc_source {self.pfc_source!r}")
        if self.power_hold not in ("zoh", "linear"):
            raise ValueError(f"unknown power_hold {self.power_hold!r}")
        if self.update not in UPDATES:
            raise ValueError(f"unknown update {self.update!r}")
        if len(self.eta_init) != 2:
            raise ValueError("eta_init needs two values")

    @property
    def effective_warmup(self) -> float:
        """Gate for estimator updates; the filter start-up transient has decayed
        to ``exp(-50)`` in the delayed copies by then."""
        if self.warmup is not None:
            return self.warmup
        return self.d + 50.0 / self.alpha

    @property
    def b1(self) -> float:
        return self.omega0**2 / 2.0


@dataclass(frozen=True, slots=True)
class RegressorSnapshot:
    t: float
    z: float
    xi2: float
    xi3: float
    z_f: float = 0.0
    xi2_f: float = 0.0
    xi3_f: float = 0.0
    delta: float = 0.0
    z_mix: tuple[float, float] = (0.0, 0.0)
    valid: bool = False


@dataclass(frozen=True, slots=True)
class EstimateRecord:
    t: float
    eta1_hat: float
    eta2_hat: float
    h_tot_hat: float
    p_m_pfc_hat: float
    delta_l2: float


def recover_parameters(eta1_hat: float, eta2_hat: float,
                       eps_div: float = EPS_DIV) -> tuple[float, float]:
    """Map ``(eta1, eta2)`` back to ``(H_tot, P_m,PFC)``."""
    if not eta1_hat > eps_div:
        raise NotIdentifiableError(f"eta1_hat={eta1_hat!r} is not above {eps_div}")
    return 1.0 / eta1_hat, eta2_hat / eta1_hat


def extend_and_mix(z, xi2, xi3, z_f, xi2_f, xi3_f):
    """Determinant and adjugate-mixed outputs of ``[[xi2, xi3], [xi2_f, xi3_f]]``.

    Works elementwise on arrays as well.
    """
    delta = xi2 * xi3_f - xi3 * xi2_f
    z1 = xi3_f * z - xi3 * z_f
    z2 = xi2 * z_f - xi2_f * z
    return delta, z1, z2


def _step_gain(gamma: float, delta: float, dt: float, update: str) -> float:
    """Effective ``gamma*dt`` of one interval."""
    if update == "euler":
        return gamma * dt
    rate = gamma * delta * delta * dt
    if rate < 1e-12:
        return gamma * dt
    return -math.expm1(-rate) / (delta * delta)


def gradient_update(eta_hat: tuple[float, float], delta: float, z_mix: tuple[float, float],
                    gains: tuple[float, float], dt: float,
                    update: str = "exact") -> tuple[float, float]:
    """Advance the two scalar gradient estimators over one sample interval.

    ``"exact"`` solves ``d(eta)/dt = gamma*Delta*(Z - Delta*eta)`` in closed
    form, so each estimate moves toward ``Z/Delta`` without overshoot for
    any gain. ``"euler"`` is the explicit Euler step.
    """
    if delta == 0.0:
        return eta_hat
    e1, e2 = eta_hat
    k1 = _step_gain(gains[0], delta, dt, update)
    k2 = _step_gain(gains[1], delta, dt, update)
    return (e1 + k1 * delta * (z_mix[0] - delta * e1),
            e2 + k2 * delta * (z_mix[1] - delta * e2))


def excitation_norm(accumulated: float, delta: float, dt: float) -> tuple[float, float]:
    """Rectangle-rule update of ``int Delta^2``; returns (new accumulator, norm)."""
    accumulated += delta * delta * dt
    return accumulated, math.sqrt(accumulated)


class RegressorBuilder:
    """Streams ``(z, xi2, xi3)`` from measurement samples."""

    def __init__(self, config: EstimatorConfig):
        self.config = config
        self._z = DirtyDerivative(config.alpha, config.dt)
        self._xi2 = LowPass(config.alpha, config.dt)
        self._xi3 = LowPass(config.alpha, config.dt)
        self._gov = None
        self._prev = None

    def _pfc_injection(self, y: float, measured: float) -> float:
        cfg = self.config
        if cfg.pfc_source == "measured":
            return measured
        gov = cfg.governor
        u_g = -gov.k_p * (y - gov.omega0)
        ratio = gov.t_z / gov.t_p
        if self._gov is None:
            self._gov = LowPass(1.0 / gov.t_p, cfg.dt, hold="linear",
                                y0=governor_steady_state(y, gov))
        return ratio * u_g + self._gov.step((1.0 - ratio) * u_g)

    def step(self, t: float, y: float, x_meas: float, u: float) -> tuple[float, float, float]:
        cfg = self.config
        if not abs(y) >= cfg.y_guard:
            raise FrequencyCollapseError(
                f"average frequency {y!r} pu at t={t} is below the guard {cfg.y_guard} pu")
        x = self._pfc_injection(y, x_meas)
        z = self._z.step(y)
        prev = self._prev
        self._prev = (y, x, u)
        if prev is None:
            return z, self._xi2.output, self._xi3.output
        y0, x0, u0 = prev
        b1 = cfg.b1
        u1 = u0 if cfg.power_hold == "zoh" else u
        xi2 = self._xi2.advance(0.5 * b1 * ((x0 - u0) / y0 + (x - u1) / y))
        xi3 = self._xi3.advance(0.5 * b1 * (1.0 / y0 + 1.0 / y))
        return z, xi2, xi3


class DremEstimator:
    """Sequential DREM estimator over one stream. Not thread safe."""

    def __init__(self, config: EstimatorConfig | None = None):
        self.config = config = config or EstimatorConfig()
        self.regressor = RegressorBuilder(config)
        self._delays = [DelayLine(config.d, config.dt) for _ in range(3)]
        self.eta_hat = tuple(float(v) for v in config.eta_init)
        self._gains = (config.gamma1, config.gamma2)
        self._l2sq = 0.0
        self._t0 = None
        self._k = 0
        self._warned = False
        self.snapshot: RegressorSnapshot | None = None

    @property
    def delta_l2(self) -> float:
        return math.sqrt(self._l2sq)

    def _check_time(self, t: float) -> None:
        cfg = self.config
        if self._t0 is None:
            self._t0 = t
            return
        expected = self._t0 + self._k * cfg.dt
        if abs(t - expected) > _T_TOL * max(1.0, abs(expected)):
            raise StreamError(
                f"sample at t={t!r} does not match period dt={cfg.dt!r} (expected t={expected!r})")

    def update(self, sample: Sample) -> EstimateRecord:
        return self.update_values(sample.t, sample.omega_av, sample.p_pfc_tot, sample.p_e_pfc)

    def update_values(self, t: float, omega_av: float, p_pfc_tot: float,
                      p_e_pfc: float) -> EstimateRecord:
        cfg = self.config
        self._check_time(t)
        z, xi2, xi3 = self.regressor.step(t, omega_av, p_pfc_tot, p_e_pfc)
        dz, d2, d3 = self._delays
        z_f, xi2_f, xi3_f = dz.step(z), d2.step(xi2), d3.step(xi3)
        delta, z1, z2 = extend_and_mix(z, xi2, xi3, z_f, xi2_f, xi3_f)
        valid = (t - self._t0) >= cfg.effective_warmup - _T_TOL
        self._k += 1
        if valid:
            if cfg.update == "euler" and not self._warned:
                stiff = max(self._gains) * delta * delta * cfg.dt
                if stiff > 2.0:
                    self._warned = True
                    warnings.warn(
                        f"gamma*Delta^2*dt = {stiff:.3g} > 2 at t={t}: Euler update is unstable",
                        DivergenceWarning, stacklevel=2)
            self.eta_hat = gradient_update(self.eta_hat, delta, (z1, z2), self._gains, cfg.dt,
                                           cfg.update)
            self._l2sq += delta * delta * cfg.dt
        self.snapshot = RegressorSnapshot(t, z, xi2, xi3, z_f, xi2_f, xi3_f, delta, (z1, z2), valid)
        e1, e2 = self.eta_hat
        if e1 > cfg.eps_div:
            h_hat, pm_hat = 1.0 / e1, e2 / e1
        else:
            h_hat = pm_hat = math.nan
        return EstimateRecord(t, e1, e2, h_hat, pm_hat, math.sqrt(self._l2sq))


def run_estimator(samples: Iterable[Sample], config: EstimatorConfig | None = None,
                  snapshots: bool = False) -> Iterator:
    """Stream estimates for ``samples``.

    Yields :class:`EstimateRecord`, or ``(record, snapshot)`` pairs when
    ``snapshots`` is true.
    """
    est = DremEstimator(config)
    for s in samples:
        rec = est.update(s)
        yield (rec, est.snapshot) if snapshots else rec


@dataclass
class EstimateSeries:
    """Columnar estimator output, optionally with regressor internals."""

    t: np.ndarray
    eta_hat: np.ndarray
    delta_l2: np.ndarray
    internals: dict[str, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def h_tot_hat(self) -> np.ndarray:
        e1 = self.eta_hat[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(e1 > EPS_DIV, 1.0 / e1, np.nan)

    @property
    def p_m_pfc_hat(self) -> np.ndarray:
        e1 = self.eta_hat[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(e1 > EPS_DIV, self.eta_hat[:, 1] / e1, np.nan)


_INTERNALS = ("z", "xi2", "xi3", "z_f", "xi2_f", "xi3_f", "delta", "z1", "z2", "valid")


def estimate_series(series: MeasurementSeries, config: EstimatorConfig | None = None,
                    keep_internals: bool = False) -> EstimateSeries:
    """Run the estimator over a whole :class:`MeasurementSeries`."""
    est = DremEstimator(config)
    n = len(series)
    eta = np.empty((n, 2))
    l2 = np.empty(n)
    cols = {k: np.empty(n) for k in _INTERNALS} if keep_internals else None
    rows = zip(series.t.tolist(), series.omega_av.tolist(),
               series.p_pfc_tot.tolist(), series.p_e_pfc.tolist())
    for k, (t, y, x, u) in enumerate(rows):
        rec = est.update_values(t, y, x, u)
        eta[k] = rec.eta1_hat, rec.eta2_hat
        l2[k] = rec.delta_l2
        if cols is not None:
            s = est.snapshot
            for name, v in zip(_INTERNALS, (s.z, s.xi2, s.xi3, s.z_f, s.xi2_f, s.xi3_f,
                                            s.delta, s.z_mix[0], s.z_mix[1], s.valid)):
                cols[name][k] = v
    if cols is not None:
        cols["valid"] = cols["valid"].astype(bool)
    return EstimateSeries(series.t.copy(), eta, l2, cols)
