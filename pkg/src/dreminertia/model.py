"""Aggregated frequency model of a primary-controlled power system.

The average frequency of the PFC units follows the aggregated swing equation

    d(omega)/dt = b1/H_tot * (P_m,PFC + P_PFC,tot - P_e,PFC) / omega

with ``b1 = omega0**2 / 2`` (system base removed, everything per unit), and
the PFC injection ``P_PFC,tot`` comes from a TGOV1 lead-lag governor
``(1 + p*T_z)/(1 + p*T_p)`` acting on ``-K_P*(omega - omega0)``.

The same model serves as a data generator and as the replay model for
frequency-deviation metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

Y_GUARD = 0.1


class FrequencyCollapseError(RuntimeError):
    """Frequency left the region where the aggregated model is meaningful."""


@dataclass(frozen=True)
class AggParams:
    """Aggregated system constants. Defaults are the ENTSO-E aggregate."""

    s_b: float = 570892.0
    h_tot: float = 3.665
    omega0: float = 1.0
    k_p: float = 2.495
    p_m_pfc: float = 0.498
    t_p: float = 12.983
    t_z: float = 6.0
    f_nom: float = 50.0

    def __post_init__(self):
        if not self.s_b > 0:
            raise ValueError("s_b must be positive")
        if not self.h_tot > 0:
            raise ValueError("h_tot must be positive")
        if not self.t_p > 0:
            raise ValueError("t_p must be positive")
        if not 0 <= self.t_z < self.t_p:
            raise ValueError("need 0 <= t_z < t_p for a realizable lead-lag")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if not self.k_p >= 0:
            raise ValueError("k_p must be non-negative")
        if not self.f_nom > 0:
            raise ValueError("f_nom must be positive")

    @property
    def b1(self) -> float:
        return self.omega0**2 / 2.0

    def theta(self) -> "TrueTheta":
        return TrueTheta.from_physical(self.h_tot, self.p_m_pfc)


ENTSOE_PARAMS = AggParams()


@dataclass(frozen=True)
class TrueTheta:
    """Estimator parameters ``eta1 = 1/H_tot`` and ``eta2 = P_m,PFC/H_tot``."""

    eta1: float
    eta2: float

    def __post_init__(self):
        if not self.eta1 > 0:
            raise ValueError("eta1 must be positive")

    @classmethod
    def from_physical(cls, h_tot: float, p_m_pfc: float) -> "TrueTheta":
        return cls(1.0 / h_tot, p_m_pfc / h_tot)

    @property
    def h_tot(self) -> float:
        return 1.0 / self.eta1

    @property
    def p_m_pfc(self) -> float:
        return self.eta2 / self.eta1

    def as_array(self) -> np.ndarray:
        return np.array([self.eta1, self.eta2])


@dataclass
class AggState:
    omega_av: float = 1.0
    g_state: float = 0.0
    b1: float = 0.5


@dataclass(frozen=True, slots=True)
class Sample:
    """One measurement: PFC average frequency and PFC powers, all per unit."""

    t: float
    omega_av: float
    p_pfc_tot: float
    p_e_pfc: float


@dataclass
class MeasurementSeries:
    """Columnar storage for a uniformly sampled stream of :class:`Sample`."""

    t: np.ndarray
    omega_av: np.ndarray
    p_pfc_tot: np.ndarray
    p_e_pfc: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.omega_av = np.asarray(self.omega_av, dtype=float)
        self.p_pfc_tot = np.asarray(self.p_pfc_tot, dtype=float)
        self.p_e_pfc = np.asarray(self.p_e_pfc, dtype=float)
        n = len(self.t)
        if not (len(self.omega_av) == len(self.p_pfc_tot) == len(self.p_e_pfc) == n):
            raise ValueError("all columns must have the same length")

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Sample]:
        for row in zip(self.t.tolist(), self.omega_av.tolist(),
                       self.p_pfc_tot.tolist(), self.p_e_pfc.tolist()):
            yield Sample(*row)

    @property
    def dt(self) -> float:
        if len(self.t) < 2:
            raise ValueError("need at least two samples to define dt")
        return float(self.t[1] - self.t[0])

    @classmethod
    def from_samples(cls, samples: Iterable[Sample]) -> "MeasurementSeries":
        rows = [(s.t, s.omega_av, s.p_pfc_tot, s.p_e_pfc) for s in samples]
        cols = np.array(rows, dtype=float).reshape(-1, 4).T
        return cls(*cols)

    def with_noise(self, std: Sequence[float], rng: np.random.Generator) -> "MeasurementSeries":
        """Return a copy with independent Gaussian noise on the three signals."""
        s_w, s_x, s_u = std
        n = len(self)
        out = MeasurementSeries(self.t.copy(), self.omega_av.copy(),
                                self.p_pfc_tot.copy(), self.p_e_pfc.copy())
        if s_w:
            out.omega_av += rng.normal(0.0, s_w, n)
        if s_x:
            out.p_pfc_tot += rng.normal(0.0, s_x, n)
        if s_u:
            out.p_e_pfc += rng.normal(0.0, s_u, n)
        return out


@dataclass
class TruthTrace:
    """Ground truth of the identified quantities, aligned with a series."""

    t: np.ndarray
    h_tot: np.ndarray
    p_m_pfc: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.h_tot = np.asarray(self.h_tot, dtype=float)
        self.p_m_pfc = np.asarray(self.p_m_pfc, dtype=float)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def eta(self) -> np.ndarray:
        """``(N, 2)`` array of ``(1/H_tot, P_m,PFC/H_tot)``."""
        return np.column_stack([1.0 / self.h_tot, self.p_m_pfc / self.h_tot])

    def final_theta(self) -> TrueTheta:
        return TrueTheta.from_physical(float(self.h_tot[-1]), float(self.p_m_pfc[-1]))


def governor_output(state: AggState, params: AggParams) -> float:
    """TGOV1 output ``P_PFC,tot``: direct feedthrough plus the lag state."""
    u_g = -params.k_p * (state.omega_av - params.omega0)
    return (params.t_z / params.t_p) * u_g + state.g_state


def governor_steady_state(omega: float, params: AggParams) -> float:
    """Lag state of the governor settled at a constant frequency."""
    u_g = -params.k_p * (omega - params.omega0)
    return (1.0 - params.t_z / params.t_p) * u_g


def _check_guard(y: float, y_guard: float) -> None:
    if not abs(y) >= y_guard:
        raise FrequencyCollapseError(
            f"average frequency {y!r} pu is below the validity guard {y_guard} pu")


def agg_derivative(state: AggState, p_e_pfc: float, theta: TrueTheta, params: AggParams,
                   y_guard: float = Y_GUARD) -> float:
    """Frequency derivative in the regression parametrization.

    ``eta1*b1*(x - u)/y + eta2*b1/y`` with ``y`` the frequency, ``x`` the
    governor output and ``u`` the PFC electrical power.
    """
    y = state.omega_av
    _check_guard(y, y_guard)
    x = governor_output(state, params)
    b1 = state.b1
    return theta.eta1 * b1 * (x - p_e_pfc) / y + theta.eta2 * b1 / y


def _rhs(y, g, u, eta1, eta2, b1, k_p, omega0, ratio, t_p, y_guard):
    if not abs(y) >= y_guard:
        raise FrequencyCollapseError(
            f"average frequency {y!r} pu is below the validity guard {y_guard} pu")
    u_g = -k_p * (y - omega0)
    x = ratio * u_g + g
    return (eta1 * (x - u) + eta2) * b1 / y, ((1.0 - ratio) * u_g - g) / t_p


def step_aggregated(state: AggState, p_e_pfc: float, theta: TrueTheta, params: AggParams,
                    dt: float, y_guard: float = Y_GUARD) -> AggState:
    """Advance frequency and governor state by one classical RK4 step.

    ``p_e_pfc`` and ``theta`` are held constant over the step.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    args = (p_e_pfc, theta.eta1, theta.eta2, state.b1, params.k_p, params.omega0,
            params.t_z / params.t_p, params.t_p, y_guard)
    y, g = state.omega_av, state.g_state
    h = 0.5 * dt
    k1y, k1g = _rhs(y, g, *args)
    k2y, k2g = _rhs(y + h * k1y, g + h * k1g, *args)
    k3y, k3g = _rhs(y + h * k2y, g + h * k2g, *args)
    k4y, k4g = _rhs(y + dt * k3y, g + dt * k3g, *args)
    y_new = y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    g_new = g + dt / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
    _check_guard(y_new, y_guard)
    return AggState(y_new, g_new, state.b1)


def to_hz(omega, params: AggParams = ENTSOE_PARAMS):
    return params.f_nom * omega


@dataclass(frozen=True)
class StepChange:
    """A step of ``delta`` pu applied from ``time`` onwards."""

    time: float
    delta: float


def event_index(time: float, dt: float) -> int:
    """First sample index at or after ``time``."""
    return int(math.ceil(time / dt - 1e-9))


@dataclass
class AggregatedScenario:
    """Event list for :func:`simulate_aggregated`.

    ``setpoint_steps`` change ``P_m,PFC`` (e.g. a tripped PFC unit is a
    negative step), ``load_steps`` change ``P_e,PFC``, and ``inertia_steps``
    change ``H_tot``.
    """

    duration: float
    dt: float = 1e-3
    setpoint_steps: list[StepChange] = field(default_factory=list)
    load_steps: list[StepChange] = field(default_factory=list)
    inertia_steps: list[StepChange] = field(default_factory=list)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        for ev in (*self.setpoint_steps, *self.load_steps, *self.inertia_steps):
            if not 0 < ev.time < self.duration:
                raise ValueError(f"event time {ev.time} outside (0, {self.duration})")


def simulate_aggregated(params: AggParams, scenario: AggregatedScenario,
                        p_e0: float | None = None) -> tuple[MeasurementSeries, TruthTrace]:
    """Generate a noise-free measurement stream from the aggregated model.

    The system starts in equilibrium with ``P_e,PFC = P_m,PFC`` unless
    ``p_e0`` is given. Sample ``k`` carries the state at ``t_k`` and the
    inputs held over ``[t_k, t_k+1)``.
    """
    dt = scenario.dt
    n = int(round(scenario.duration / dt)) + 1
    p_m = np.full(n, params.p_m_pfc)
    h = np.full(n, params.h_tot)
    p_e = np.full(n, params.p_m_pfc if p_e0 is None else p_e0)
    for arr, steps in ((p_m, scenario.setpoint_steps), (p_e, scenario.load_steps),
                       (h, scenario.inertia_steps)):
        for ev in steps:
            arr[event_index(ev.time, dt):] += ev.delta

    t = np.arange(n) * dt
    omega = np.empty(n)
    x = np.empty(n)
    state = AggState(params.omega0, 0.0, params.b1)
    p_m_l, h_l, p_e_l = p_m.tolist(), h.tolist(), p_e.tolist()
    theta, key = None, None
    for k in range(n):
        omega[k] = state.omega_av
        x[k] = governor_output(state, params)
        if k == n - 1:
            break
        if key != (h_l[k], p_m_l[k]):
            key = (h_l[k], p_m_l[k])
            theta = TrueTheta.from_physical(*key)
        state = step_aggregated(state, p_e_l[k], theta, params, dt)
    return MeasurementSeries(t, omega, x, p_e), TruthTrace(t, h, p_m)
