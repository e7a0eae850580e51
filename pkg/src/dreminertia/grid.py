"""Desk-scale multi-machine grid used as ground truth for the estimator.

Each machine ``i`` obeys a swing equation on its own base

    d(omega_i)/dt = omega0**2/(2*H_i) * (P_m,i + P_res,i + P_gov,i - P_e,i) / omega_i
    d(delta_i)/dt = omega_b * (omega_i - omega_COI)

with electrical power ``P_e,i = P_share,i + k_sync,i*(delta_i - delta_ref)
+ k_damp,i*(omega_i - omega_ref)``. The references are rating-and-gain
weighted means over the online machines, so the coupling terms move power
between machines without creating or destroying any. PFC units carry a
TGOV1 governor each.

Emitted signals are per unit on the rating of the machines currently
online, so after an outage the aggregated model holds with exactly the
survivors' ``H_tot`` and ``P_m,PFC``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from .model import (AggParams, FrequencyCollapseError, MeasurementSeries, TruthTrace, Y_GUARD,
                    event_index)


@dataclass(frozen=True)
class MachineParams:
    h_i: float
    s_bi: float
    p_mi: float
    k_i: float = 0.0
    t_pi: float = 12.983
    t_zi: float = 6.0
    is_pfc: bool = False
    k_sync: float = 1.5
    k_damp: float = 0.0

    def __post_init__(self):
        if not self.h_i > 0:
            raise ValueError("h_i must be positive")
        if not self.s_bi > 0:
            raise ValueError("s_bi must be positive")
        if self.is_pfc != (self.k_i > 0):
            raise ValueError("a machine is PFC exactly when its droop gain k_i is positive")
        if self.is_pfc and not (self.t_pi > 0 and 0 <= self.t_zi < self.t_pi):
            raise ValueError("PFC governor needs 0 <= t_zi < t_pi")


@dataclass(frozen=True)
class Outage:
    time: float
    machine: int


@dataclass(frozen=True)
class LoadStep:
    """Load change of ``delta`` pu on the online rating, shared by rating."""

    time: float
    delta: float


@dataclass(frozen=True)
class RescheduleRamp:
    """Setpoint change of ``delta`` pu (online rating base) on one machine,
    ramped linearly over ``ramp_time`` seconds."""

    time: float
    machine: int
    delta: float
    ramp_time: float


Event = Union[Outage, LoadStep, RescheduleRamp]


@dataclass
class ScenarioSpec:
    duration: float
    dt: float = 1e-3
    events: list = field(default_factory=list)
    noise: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        self.events = sorted(self.events, key=lambda e: e.time)
        for ev in self.events:
            if not 0 < ev.time < self.duration:
                raise ValueError(f"event time {ev.time} outside (0, {self.duration})")
            if isinstance(ev, RescheduleRamp) and not ev.ramp_time >= 0:
                raise ValueError("ramp_time must be non-negative")


def _weights(machines):
    return np.array([m.h_i * m.s_bi for m in machines])


def compute_coi(speeds: Sequence[float], machines: Sequence[MachineParams]) -> float:
    """Center-of-inertia speed, weighted by ``H_i * S_Bi``."""
    if len(speeds) == 0 or len(speeds) != len(machines):
        raise ValueError("need equally long, non-empty speed and machine lists")
    w = _weights(machines)
    return float(w @ np.asarray(speeds, dtype=float) / w.sum())


def compute_h_tot(machines: Sequence[MachineParams]) -> float:
    if len(machines) == 0:
        raise ValueError("no machines")
    s = np.array([m.s_bi for m in machines])
    return float(_weights(machines).sum() / s.sum())


def compute_avg_freq(pfc_speeds: Sequence[float]) -> float:
    """Unweighted mean speed of the PFC machines."""
    if len(pfc_speeds) == 0:
        raise ValueError("no PFC machines")
    return float(np.mean(pfc_speeds))


def _pfc_sum(values, machines, s_b):
    pfc = [(v, m) for v, m in zip(values, machines) if m.is_pfc]
    if not pfc:
        raise ValueError("no PFC machines")
    if s_b is None:
        s_b = sum(m.s_bi for m in machines)
    return sum(v * m.s_bi for v, m in pfc) / s_b


def compute_p_m_pfc(machines: Sequence[MachineParams], s_b: float | None = None) -> float:
    """Aggregated PFC setpoint on the system base (total rating by default)."""
    return _pfc_sum([m.p_mi for m in machines], machines, s_b)


def compute_p_e_pfc(p_e: Sequence[float], machines: Sequence[MachineParams],
                    s_b: float | None = None) -> float:
    return _pfc_sum(p_e, machines, s_b)


def compute_p_pfc_tot(p_pfc: Sequence[float], machines: Sequence[MachineParams],
                      s_b: float | None = None) -> float:
    return _pfc_sum(p_pfc, machines, s_b)


class GridSimulator:
    """Fixed-step RK4 integration of the multi-machine model."""

    def __init__(self, machines: Sequence[MachineParams], omega0: float = 1.0,
                 f_nom: float = 50.0, y_guard: float = Y_GUARD):
        if not machines:
            raise ValueError("no machines")
        if not any(m.is_pfc for m in machines):
            raise ValueError("fleet needs at least one PFC machine")
        self.machines = list(machines)
        self.omega0 = omega0
        self.omega_b = 2.0 * np.pi * f_nom
        self.y_guard = y_guard
        arr = lambda name: np.array([getattr(m, name) for m in machines], dtype=float)
        self.h, self.s, self.p_m = arr("h_i"), arr("s_bi"), arr("p_mi")
        self.k = arr("k_i")
        self.pfc = np.array([m.is_pfc for m in machines])
        self.t_p = np.where(self.pfc, arr("t_pi"), 1.0)
        self.ratio = np.where(self.pfc, arr("t_zi") / self.t_p, 0.0)
        self.k_sync, self.k_damp = arr("k_sync"), arr("k_damp")
        n = len(machines)
        self.online = np.ones(n, dtype=bool)
        self.omega = np.full(n, float(omega0))
        self.delta = np.zeros(n)
        self.g = np.zeros(n)
        self.p_share = self.p_m.copy()
        self._ramps: list[tuple[float, int, float, float]] = []
        self._refresh()

    def _refresh(self):
        on = self.online.astype(float)
        self._w_coi = self.h * self.s * on
        self._w_sync = self.s * self.k_sync * on
        self._w_damp = self.s * self.k_damp * on
        self._on = on
        self.s_online = float(self.s @ on)

    def _p_res(self, t: float) -> np.ndarray:
        p = np.zeros(len(self.machines))
        for t0, i, dp, tr in self._ramps:
            if t >= t0:
                p[i] += dp if tr == 0 or t >= t0 + tr else dp * (t - t0) / tr
        return p

    def _p_res_block(self, t: np.ndarray) -> np.ndarray:
        """Rescheduling power at each time in ``t``, shape ``(len(t), n)``."""
        p = np.zeros((len(t), len(self.machines)))
        for t0, i, dp, tr in self._ramps:
            frac = np.ones_like(t) if tr == 0 else np.clip((t - t0) / tr, 0.0, 1.0)
            p[:, i] += dp * np.where(t >= t0, frac, 0.0)
        return p

    def ramp_breakpoints(self) -> list[float]:
        return [t0 + tr for t0, _, _, tr in self._ramps if tr > 0]

    def coupling_power(self, omega=None, delta=None) -> np.ndarray:
        """Per-machine synchronizing plus damping power, own base, zero when offline."""
        omega = self.omega if omega is None else omega
        delta = self.delta if delta is None else delta
        ws, wd = self._w_sync, self._w_damp
        d_ref = ws @ delta / ws.sum() if ws.sum() > 0 else 0.0
        w_ref = wd @ omega / wd.sum() if wd.sum() > 0 else 0.0
        return (self.k_sync * (delta - d_ref) + self.k_damp * (omega - w_ref)) * self._on

    def governor_power(self, omega=None, g=None) -> np.ndarray:
        omega = self.omega if omega is None else omega
        g = self.g if g is None else g
        u_g = -self.k * (omega - self.omega0)
        return (self.ratio * u_g + g) * self.pfc

    def electrical_power(self, omega=None, delta=None) -> np.ndarray:
        return (self.p_share + self.coupling_power(omega, delta)) * self._on

    def _deriv(self, omega, delta, g, t):
        if np.any(np.abs(omega[self.online]) < self.y_guard):
            raise FrequencyCollapseError(f"machine speed below {self.y_guard} pu at t={t}")
        on = self._on
        omega_coi = self._w_coi @ omega / self._w_coi.sum()
        p_e = self.p_share + self.coupling_power(omega, delta)
        u_g = -self.k * (omega - self.omega0)
        p_gov = (self.ratio * u_g + g) * self.pfc
        d_omega = self.omega0**2 / (2.0 * self.h) * (self.p_m + self._p_res(t) + p_gov - p_e) / omega
        d_delta = self.omega_b * (omega - omega_coi)
        d_g = ((1.0 - self.ratio) * u_g - g) / self.t_p * self.pfc
        return d_omega * on, d_delta * on, d_g * on

    def step(self, t: float, dt: float) -> None:
        w, d, g = self.omega, self.delta, self.g
        h = 0.5 * dt
        a1, b1, c1 = self._deriv(w, d, g, t)
        a2, b2, c2 = self._deriv(w + h * a1, d + h * b1, g + h * c1, t + h)
        a3, b3, c3 = self._deriv(w + h * a2, d + h * b2, g + h * c2, t + h)
        a4, b4, c4 = self._deriv(w + dt * a3, d + dt * b3, g + dt * c3, t + dt)
        self.omega = w + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        self.delta = d + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        self.g = g + dt / 6.0 * (c1 + 2 * c2 + 2 * c3 + c4)

    def _flat_rhs(self, t, z):
        n = len(self.machines)
        a, b, c = self._deriv(z[:n], z[n:2 * n], z[2 * n:], t)
        return np.concatenate([a, b, c])

    def integrate(self, t_start: float, t_end: float, t_eval: np.ndarray,
                  rtol: float = 1e-11, atol: float = 1e-13) -> np.ndarray:
        """Integrate with DOP853 to ``t_end`` and return states at ``t_eval``,
        shape ``(len(t_eval), 3n)``. Inputs must be smooth on the interval."""
        n = len(self.machines)
        z0 = np.concatenate([self.omega, self.delta, self.g])
        sol = solve_ivp(self._flat_rhs, (t_start, t_end), z0, method="DOP853",
                        rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            raise FrequencyCollapseError(f"integration failed: {sol.message}")
        z_end = sol.y[:, -1]
        self.omega, self.delta, self.g = z_end[:n].copy(), z_end[n:2 * n].copy(), z_end[2 * n:].copy()
        if len(t_eval) == 0:
            return np.empty((0, 3 * n))
        return sol.sol(t_eval).T

    def measure_block(self, t: np.ndarray, states: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`measure` over stacked states; returns ``(3, len(t))``."""
        n = len(self.machines)
        omega, delta, g = states[:, :n], states[:, n:2 * n], states[:, 2 * n:]
        m = self.pfc & self.online
        s = self.s * m
        omega_av = omega[:, m].mean(axis=1)
        u_g = -self.k * (omega - self.omega0)
        p_gov = (self.ratio * u_g + g) * self.pfc
        p_pfc = (p_gov + self._p_res_block(t)) @ s / self.s_online
        ws, wd = self._w_sync, self._w_damp
        d_ref = (delta @ ws / ws.sum())[:, None] if ws.sum() > 0 else 0.0
        w_ref = (omega @ wd / wd.sum())[:, None] if wd.sum() > 0 else 0.0
        p_e = (self.p_share + self.k_sync * (delta - d_ref) + self.k_damp * (omega - w_ref))
        p_e = (p_e * self._on) @ s / self.s_online
        return np.vstack([omega_av, p_pfc, p_e])

    def apply(self, event: Event, t: float) -> None:
        n = len(self.machines)
        if isinstance(event, LoadStep):
            self.p_share = self.p_share + event.delta * self._on
        elif isinstance(event, Outage):
            j = event.machine
            if not 0 <= j < n or not self.online[j]:
                raise IndexError(f"outage of machine {j}: no such online machine")
            if not np.any(self.pfc & self.online & (np.arange(n) != j)):
                raise ValueError("outage would leave no PFC machine online")
            lost = self.p_share[j] * self.s[j]
            self.online[j] = False
            self._refresh()
            self.p_share = self.p_share + lost / self.s_online * self._on
            self.p_share[j] = 0.0
        elif isinstance(event, RescheduleRamp):
            i = event.machine
            if not 0 <= i < n or not self.online[i]:
                raise IndexError(f"rescheduling of machine {i}: no such online machine")
            dp = event.delta * self.s_online / self.s[i]
            self._ramps.append((t, i, dp, event.ramp_time))
        else:
            raise TypeError(f"unknown event {event!r}")

    def measure(self, t: float) -> tuple[float, float, float]:
        """``(omega_av, P_PFC,tot, P_e,PFC)`` on the online rating."""
        m = self.pfc & self.online
        s = self.s * m
        omega_av = float(np.mean(self.omega[m]))
        p_pfc = float(s @ (self.governor_power() + self._p_res(t))) / self.s_online
        p_e = float(s @ self.electrical_power()) / self.s_online
        return omega_av, p_pfc, p_e

    def truth(self) -> tuple[float, float]:
        """``(H_tot, P_m,PFC)`` of the online fleet, via the aggregation helpers."""
        online = self.online_machines()
        return compute_h_tot(online), compute_p_m_pfc(online)

    def online_machines(self) -> list[MachineParams]:
        return [m for m, on in zip(self.machines, self.online) if on]


def simulate_scenario(machines: Sequence[MachineParams], spec: ScenarioSpec,
                      seed: int | None = 0, omega0: float = 1.0, f_nom: float = 50.0,
                      method: str = "dop853", record_coupling: bool = False):
    """Simulate a scenario and return ``(MeasurementSeries, TruthTrace)``.

    The fleet starts in equilibrium at nominal frequency. Events act on the
    first sample at or after their time. ``method="dop853"`` integrates
    adaptively between events and ramp corners and samples the dense output
    on the grid; ``method="rk4"`` takes one fixed RK4 step per sample and is
    much slower. With ``record_coupling`` a third element holds, per sample,
    the total coupling power over online machines in MW (rounding level
    when the bookkeeping is right).
    """
    if method not in ("dop853", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    sim = GridSimulator(machines, omega0=omega0, f_nom=f_nom)
    dt = spec.dt
    n = int(round(spec.duration / dt)) + 1
    for ev in spec.events:
        if isinstance(ev, (Outage, RescheduleRamp)) and not 0 <= ev.machine < len(machines):
            raise IndexError(f"event {ev!r} refers to an unknown machine")
    pending = [(event_index(ev.time, dt), ev) for ev in spec.events]
    t_grid = np.arange(n) * dt
    cols = np.empty((3, n))
    h_tot, p_m = np.empty(n), np.empty(n)
    coupling = np.zeros(n) if record_coupling else None

    boundaries = sorted({k for k, _ in pending if k < n} | {n - 1})
    k0, ev_i = 0, 0
    for k1 in boundaries:
        while ev_i < len(pending) and pending[ev_i][0] <= k0:
            sim.apply(pending[ev_i][1], k0 * dt)
            ev_i += 1
        final = k1 == n - 1
        seg = slice(k0, k1 + 1 if final else k1)
        ts = t_grid[seg]
        h_tot[seg], p_m[seg] = sim.truth()
        if method == "rk4":
            states = np.empty((len(ts), 3 * len(machines)))
            for j, t in enumerate(ts):
                states[j] = np.concatenate([sim.omega, sim.delta, sim.g])
                if k0 + j < k1:
                    sim.step(t, dt)
        else:
            corners = sorted(c for c in sim.ramp_breakpoints() if t_grid[k0] < c < t_grid[k1])
            edges = [t_grid[k0], *corners, t_grid[k1]]
            parts = []
            for j, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
                closed = final and j == len(edges) - 2
                sel = ts[(ts >= a) & ((ts <= b) if closed else (ts < b))]
                parts.append(sim.integrate(a, b, sel))
            states = np.vstack(parts)
        cols[:, seg] = sim.measure_block(ts, states)
        if coupling is not None:
            nm = len(machines)
            for j in range(len(ts)):
                coupling[k0 + j] = float(sim.s @ sim.coupling_power(states[j, :nm],
                                                                     states[j, nm:2 * nm]))
        k0 = k1
    series = MeasurementSeries(t_grid, *cols)
    if spec.noise is not None and any(spec.noise):
        series = series.with_noise(spec.noise, np.random.default_rng(seed))
    truth = TruthTrace(t_grid.copy(), h_tot, p_m)
    if record_coupling:
        return series, truth, coupling
    return series, truth


def _solve_exponent(u, w, lo, hi, target):
    """Find p so that the ``w``-weighted mean of ``lo + (hi-lo)*u**p`` is ``target``."""
    f = lambda p: float(w @ (lo + (hi - lo) * u**p) / w.sum()) - target
    a, b = 1e-3, 50.0
    if f(a) < 0 or f(b) > 0:
        raise ValueError("target not reachable within bounds")
    for _ in range(200):
        mid = 0.5 * (a + b)
        if f(mid) > 0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def default_fleet(seed: int = 0, h_tot: float = 3.665, k_p: float = 2.495,
                  p_m_pfc: float = 0.498, trip_share: float = 0.02,
                  k_sync: float = 1.5, k_damp: float = 20.0) -> list[MachineParams]:
    """Ten-machine heterogeneous fleet, 8 PFC and 2 small non-PFC units.

    Machines are coupled with ``k_sync`` and damped with ``k_damp`` (damper
    windings), so inter-machine swings die out within a few seconds.

    Inertias lie in [2.5, 6] s and the aggregates match ``h_tot``, ``k_p``
    and ``p_m_pfc`` exactly. Machine 7 is a PFC unit sized to carry about
    ``trip_share`` of total generation and serves as the outage candidate.
    """
    rng = np.random.default_rng(seed)
    s = np.concatenate([rng.uniform(900.0, 2000.0, 7), [0.0], rng.uniform(100.0, 200.0, 2)])
    pfc = np.array([True] * 8 + [False] * 2)
    p = np.concatenate([rng.uniform(0.45, 0.6, 8), rng.uniform(0.4, 0.6, 2)])
    # size the trip candidate, then rescale PFC loading; repeat to a fixed point
    for _ in range(50):
        others = float(p[np.arange(10) != 7] @ s[np.arange(10) != 7])
        s[7] = trip_share / (1.0 - trip_share) * others / p[7]
        p[pfc] *= p_m_pfc * s.sum() / float(p[pfc] @ s[pfc])
    # non-PFC units sit at the low end: the PFC-side power balance cannot
    # see their inertia, so their share is kept small
    u = np.concatenate([rng.uniform(0.0, 1.0, 8), rng.uniform(0.0, 0.15, 2)])
    expo = _solve_exponent(u, s, 2.5, 6.0, h_tot)
    h = 2.5 + 3.5 * u**expo
    k = np.where(pfc, rng.uniform(0.7, 1.3, 10), 0.0)
    k *= k_p * s.sum() / float(k @ s)
    t_p = rng.uniform(10.0, 16.0, 10)
    t_z = rng.uniform(4.5, 7.5, 10)
    return [MachineParams(h_i=float(h[i]), s_bi=float(s[i]), p_mi=float(p[i]), k_i=float(k[i]),
                          t_pi=float(t_p[i]), t_zi=float(t_z[i]), is_pfc=bool(pfc[i]),
                          k_sync=k_sync, k_damp=k_damp)
            for i in range(10)]


def homogeneous_fleet(n: int = 10, h: float = 3.665, s_bi: float = 1000.0,
                      p_mi: float = 0.498, k: float = 2.495, t_p: float = 12.983,
                      t_z: float = 6.0, k_sync: float = 1.5) -> list[MachineParams]:
    """Identical PFC machines; the aggregate is exactly ``(h, k, p_mi, t_p, t_z)``."""
    return [MachineParams(h_i=h, s_bi=s_bi, p_mi=p_mi, k_i=k, t_pi=t_p, t_zi=t_z,
                          is_pfc=True, k_sync=k_sync) for _ in range(n)]


def aggregate_params(machines: Sequence[MachineParams], f_nom: float = 50.0,
                     omega0: float = 1.0) -> AggParams:
    """Aggregated-model constants of a fleet on its total rating.

    Droop gains and setpoints of PFC units are summed on the total rating;
    the governor time constants are the droop-and-rating weighted means.
    """
    pfc = [m for m in machines if m.is_pfc]
    if not pfc:
        raise ValueError("no PFC machines")
    s_b = sum(m.s_bi for m in machines)
    w = np.array([m.k_i * m.s_bi for m in pfc])
    return AggParams(s_b=s_b, h_tot=compute_h_tot(machines), omega0=omega0,
                     k_p=float(w.sum() / s_b), p_m_pfc=compute_p_m_pfc(machines),
                     t_p=float(w @ [m.t_pi for m in pfc] / w.sum()),
                     t_z=float(w @ [m.t_zi for m in pfc] / w.sum()), f_nom=f_nom)


def schedule_trace(machines: Sequence[MachineParams], spec: ScenarioSpec) -> np.ndarray:
    """Total rescheduling power per sample, on the online rating at that sample.

    This is the scheduled part of ``P_PFC,tot``; a replay model that knows
    the schedule adds it to its own governor output.
    """
    dt = spec.dt
    n = int(round(spec.duration / dt)) + 1
    t = np.arange(n) * dt
    s_on = np.full(n, float(sum(m.s_bi for m in machines)))
    for ev in spec.events:
        if isinstance(ev, Outage):
            s_on[event_index(ev.time, dt):] -= machines[ev.machine].s_bi
    out = np.zeros(n)
    for ev in spec.events:
        if not isinstance(ev, RescheduleRamp):
            continue
        k0 = event_index(ev.time, dt)
        t0 = k0 * dt
        frac = np.ones(n) if ev.ramp_time == 0 else np.clip((t - t0) / ev.ramp_time, 0.0, 1.0)
        out += np.where(t >= t0, frac, 0.0) * ev.delta * s_on[k0] / s_on
    return out
