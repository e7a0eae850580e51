"""Streaming scalar LTI operators used to build the estimator regression.

All filters work sample by sample at a fixed period ``dt`` and keep only a
constant amount of state. The first-order lag ``alpha/(p + alpha)`` is
discretized exactly, so there is no stiffness limit on ``alpha * dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_ALIGN_TOL = 1e-9


@dataclass
class FilterState:
    """State of a first-order lag.

    ``y_prev`` is the last output, ``u_prev`` the last input (only used by
    the linear hold and the dirty derivative), ``primed`` tells whether a
    first sample has been seen.
    """

    alpha: float
    y_prev: float = 0.0
    u_prev: float = 0.0
    primed: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")


class LowPass:
    """First-order lag ``alpha/(p + alpha)`` with exact discretization.

    Two intersample input models are supported:

    ``hold="zoh"``
        ``step(u)`` treats ``u`` as constant over the next interval and
        returns the output at the end of that interval,
        ``y+ = exp(-alpha*dt)*y + (1 - exp(-alpha*dt))*u``. A unit step fed
        from a zero state therefore returns ``1 - exp(-alpha*k*dt)`` on the
        k-th call.
    ``hold="linear"``
        ``step(u_k)`` interpolates the input linearly between the previous
        and the current sample and returns the output at the current sample
        instant. Exact for ramps. The first call primes the input memory and
        returns the initial state.
    """

    def __init__(self, alpha: float, dt: float, hold: str = "zoh", y0: float = 0.0):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        if hold not in ("zoh", "linear"):
            raise ValueError(f"unknown hold {hold!r}")
        self.state = FilterState(alpha=alpha, y_prev=y0)
        self.dt = dt
        self.hold = hold
        self._a = math.exp(-alpha * dt)
        # weight of the end-point sample for a linearly interpolated input
        self._c = 1.0 - (1.0 - self._a) / (alpha * dt)

    @property
    def alpha(self) -> float:
        return self.state.alpha

    @property
    def output(self) -> float:
        return self.state.y_prev

    def advance(self, u: float) -> float:
        """Propagate over one interval with ``u`` held constant."""
        s = self.state
        s.y_prev = self._a * s.y_prev + (1.0 - self._a) * u
        return s.y_prev

    def step(self, u: float) -> float:
        s = self.state
        if self.hold == "zoh":
            s.primed = True
            return self.advance(u)
        if not s.primed:
            s.primed = True
            s.u_prev = u
            return s.y_prev
        a, c = self._a, self._c
        s.y_prev = a * s.y_prev + (1.0 - a - c) * s.u_prev + c * u
        s.u_prev = u
        return s.y_prev


class DirtyDerivative:
    """Realizable derivative ``alpha*p/(p + alpha)``.

    Computed as ``alpha * (u - lowpass(u))`` with the linear-hold lag primed
    on the first sample, which reduces to filtering the secant slope
    ``(u_k - u_{k-1})/dt`` through the zero-order-hold lag. The secant form
    is what gets evaluated: it avoids subtracting two numbers close to ``u``
    and so keeps full precision when ``u`` sits near 1 pu.

    A ramp of slope ``m`` gives ``m * (1 - exp(-alpha*t))``.
    """

    def __init__(self, alpha: float, dt: float):
        self._lag = LowPass(alpha, dt, hold="zoh")
        self.dt = dt

    @property
    def state(self) -> FilterState:
        return self._lag.state

    @property
    def output(self) -> float:
        return self._lag.state.y_prev

    def step(self, u: float) -> float:
        s = self._lag.state
        if not s.primed:
            s.primed = True
            s.u_prev = u
            return s.y_prev
        slope = (u - s.u_prev) / self.dt
        s.u_prev = u
        return self._lag.advance(slope)


class DelayLine:
    """Pure delay by ``d`` seconds on a ring buffer of ``d/dt`` samples.

    ``d`` must be an integer multiple of ``dt``; no interpolation is ever
    done. Until ``d`` seconds of input have been seen the output is 0.
    """

    def __init__(self, d: float, dt: float, fill: float = 0.0):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        n = round(d / dt)
        if n < 1 or abs(n * dt - d) > _ALIGN_TOL * max(1.0, abs(d)):
            raise ValueError(f"delay {d!r} s is not a positive integer multiple of dt={dt!r} s")
        self.d = d
        self.dt = dt
        self.buffer = [fill] * n
        self._i = 0

    def __len__(self) -> int:
        return len(self.buffer)

    def step(self, u: float) -> float:
        i = self._i
        out = self.buffer[i]
        self.buffer[i] = u
        self._i = i + 1 if i + 1 < len(self.buffer) else 0
        return out


def lowpass_step(state: FilterState, u: float, dt: float) -> float:
    """Functional form of :meth:`LowPass.advance` operating on a bare state."""
    a = math.exp(-state.alpha * dt)
    state.y_prev = a * state.y_prev + (1.0 - a) * u
    state.primed = True
    return state.y_prev


def dirty_derivative_step(state: FilterState, u: float, dt: float) -> float:
    """Functional form of :meth:`DirtyDerivative.step`."""
    if not state.primed:
        state.primed = True
        state.u_prev = u
        return state.y_prev
    slope = (u - state.u_prev) / dt
    state.u_prev = u
    a = math.exp(-state.alpha * dt)
    state.y_prev = a * state.y_prev + (1.0 - a) * slope
    return state.y_prev


def delay_step(line: DelayLine, u: float) -> float:
    return line.step(u)
