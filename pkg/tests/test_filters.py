import math

import numpy as np
import pytest

from dreminertia.filters import (DelayLine, DirtyDerivative, FilterState, LowPass, delay_step,
                                 dirty_derivative_step, lowpass_step)


def continuous_lowpass(u, alpha, t_end, h=1e-6):
    # fine-step reference: exact update with the input sampled on a very fine grid
    n = int(round(t_end / h))
    a = math.exp(-alpha * h)
    y = 0.0
    out = np.empty(n + 1)
    out[0] = y
    for k in range(n):
        y = a * y + (1 - a) * u((k + 0.5) * h)
        out[k + 1] = y
    return out


def test_filter_state_rejects_nonpositive_alpha():
    with pytest.raises(ValueError):
        FilterState(alpha=0.0)
    with pytest.raises(ValueError):
        LowPass(-1.0, 1e-3)


def test_lowpass_rejects_bad_dt_and_hold():
    with pytest.raises(ValueError):
        LowPass(1.0, 0.0)
    with pytest.raises(ValueError):
        LowPass(1.0, 1e-3, hold="cubic")


def test_lowpass_first_sample_of_unit_step():
    lp = LowPass(1000.0, 1e-3)
    assert lp.step(1.0) == pytest.approx(1 - math.exp(-1), abs=1e-15)
    assert 1 - math.exp(-1) == pytest.approx(0.63212, abs=1e-5)


def test_lowpass_constant_settles():
    alpha, dt = 50.0, 1e-3
    lp = LowPass(alpha, dt)
    c = 0.731
    for _ in range(int(10 / alpha / dt)):
        y = lp.step(c)
    assert abs(y - c) <= 1e-9 * 1e5  # e^-10 of the initial gap, about 3.3e-5
    for _ in range(int(20 / alpha / dt)):
        y = lp.step(c)
    assert abs(y - c) <= 1e-9


def test_lowpass_bode_magnitude_at_corner():
    alpha, dt = 20.0, 1e-4
    lp = LowPass(alpha, dt, hold="linear")
    t = np.arange(0, 3.0, dt)
    u = np.sin(alpha * t)
    y = np.array([lp.step(v) for v in u])
    tail = y[t > 2.0]
    assert np.max(np.abs(tail)) == pytest.approx(1 / math.sqrt(2), rel=1e-3)


def test_lowpass_linear_hold_exact_on_ramp():
    alpha, dt = 30.0, 1e-3
    u = lambda t: 0.2 + 0.3 * t
    ref = continuous_lowpass(u, alpha, 0.5)
    lp = LowPass(alpha, dt, hold="linear")
    ys = [lp.step(u(k * dt)) for k in range(501)]
    # both start from y=0 with the input already at u(0)
    assert np.max(np.abs(np.array(ys) - ref[::1000])) < 1e-9


def test_lowpass_linear_hold_on_smooth_input_within_interpolation_error():
    alpha, dt = 30.0, 1e-3
    u = lambda t: math.sin(7 * t) + 0.3 * t
    ref = continuous_lowpass(u, alpha, 0.5)
    lp = LowPass(alpha, dt, hold="linear")
    ys = [lp.step(u(k * dt)) for k in range(501)]
    # chord error of linear interpolation is at most dt^2 * max|u''| / 8
    bound = dt**2 * 49 / 8
    assert np.max(np.abs(np.array(ys) - ref[::1000])) < bound


def test_lowpass_linear_hold_first_call_returns_initial_state():
    lp = LowPass(5.0, 1e-3, hold="linear", y0=0.4)
    assert lp.step(10.0) == 0.4
    assert lp.output == 0.4


def test_functional_lowpass_matches_class():
    st = FilterState(alpha=300.0)
    lp = LowPass(300.0, 1e-3)
    for u in [0.0, 1.0, 0.5, -0.2, 3.0]:
        assert lowpass_step(st, u, 1e-3) == lp.step(u)


def test_dirty_derivative_constant_is_zero():
    dd = DirtyDerivative(1000.0, 1e-3)
    out = [dd.step(0.987) for _ in range(50)]
    assert out[0] == 0.0
    assert max(abs(v) for v in out) == 0.0


def test_dirty_derivative_ramp_converges_to_slope():
    alpha, dt, m = 1000.0, 1e-3, -0.0375
    dd = DirtyDerivative(alpha, dt)
    ys = [dd.step(1.0 + m * k * dt) for k in range(200)]
    assert abs(ys[-1] / m - 1) <= 1e-6
    # exact transient for a linearly interpolated ramp
    k = np.arange(1, 200)
    assert np.allclose(ys[1:], m * (1 - np.exp(-alpha * k * dt)), rtol=1e-9, atol=0)


def test_dirty_derivative_step_input_spikes_then_decays():
    dd = DirtyDerivative(100.0, 1e-3)
    dd.step(0.0)
    first = dd.step(1.0)
    assert first == pytest.approx((1 - math.exp(-0.1)) / 1e-3)
    tail = [dd.step(1.0) for _ in range(2000)]
    assert abs(tail[-1]) < 1e-6 * first


def test_functional_dirty_derivative_matches_class():
    st = FilterState(alpha=200.0)
    dd = DirtyDerivative(200.0, 1e-3)
    for u in [1.0, 1.001, 1.003, 0.999]:
        assert dirty_derivative_step(st, u, 1e-3) == dd.step(u)


def test_delay_line_bit_exact():
    rng = np.random.default_rng(3)
    u = rng.normal(size=5000)
    n = 137
    line = DelayLine(n * 1e-3, 1e-3)
    out = np.array([delay_step(line, v) for v in u])
    assert len(line) == n
    assert np.array_equal(out[:n], np.zeros(n))
    assert np.array_equal(out[n:], u[:-n])


@pytest.mark.parametrize("d", [0.0, -1.0, 0.0015, 2.0000001])
def test_delay_line_rejects_misaligned(d):
    with pytest.raises(ValueError):
        DelayLine(d, 1e-3)


def test_delay_line_accepts_float_multiple():
    assert len(DelayLine(2.0, 1e-3)) == 2000
    assert len(DelayLine(0.3, 0.1)) == 3
