import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delayflock.delay import DelaySpec, delay_bounds, initial_delay, tau_eval
from delayflock.errors import ConfigError


def test_constant_eval():
    assert tau_eval(DelaySpec.constant(5.0), 12.7) == 5.0


def test_sinusoidal_at_zero():
    assert tau_eval(DelaySpec.sinusoidal(0.2, 0.1, 1.0), 0.0) == pytest.approx(0.2)


def test_sinusoidal_at_quarter_period():
    spec = DelaySpec.sinusoidal(0.2, 0.1, 1.0)
    assert tau_eval(spec, np.pi / 2) == pytest.approx(0.3, abs=1e-12)


def test_constant_bounds():
    assert delay_bounds(DelaySpec.constant(5.0)) == (5.0, 0.0)


def test_sinusoidal_bounds():
    tau_bar, c = delay_bounds(DelaySpec.sinusoidal(0.2, 0.1, 1.0))
    assert tau_bar == pytest.approx(0.3)
    assert c == pytest.approx(0.1)


def test_fast_slope_rejected():
    with pytest.raises(ConfigError):
        DelaySpec.sinusoidal(0.5, 0.5, 3.0)


def test_negative_delay_rejected():
    with pytest.raises(ConfigError):
        DelaySpec.constant(-1.0)
    with pytest.raises(ConfigError):
        DelaySpec.sinusoidal(0.1, 0.2, 1.0)


def test_initial_delay():
    assert initial_delay(DelaySpec.sinusoidal(0.4, 0.2, 0.3)) == pytest.approx(0.4)
    assert initial_delay(DelaySpec.constant(2.0)) == 2.0


@given(st.floats(min_value=0.0, max_value=2.0),
       st.floats(min_value=0.0, max_value=1.0),
       st.floats(min_value=0.0, max_value=5.0),
       st.floats(min_value=-10.0, max_value=100.0))
def test_bounds_certify_samples(a, b_frac, omega, t):
    b = min(a, b_frac)
    if b * omega >= 1.0:
        omega = 0.9 / b if b > 0 else omega
    spec = DelaySpec.sinusoidal(a, b, omega)
    tau_bar, c = delay_bounds(spec)
    val = tau_eval(spec, t)
    assert -1e-12 <= val <= tau_bar + 1e-12
    h = 1e-6
    slope = (tau_eval(spec, t + h) - tau_eval(spec, t - h)) / (2 * h)
    assert abs(slope) <= c + 1e-4
