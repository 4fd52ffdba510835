"""Time-varying delay laws with certified supremum and slope bounds.

Only closed-form families are offered so that the bounds (tau_bar, c) used by
the decay certificates are exact rather than sampled estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class DelaySpec:
    """Delay law tau(t); ``constant`` or ``sinusoidal`` (a + b*sin(omega*t)).

    Construction enforces tau(t) >= 0 everywhere and sup|tau'| < 1.
    """

    kind: str
    tau: float = 0.0
    a: float = 0.0
    b: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if self.kind == "constant":
            if self.tau < 0:
                raise ConfigError(f"delay: constant tau must be >= 0, got {self.tau}")
        elif self.kind == "sinusoidal":
            if self.b < 0 or self.omega < 0:
                raise ConfigError("delay: sinusoidal b and omega must be >= 0")
            if self.a - self.b < 0:
                raise ConfigError(
                    f"delay: sinusoidal law dips below zero (a - b = {self.a - self.b})")
            c = self.b * self.omega
            if c >= 1.0:
                raise ConfigError(
                    f"delay: slope bound b*omega must be < 1, got {c}")
        else:
            raise ConfigError(f"delay: unknown kind {self.kind!r}")

    @classmethod
    def constant(cls, tau: float) -> "DelaySpec":
        return cls(kind="constant", tau=float(tau))

    @classmethod
    def sinusoidal(cls, a: float, b: float, omega: float) -> "DelaySpec":
        return cls(kind="sinusoidal", a=float(a), b=float(b), omega=float(omega))


def tau_eval(spec: DelaySpec, t: float) -> float:
    """Delay at time t; always within [0, tau_bar]."""
    if spec.kind == "constant":
        return spec.tau
    return spec.a + spec.b * np.sin(spec.omega * t)


def delay_bounds(spec: DelaySpec):
    """Certified (tau_bar, c) with tau_bar = sup tau and c = sup |tau'|."""
    if spec.kind == "constant":
        return spec.tau, 0.0
    return spec.a + spec.b, spec.b * spec.omega


def initial_delay(spec: DelaySpec) -> float:
    """tau(0), the span of the required seed history."""
    return tau_eval(spec, 0.0)
