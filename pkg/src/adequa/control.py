"""Discrete PID with anti-windup and the fan plant it drives.

All controller times are milliseconds, signals are percent.  The plant is
two first-order lags in cascade: the dead time is approximated by a lag
with time constant Tu (transfer function 1/(1+s*Tu), not a transport
delay), followed by the PT1 element Ta*y' + y = Ks*u.  A static map turns
the settled duty cycle into fan RPM: hard zero below the cutoff duty,
proportional above it, clamped at the mechanical maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ToolError


class ControlError(ToolError):
    """Raised with code DOMAIN on out-of-domain arguments."""


@dataclass(frozen=True)
class PidParams:
    Kp: float                # %/%
    Ki: float                # %/% per ms
    Kd: float                # %/% * ms
    Tn: float                # ms, integral reset time
    Tv: float                # ms, derivative time
    Ts: float = 5.0          # ms, sampling period
    u_min: float = 0.0       # % saturation floor
    u_max: float = 100.0     # % saturation ceiling

    def __post_init__(self):
        if self.Ts <= 0:
            raise ControlError("DOMAIN", "PidParams: Ts must be > 0")
        if self.Tn <= 0:
            raise ControlError("DOMAIN", "PidParams: Tn must be > 0")
        if not self.u_min < self.u_max:
            raise ControlError("DOMAIN", "PidParams: u_min must be below u_max")


@dataclass(frozen=True)
class PidState:
    integral_sum: float = 0.0    # accumulated e*Ts, %*ms
    prev_error: float = 0.0      # %

    def __post_init__(self):
        if not (math.isfinite(self.integral_sum) and math.isfinite(self.prev_error)):
            raise ControlError("DOMAIN", "PidState must be finite")


@dataclass(frozen=True)
class PlantParams:
    Ta: float                    # ms, lag time constant
    Tu: float                    # ms, dead time (modeled as a lag)
    Ks: float                    # %/% static gain
    cutoff_pct: float = 28.0     # % duty below which the fan stalls
    rpm_scale: float = 9250.0    # RPM at 100% duty
    rpm_max: float = 10000.0

    def __post_init__(self):
        if self.Ta <= 0:
            raise ControlError("DOMAIN", "PlantParams: Ta must be > 0")
        if self.Tu < 0:
            raise ControlError("DOMAIN", "PlantParams: Tu must be >= 0")
        if self.Ks <= 0:
            raise ControlError("DOMAIN", "PlantParams: Ks must be > 0")


@dataclass(frozen=True)
class PlantState:
    x1: float = 0.0              # dead-time lag output, %
    x2: float = 0.0              # PT1 output duty, %


def chr_tune(Ta: float, Tu: float, Ks: float, Ts: float = 5.0) -> PidParams:
    """Chien/Hrones/Reswick rules for the no-overshoot PID.

    Kp = 0.6*Ta/(Ks*Tu), Tn = Ta, Tv = Tu/2; the standard-form times are
    also returned folded into the parallel gains Ki = Kp/Tn, Kd = Kp*Tv.
    """
    if Ta <= 0:
        raise ControlError("DOMAIN", f"chr_tune needs Ta > 0, got {Ta}")
    if Tu <= 0:
        raise ControlError("DOMAIN", f"chr_tune needs Tu > 0, got {Tu}")
    if Ks <= 0:
        raise ControlError("DOMAIN", f"chr_tune needs Ks > 0, got {Ks}")
    Kp = 0.6 * Ta / (Ks * Tu)
    Tn = Ta
    Tv = 0.5 * Tu
    return PidParams(Kp=Kp, Ki=Kp / Tn, Kd=Kp * Tv, Tn=Tn, Tv=Tv, Ts=Ts)


def pid_step(state: PidState, e: float, p: PidParams):
    """One sampling instant: returns (new state, clamped output %).

    Conditional integration: the integral advances only while the
    unclamped output lies inside the saturation limits, so a saturated
    controller cannot wind the sum up any further.
    """
    candidate = state.integral_sum + e * p.Ts
    raw = p.Kp * e + p.Ki * candidate + p.Kd * (e - state.prev_error) / p.Ts
    if raw < p.u_min:
        u, integral = p.u_min, state.integral_sum
    elif raw > p.u_max:
        u, integral = p.u_max, state.integral_sum
    else:
        u, integral = raw, candidate
    return PidState(integral, e), u


def fan_map(duty_pct: float, p: PlantParams) -> float:
    """Static duty-to-RPM map: stall below cutoff, else proportional."""
    if duty_pct < p.cutoff_pct:
        return 0.0
    return max(0.0, min(p.rpm_max, duty_pct / 100.0 * p.rpm_scale))


def _rates(x1: float, x2: float, u: float, p: PlantParams):
    dx1 = (u - x1) / p.Tu
    dx2 = (p.Ks * x1 - x2) / p.Ta
    return dx1, dx2


def plant_step(state: PlantState, u_pct: float, dt: float, p: PlantParams):
    """Advance the lag cascade by dt ms with one classical RK4 step.

    Returns (new state, rpm).  The input is held constant across the
    step.  Tu = 0 degenerates the first stage to a wire.  x2 carries the
    static gain already, so the readout rescales it to an effective duty
    before the map; at steady state rpm equals fan_map(u_pct) exactly.
    """
    if dt <= 0:
        raise ControlError("DOMAIN", f"plant_step needs dt > 0, got {dt}")
    if p.Tu == 0:
        x1 = u_pct
        # single lag, RK4 on x2 alone
        def f(x2):
            return (p.Ks * x1 - x2) / p.Ta
        x2 = state.x2
        k1 = f(x2)
        k2 = f(x2 + 0.5 * dt * k1)
        k3 = f(x2 + 0.5 * dt * k2)
        k4 = f(x2 + dt * k3)
        x2 = x2 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        new = PlantState(x1, x2)
        return new, fan_map(x2 / p.Ks, p)
    x1, x2 = state.x1, state.x2
    a1, a2 = _rates(x1, x2, u_pct, p)
    b1, b2 = _rates(x1 + 0.5 * dt * a1, x2 + 0.5 * dt * a2, u_pct, p)
    c1, c2 = _rates(x1 + 0.5 * dt * b1, x2 + 0.5 * dt * b2, u_pct, p)
    d1, d2 = _rates(x1 + dt * c1, x2 + dt * c2, u_pct, p)
    x1 = x1 + dt / 6.0 * (a1 + 2 * b1 + 2 * c1 + d1)
    x2 = x2 + dt / 6.0 * (a2 + 2 * b2 + 2 * c2 + d2)
    new = PlantState(x1, x2)
    return new, fan_map(x2 / p.Ks, p)


def step_response(t: float, p: PlantParams, u: float = 1.0) -> float:
    """Closed-form duty response of the lag cascade to a step of height u.

    For distinct time constants:
    y(t) = Ks*u*(1 - (Ta*exp(-t/Ta) - Tu*exp(-t/Tu))/(Ta - Tu)).
    Serves as the analytic oracle for the numeric integrator.
    """
    if t < 0:
        raise ControlError("DOMAIN", "step_response needs t >= 0")
    if p.Tu == 0:
        return p.Ks * u * (1.0 - math.exp(-t / p.Ta))
    if math.isclose(p.Ta, p.Tu):
        T = p.Ta
        return p.Ks * u * (1.0 - (1.0 + t / T) * math.exp(-t / T))
    num = p.Ta * math.exp(-t / p.Ta) - p.Tu * math.exp(-t / p.Tu)
    return p.Ks * u * (1.0 - num / (p.Ta - p.Tu))
