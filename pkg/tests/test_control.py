"""Controller tuning, the discrete PID, and the fan plant."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from adequa import (
    ControlError,
    PidParams,
    PidState,
    PlantParams,
    PlantState,
    chr_tune,
    fan_map,
    pid_step,
    plant_step,
    step_response,
)
from support import cascade_step_response, pid_reference


FAN = PlantParams(Ta=0.330, Tu=0.078, Ks=0.925)


# ------------------------------------------------------------------ tuning

def test_chr_tuning_formulas():
    p = chr_tune(330.0, 78.0, 0.925)
    assert math.isclose(p.Kp, 0.6 * 330.0 / (0.925 * 78.0), rel_tol=1e-12)
    assert p.Tn == 330.0
    assert p.Tv == pytest.approx(0.5 * 78.0)
    assert math.isclose(p.Ki, p.Kp / p.Tn, rel_tol=1e-12)
    assert math.isclose(p.Kd, p.Kp * p.Tv, rel_tol=1e-12)
    assert p.Ts == 5.0


def test_chr_matches_published_gains():
    p = chr_tune(330.0, 78.0, 0.925)
    for got, ref in ((p.Kp, 2.74), (p.Ki, 0.00832), (p.Kd, 107.02703)):
        assert abs(got - ref) / ref < 0.005


def test_chr_rejects_degenerate_plants():
    for bad in ((330.0, 0.0, 0.925), (330.0, 78.0, 0.0), (-1.0, 78.0, 0.925)):
        with pytest.raises(ControlError) as err:
            chr_tune(*bad)
        assert err.value.code == "DOMAIN"


# --------------------------------------------------------------------- pid

def test_pid_params_validate():
    with pytest.raises(ControlError):
        PidParams(1.0, 0.1, 0.0, Tn=10.0, Tv=0.0, Ts=0.0)
    with pytest.raises(ControlError):
        PidParams(1.0, 0.1, 0.0, Tn=10.0, Tv=0.0, u_min=5.0, u_max=5.0)


def test_pid_tracks_direct_summation_until_saturation():
    p = PidParams(Kp=1.0, Ki=0.1, Kd=0.2, Tn=10.0, Tv=0.2,
                  Ts=1.0, u_min=-1e9, u_max=1e9)
    errors = [1.0, 0.5, -0.25, 0.75, 0.0, -1.0]
    state = PidState()
    got = []
    for e in errors:
        state, u = pid_step(state, e, p)
        got.append(u)
    want = pid_reference(1.0, 0.1, 0.2, 1.0, errors)
    assert got == pytest.approx(want)


def test_pid_unit_error_series():
    # constant unit error, pure PI: u_i = Kp + Ki*Ts*(i+1)
    p = PidParams(Kp=1.0, Ki=0.1, Kd=0.0, Tn=10.0, Tv=0.0,
                  Ts=1.0, u_min=-1e9, u_max=1e9)
    state = PidState()
    for i in range(10):
        state, u = pid_step(state, 1.0, p)
        assert u == pytest.approx(1.1 + 0.1 * i)


def test_pid_output_is_clamped():
    p = PidParams(Kp=100.0, Ki=0.0, Kd=0.0, Tn=1.0, Tv=0.0,
                  Ts=1.0, u_min=0.0, u_max=10.0)
    _, u = pid_step(PidState(), 5.0, p)
    assert u == 10.0
    _, u = pid_step(PidState(), -5.0, p)
    assert u == 0.0


def test_integrator_freezes_while_saturated():
    p = PidParams(Kp=1.0, Ki=1.0, Kd=0.0, Tn=1.0, Tv=0.0,
                  Ts=1.0, u_min=0.0, u_max=10.0)
    state = PidState()
    sums = []
    for _ in range(20):
        state, _ = pid_step(state, 5.0, p)
        sums.append(state.integral_sum)
    # once the output saturates the stored integral stops growing
    assert sums[-1] == sums[-2]
    assert max(sums) <= 10.0  # it never runs away past the actuator range


@given(st.lists(st.floats(-100.0, 100.0), min_size=2, max_size=60),
       st.floats(1.0, 50.0))
@settings(max_examples=60, deadline=None)
def test_integral_magnitude_bounded_under_saturation(errors, umax):
    p = PidParams(Kp=2.0, Ki=0.5, Kd=0.0, Tn=4.0, Tv=0.0,
                  Ts=1.0, u_min=-umax, u_max=umax)
    state = PidState()
    bound = umax / p.Ki + 100.0 * p.Ts  # one unclamped step of headroom
    for e in errors:
        state, _ = pid_step(state, e, p)
        assert abs(state.integral_sum) <= bound


def test_prev_error_always_updates():
    p = PidParams(Kp=100.0, Ki=0.0, Kd=1.0, Tn=1.0, Tv=0.01,
                  Ts=1.0, u_min=0.0, u_max=1.0)
    state, _ = pid_step(PidState(), 7.0, p)
    assert state.prev_error == 7.0  # even though the output clamped


# ----------------------------------------------------------------- fan map

def test_fan_map_cutoff_and_scale():
    assert fan_map(0.0, FAN) == 0.0
    assert fan_map(27.0, FAN) == 0.0   # below the starting threshold
    assert fan_map(50.0, FAN) == pytest.approx(4625.0)
    assert fan_map(100.0, FAN) == pytest.approx(9250.0)


def test_fan_map_clamps_to_limit():
    p = PlantParams(Ta=0.330, Tu=0.078, Ks=0.925,
                    rpm_scale=20000.0, rpm_max=10000.0)
    assert fan_map(100.0, p) == 10000.0


# ------------------------------------------------------------------- plant

def test_step_response_limits():
    assert step_response(0.0, FAN) == pytest.approx(0.0)
    assert step_response(100.0, FAN, u=1.0) == pytest.approx(0.925, abs=1e-6)


def test_step_response_at_composite_time_constant():
    # the two-lag closed form, written independently in support
    t = FAN.Ta + FAN.Tu
    want = cascade_step_response(t, FAN.Ta, FAN.Tu, FAN.Ks)
    assert step_response(t, FAN) == pytest.approx(want, rel=1e-12)
    assert want / FAN.Ks == pytest.approx(0.62127, abs=5e-5)


def test_plant_step_matches_closed_form():
    state = PlantState()
    dt = 0.001
    for k in range(1000):
        state, rpm = plant_step(state, 1.0, dt, FAN)
        t = (k + 1) * dt
        want = cascade_step_response(t, FAN.Ta, FAN.Tu, FAN.Ks)
        assert state.x2 == pytest.approx(want, abs=1e-7)


def test_plant_step_matches_matrix_exponential():
    # independent cross-check: exact discretization of the state space
    A = np.array([[-1 / FAN.Tu, 0.0],
                  [FAN.Ks / FAN.Ta, -1 / FAN.Ta]])
    B = np.array([1 / FAN.Tu, 0.0])
    dt = 0.005
    n = 400
    M = np.zeros((3, 3))
    M[:2, :2] = A * dt
    M[:2, 2] = B * dt
    E = expm(M)
    Ad, Bd = E[:2, :2], E[:2, 2]
    x = np.zeros(2)
    state = PlantState()
    for _ in range(n):
        x = Ad @ x + Bd * 1.0
        state, _ = plant_step(state, 1.0, dt, FAN)
    assert state.x1 == pytest.approx(x[0], abs=1e-9)
    assert state.x2 == pytest.approx(x[1], abs=1e-9)


def test_plant_without_dead_lag_is_single_pole():
    p = PlantParams(Ta=0.330, Tu=0.0, Ks=1.0)
    state = PlantState()
    dt = 0.001
    for k in range(500):
        state, _ = plant_step(state, 1.0, dt, p)
    t = 500 * dt
    assert state.x2 == pytest.approx(1.0 - math.exp(-t / 0.330), abs=1e-7)


def test_plant_steady_state_gain():
    state = PlantState()
    for _ in range(20000):
        state, _ = plant_step(state, 50.0, 0.005, FAN)
    assert state.x2 == pytest.approx(0.925 * 50.0, abs=1e-3)


def test_plant_rejects_bad_step():
    with pytest.raises(ControlError):
        plant_step(PlantState(), 1.0, -0.1, FAN)
