import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memsudoku.device import (
    Decision,
    DeviceParams,
    DeviceState,
    ResState,
    SwitchError,
    apply_switch,
    check_switch,
    check_switch_array,
    dissipated_power,
    memristance,
    thermal_step,
    validate_params,
)

P = DeviceParams()
HRS = DeviceState(ResState.HRS, 300.0, -math.inf)
LRS = DeviceState(ResState.LRS, 300.0, -math.inf)

# explicit Euler at step tau/1e6 over one tau, P=1 mW, r_th=1e5, c_th=5e-11
EULER_ONE_TAU = 363.21207427682054


def test_memristance_by_state():
    assert memristance(LRS, P) == 1e3
    assert memristance(HRS, P) == 1e6
    assert memristance(apply_switch(HRS, Decision.SET, 0.0), P) == P.lrs


@pytest.mark.parametrize(
    "v, state, expected",
    [(0.0, HRS, 0.0), (0.0, LRS, 0.0), (0.9, HRS, 8.1e-7), (0.9, LRS, 8.1e-4)],
)
def test_dissipated_power(v, state, expected):
    assert dissipated_power(v, state, P) == pytest.approx(expected, rel=1e-12, abs=0)


def test_thermal_equilibrium_is_fixed():
    assert thermal_step(P.t_amb, 0.0, 1e-6, P) == P.t_amb


def test_thermal_decay_one_tau():
    out = thermal_step(P.t_amb + 10, 0.0, P.thermal_tau, P)
    assert out == pytest.approx(P.t_amb + 10 / math.e, rel=1e-14)


def test_thermal_against_fine_euler():
    p = DeviceParams(r_th=1e5, c_th=5e-11)
    out = thermal_step(p.t_amb, 1e-3, p.thermal_tau, p)
    assert out == pytest.approx(EULER_ONE_TAU, rel=1e-7)
    assert out == pytest.approx(p.t_amb + 100 * (1 - math.exp(-1)), rel=1e-14)
    assert thermal_step(p.t_amb, 1e-3, 1.0, p) == pytest.approx(p.t_amb + 100)


def test_thermal_fine_euler_live():
    # shorter live run of the same oracle; 1e5 substeps
    p = DeviceParams(r_th=1e5, c_th=5e-11)
    dt = 0.3 * p.thermal_tau
    h = dt / 1e5
    temp = p.t_amb + 4.0
    for _ in range(100_000):
        temp += h * (2e-4 - (temp - p.t_amb) / p.r_th) / p.c_th
    assert thermal_step(p.t_amb + 4.0, 2e-4, dt, p) == pytest.approx(temp, rel=1e-7)


@given(
    temp=st.floats(250, 800),
    power=st.floats(0, 1e-2),
    dt=st.floats(1e-10, 1e-3),
)
def test_thermal_step_composes(temp, power, dt):
    one = thermal_step(temp, power, dt, P)
    two = thermal_step(thermal_step(temp, power, dt / 2, P), power, dt / 2, P)
    assert two == pytest.approx(one, rel=1e-12)


@given(temp=st.floats(300, 400), power=st.floats(0, 1e-2), dt=st.floats(1e-12, 1.0))
def test_temperature_stays_above_ambient(temp, power, dt):
    assert thermal_step(temp, power, dt, P) >= P.t_amb - 1e-9


@given(a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_power_nonnegative_and_monotone(a, b):
    pa, pb = dissipated_power(a, HRS, P), dissipated_power(b, HRS, P)
    assert pa >= 0
    if abs(a) <= abs(b):
        assert pa <= pb


def test_check_switch_examples():
    v_half = math.sqrt(0.5 * P.p_set * P.hrs)
    assert check_switch(HRS, v_half, 1.0, P) == Decision.NONE
    v_over = math.sqrt(P.p_set * P.hrs) * 1.01
    assert check_switch(HRS, v_over, 1.0, P) == Decision.SET
    hot = DeviceState(ResState.LRS, P.t_crit + 1, 0.0)
    assert check_switch(hot, 0.0, P.t_lock / 2, P) == Decision.NONE
    assert check_switch(hot, 0.0, P.t_lock, P) == Decision.RESET


def test_apply_switch():
    s = apply_switch(DeviceState(ResState.HRS, 305.0, 0.0), Decision.SET, 5e-6)
    assert s.res_state == ResState.LRS and s.last_switch_time == 5e-6
    assert s.temperature == 305.0
    back = apply_switch(s, Decision.RESET, 6e-6)
    assert back.res_state == ResState.HRS and back.temperature == 305.0
    with pytest.raises(SwitchError):
        apply_switch(s, Decision.SET, 7e-6)
    with pytest.raises(SwitchError):
        apply_switch(HRS, Decision.RESET, 7e-6)


def test_validate_params():
    assert validate_params(P, 1e4, 20) == []
    assert validate_params(DeviceParams(lrs=1e4), 1e4) == ["LRS<R"]
    assert validate_params(DeviceParams(hrs=1e5), 1e4, 20) == ["R≪HRS"]


@pytest.mark.parametrize(
    "kw", [{"lrs": 0}, {"hrs": 500.0}, {"p_set": 0}, {"t_crit": 300.0}, {"r_th": -1}, {"c_th": 0}, {"t_lock": -1e-9}]
)
def test_bad_params_rejected(kw):
    with pytest.raises(ValueError):
        DeviceParams(**kw)


@given(
    lrs=st.lists(st.booleans(), min_size=1, max_size=6),
    data=st.data(),
)
def test_vector_check_matches_scalar(lrs, data):
    n = len(lrs)
    temps = data.draw(st.lists(st.floats(300, 320), min_size=n, max_size=n))
    last = data.draw(st.lists(st.floats(-1e-6, 1e-6), min_size=n, max_size=n))
    vm = data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))
    t = 1e-6
    vec = check_switch_array(np.array(lrs), np.array(temps), np.array(last), np.array(vm), t, P)
    for i in range(n):
        st_i = DeviceState(ResState.LRS if lrs[i] else ResState.HRS, temps[i], last[i])
        assert Decision(int(vec[i])) == check_switch(st_i, vm[i], t, P)
