"""Unipolar memristor with two resistance states.

SET (HRS -> LRS) fires as soon as the dissipated power reaches ``p_set``.
RESET (LRS -> HRS) is thermal: the filament temperature follows a
first-order heating law and the device resets once it reaches ``t_crit``.
This is a simplified stand-in for a full MIS filament model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np


class ResState(enum.IntEnum):
    HRS = 0
    LRS = 1


class Decision(enum.IntEnum):
    NONE = 0
    SET = 1
    RESET = 2


class SwitchError(RuntimeError):
    """Illegal transition requested (internal logic error)."""


@dataclass(frozen=True)
class DeviceParams:
    lrs: float = 1e3
    hrs: float = 1e6
    p_set: float = 0.8e-6
    t_amb: float = 300.0
    t_crit: float = 310.0
    # 60 us thermal time constant: RESET lands mid-way up the LRS charge
    r_th: float = 2e5
    c_th: float = 3e-10
    t_lock: float = 100e-9

    def __post_init__(self) -> None:
        problems = []
        if not self.lrs > 0:
            problems.append("lrs > 0")
        if not self.hrs > self.lrs:
            problems.append("hrs > lrs")
        if not self.p_set > 0:
            problems.append("p_set > 0")
        if not self.t_crit > self.t_amb:
            problems.append("t_crit > t_amb")
        if not self.r_th > 0:
            problems.append("r_th > 0")
        if not self.c_th > 0:
            problems.append("c_th > 0")
        if not self.t_lock >= 0:
            problems.append("t_lock >= 0")
        if problems:
            raise ValueError("invalid device parameters: " + ", ".join(problems))

    @property
    def thermal_tau(self) -> float:
        return self.r_th * self.c_th


@dataclass(frozen=True)
class DeviceState:
    res_state: ResState = ResState.HRS
    temperature: float = 300.0
    # -inf so that a fresh device is never inside its lockout window
    last_switch_time: float = -math.inf


def memristance(state: DeviceState, p: DeviceParams) -> float:
    return p.lrs if state.res_state == ResState.LRS else p.hrs


def dissipated_power(v_mem: float, state: DeviceState, p: DeviceParams) -> float:
    return v_mem * v_mem / memristance(state, p)


def thermal_step(temperature, power, dt: float, p: DeviceParams):
    """Exact update of ``c_th dT/dt = P - (T - t_amb)/r_th`` for constant P.

    Works elementwise on arrays.
    """
    t_inf = p.t_amb + power * p.r_th
    return t_inf + (temperature - t_inf) * np.exp(-dt / p.thermal_tau)


def check_switch(state: DeviceState, v_mem: float, t: float, p: DeviceParams) -> Decision:
    if t - state.last_switch_time < p.t_lock:
        return Decision.NONE
    if state.res_state == ResState.HRS:
        if dissipated_power(v_mem, state, p) >= p.p_set:
            return Decision.SET
    elif state.temperature >= p.t_crit:
        return Decision.RESET
    return Decision.NONE


def apply_switch(state: DeviceState, decision: Decision, t: float) -> DeviceState:
    if decision == Decision.SET and state.res_state == ResState.HRS:
        return replace(state, res_state=ResState.LRS, last_switch_time=t)
    if decision == Decision.RESET and state.res_state == ResState.LRS:
        return replace(state, res_state=ResState.HRS, last_switch_time=t)
    raise SwitchError(f"cannot apply {decision.name} to a device in {state.res_state.name}")


def validate_params(p: DeviceParams, r_series: float, ratio_min: float = 20.0) -> list[str]:
    """Check ``LRS < R << HRS``; returns the violated clauses (empty if ok)."""
    violations = []
    if not p.lrs < r_series:
        violations.append("LRS<R")
    if not p.hrs >= ratio_min * r_series:
        violations.append("R≪HRS")
    return violations


# Vectorised forms used by the integrator. ``lrs`` is a boolean mask.

def memristance_array(lrs: np.ndarray, p: DeviceParams) -> np.ndarray:
    return np.where(lrs, p.lrs, p.hrs)


def check_switch_array(
    lrs: np.ndarray,
    temperature: np.ndarray,
    last_switch: np.ndarray,
    v_mem: np.ndarray,
    t: float,
    p: DeviceParams,
) -> np.ndarray:
    """Per-cell :class:`Decision` codes, same rules as :func:`check_switch`."""
    unlocked = (t - last_switch) >= p.t_lock
    m = memristance_array(lrs, p)
    set_ = ~lrs & (v_mem * v_mem / m >= p.p_set)
    reset = lrs & (temperature >= p.t_crit)
    out = np.zeros(lrs.shape, dtype=np.int8)
    out[set_ & unlocked] = Decision.SET
    out[reset & unlocked] = Decision.RESET
    return out
