"""Fixed-step RK4 integration with bisection-located switching events."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.signal

from .device import Decision, check_switch_array, memristance_array, thermal_step
from .network import (
    DENSE_LIMIT,
    CircuitParams,
    Factorization,
    NetworkState,
    derivative,
    divider_target,
)


class StopMode(str, enum.Enum):
    HORIZON = "HORIZON"
    STABLE_READOUT = "STABLE_READOUT"


class SimulationDiverged(RuntimeError):
    def __init__(self, cell: int, t: float):
        super().__init__(f"non-finite voltage at cell {cell}, t={t!r}")
        self.cell = cell
        self.t = t


@dataclass(frozen=True)
class SimConfig:
    dt: float = 50e-9
    t_end: float = 20e-3
    event_tol: float = 1e-9
    sample_every: int = 100
    stop_mode: StopMode = StopMode.HORIZON
    stable_cycles: int = 5
    seed: int = 0
    jitter: float = 1e-3

    def __post_init__(self) -> None:
        object.__setattr__(self, "stop_mode", StopMode(self.stop_mode))
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not 0 < self.event_tol < self.dt:
            raise ValueError("event_tol must satisfy 0 < event_tol < dt")
        if not self.t_end >= 0:
            raise ValueError("t_end must be >= 0")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ValueError("sample_every must be a positive integer")
        if self.stable_cycles < 1:
            raise ValueError("stable_cycles must be >= 1")
        if not self.jitter >= 0:
            raise ValueError("jitter must be >= 0")


@dataclass(frozen=True)
class EventRecord:
    t: float
    cell: int
    kind: Decision


@dataclass
class Trace:
    sample_t: list[float]
    sample_v: list[np.ndarray]
    events: list[EventRecord]
    final_state: NetworkState
    steps: int = 0
    cycles: int = 0
    stopped_early: bool = False

    @property
    def samples(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.sample_t, self.sample_v))

    def set_times(self, cell: int) -> list[float]:
        return [e.t for e in self.events if e.cell == cell and e.kind == Decision.SET]

    def write_samples_csv(self, path) -> None:
        n = self.final_state.n_cells
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"v_out_{i}" for i in range(n)])
            for t, v in zip(self.sample_t, self.sample_v):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in v])

    def write_events_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "cell", "kind"])
            for e in self.events:
                w.writerow([repr(float(e.t)), e.cell, e.kind.name])


def _thermal_advance(s: NetworkState, v_new: np.ndarray, h: float, p: CircuitParams) -> np.ndarray:
    v_mid = 0.5 * (s.v + v_new)
    power = (p.v_dd - v_mid) ** 2 / memristance_array(s.lrs, p.device)
    return thermal_step(s.temperature, power, h, p.device)


def rk4_step(s: NetworkState, p: CircuitParams, fact: Factorization, dt: float) -> NetworkState:
    """Classical RK4 on the voltages with device states frozen.

    Temperatures use the exact exponential update with the power taken at
    the mean of the start and end voltages.
    """
    def f(v):
        return derivative(NetworkState(s.t, v, s.lrs, s.temperature, s.last_switch), p, fact)

    k1 = f(s.v)
    k2 = f(s.v + 0.5 * dt * k1)
    k3 = f(s.v + 0.5 * dt * k2)
    k4 = f(s.v + dt * k3)
    v_new = s.v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    temp = _thermal_advance(s, v_new, dt, p)
    return NetworkState(s.t + dt, v_new, s.lrs.copy(), temp, s.last_switch.copy())


class _Propagator:
    """RK4 for the frozen-state linear system, precomputed as an affine map.

    With devices frozen, dv/dt = A v + b, and one RK4 step of size h is
    exactly v -> Phi(h) v + psi(h) with Phi the degree-4 Taylor polynomial
    of exp(hA). For the nominal step the powers Phi^k (k = 1..block) and the
    matching offsets are cached per device pattern, so a whole block of
    steps is a single batched product.
    """

    def __init__(self, p: CircuitParams, fact: Factorization, dt: float, block: int = 64, cache_size: int = 1024):
        self.p = p
        self.fact = fact
        self.dt = dt
        self.n = fact.n
        self.block = block
        self.use_affine = self.n <= DENSE_LIMIT
        self.cache_size = cache_size
        self._lin: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
        self._stacks: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
        self._maps: dict[tuple[bytes, float], tuple[np.ndarray, np.ndarray]] = {}
        self._decay = math.exp(-dt / p.device.thermal_tau)

    def _linear(self, lrs: np.ndarray, key: bytes):
        lin = self._lin.get(key)
        if lin is None:
            m = memristance_array(lrs, self.p.device)
            cond = 1.0 / m + 1.0 / self.p.r
            a = -self.fact.solve(np.diag(cond))
            b = self.fact.solve(self.p.v_dd / m)
            if len(self._lin) >= self.cache_size:
                self._lin.clear()
            lin = self._lin[key] = (a, b)
        return lin

    def affine(self, lrs: np.ndarray, h: float, key: Optional[bytes] = None):
        key = lrs.tobytes() if key is None else key
        # bisection only visits dyadic fractions of dt, so these repeat
        hit = self._maps.get((key, h))
        if hit is not None:
            return hit
        a, b = self._linear(lrs, key)
        eye = np.eye(self.n)
        ha = h * a
        inner = eye + ha / 4.0
        inner = eye + (ha / 3.0) @ inner
        inner = eye + (ha / 2.0) @ inner
        phi = eye + ha @ inner
        psi = h * (inner @ b)
        if len(self._maps) >= 16 * self.cache_size:
            self._maps.clear()
        self._maps[(key, h)] = (phi, psi)
        return phi, psi

    def _stack(self, lrs: np.ndarray):
        key = lrs.tobytes()
        st = self._stacks.get(key)
        if st is None:
            phi, psi = self.affine(lrs, self.dt, key)
            powers = np.empty((self.block, self.n, self.n))
            offsets = np.empty((self.block, self.n))
            powers[0], offsets[0] = phi, psi
            for k in range(1, self.block):
                powers[k] = phi @ powers[k - 1]
                offsets[k] = phi @ offsets[k - 1] + psi
            if len(self._stacks) >= self.cache_size:
                self._stacks.clear()
            st = self._stacks[key] = (powers, offsets)
        return st

    def step(self, s: NetworkState, h: float) -> NetworkState:
        if not self.use_affine:
            return rk4_step(s, self.p, self.fact, h)
        phi, psi = self.affine(s.lrs, h)
        v_new = phi @ s.v + psi
        temp = _thermal_advance(s, v_new, h, self.p)
        return NetworkState(s.t + h, v_new, s.lrs, temp, s.last_switch)

    def advance(self, s: NetworkState, nsteps: int):
        """Up to ``nsteps`` nominal steps from ``s``.

        Returns times (k,), voltages (k, n) and temperatures (k, n) after
        each step. Same arithmetic as repeated :meth:`step` up to roundoff.
        """
        if not self.use_affine:
            ts, vs, temps = [], [], []
            cur = s
            for _ in range(min(nsteps, 8)):
                cur = rk4_step(cur, self.p, self.fact, self.dt)
                ts.append(cur.t)
                vs.append(cur.v)
                temps.append(cur.temperature)
            return np.array(ts), np.array(vs), np.array(temps)
        k = min(nsteps, self.block)
        powers, offsets = self._stack(s.lrs)
        vs = powers[:k] @ s.v + offsets[:k]
        prev = np.vstack([s.v[None, :], vs[:-1]])
        v_mid = 0.5 * (prev + vs)
        m = memristance_array(s.lrs, self.p.device)
        dev = self.p.device
        t_inf = dev.t_amb + dev.r_th * (self.p.v_dd - v_mid) ** 2 / m
        e = self._decay
        temps, _ = scipy.signal.lfilter([1.0 - e], [1.0, -e], t_inf, axis=0, zi=(e * s.temperature)[None, :])
        ts = s.t + self.dt * np.arange(1, k + 1)
        return ts, vs, temps


def _decisions(s: NetworkState, p: CircuitParams) -> np.ndarray:
    return check_switch_array(s.lrs, s.temperature, s.last_switch, p.v_dd - s.v, s.t, p.device)


def locate_switch_event(
    s_before: NetworkState,
    s_after: NetworkState,
    p: CircuitParams,
    fact: Factorization,
    event_tol: float = 1e-9,
    stepper: Optional[Callable[[NetworkState, float], NetworkState]] = None,
):
    """Bisect the step ``s_before -> s_after`` for the first switching instant.

    Returns ``(t_event, cell, kind, state_at_event)`` or ``None``. The
    returned state is integrated from ``s_before`` and lies within
    ``event_tol`` after the crossing; ties go to the lowest cell index.
    """
    if stepper is None:
        def stepper(s, h):
            return rk4_step(s, p, fact, h)

    dec = _decisions(s_after, p)
    if not dec.any():
        return None
    lo, hi = 0.0, s_after.t - s_before.t
    s_hi = s_after
    while hi - lo > event_tol:
        mid = 0.5 * (lo + hi)
        s_mid = stepper(s_before, mid)
        d_mid = _decisions(s_mid, p)
        if d_mid.any():
            hi, s_hi, dec = mid, s_mid, d_mid
        else:
            lo = mid
    cell = int(np.flatnonzero(dec)[0])
    return s_hi.t, cell, Decision(int(dec[cell])), s_hi


def _apply_pending(s: NetworkState, p: CircuitParams, events: list[EventRecord]) -> list[int]:
    """Apply every pending switch at ``s.t`` in cell order; returns SET cells."""
    dec = _decisions(s, p)
    set_cells = []
    if not dec.any():
        return set_cells
    s.lrs = s.lrs.copy()
    s.last_switch = s.last_switch.copy()
    for i in np.flatnonzero(dec):
        kind = Decision(int(dec[i]))
        s.lrs[i] = kind == Decision.SET
        s.last_switch[i] = s.t
        events.append(EventRecord(s.t, int(i), kind))
        if kind == Decision.SET:
            set_cells.append(int(i))
    return set_cells


def jittered(v0, cfg: SimConfig) -> np.ndarray:
    v = np.array(v0, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    u = rng.uniform(-1.0, 1.0, size=v.shape[0])
    return v + cfg.jitter * u


ReadoutHook = Callable[[list[EventRecord]], Optional[object]]


def run(
    initial: NetworkState,
    p: CircuitParams,
    fact: Factorization,
    cfg: SimConfig,
    readout_hook: Optional[ReadoutHook] = None,
) -> Trace:
    """Integrate the network from ``initial``.

    The caller supplies the initial voltages as-is; use :func:`jittered` to
    apply the seeded symmetry-breaking perturbation. With
    ``StopMode.STABLE_READOUT`` the hook is called after every full network
    cycle (every cell has SET since the last call) and the run stops once it
    returns the same non-None value ``stable_cycles`` times in a row.
    """
    s = initial.copy()
    n = s.n_cells
    if not np.all(np.isfinite(s.v)):
        raise SimulationDiverged(int(np.flatnonzero(~np.isfinite(s.v))[0]), s.t)
    prop = _Propagator(p, fact, cfg.dt)
    events: list[EventRecord] = []
    sample_t = [s.t]
    sample_v = [s.v.copy()]
    pending_set = np.zeros(n, dtype=bool)
    cycles = 0
    last_readout = None
    streak = 0
    steps = 0
    stopped = False

    def after_sets(cells: list[int]) -> bool:
        nonlocal cycles, last_readout, streak
        if not cells:
            return False
        pending_set[cells] = True
        if not pending_set.all():
            return False
        pending_set[:] = False
        cycles += 1
        if readout_hook is None:
            return False
        value = readout_hook(events)
        if value is not None and value == last_readout:
            streak += 1
        else:
            streak = 1 if value is not None else 0
        last_readout = value
        return cfg.stop_mode == StopMode.STABLE_READOUT and streak >= cfg.stable_cycles

    if cfg.t_end > 0:
        stopped = after_sets(_apply_pending(s, p, events))
    while not stopped and s.t < cfg.t_end:
        # count full steps still needed; partial steps from events shift the grid
        remaining = max(1, math.ceil((cfg.t_end - s.t) / cfg.dt - 1e-9))
        ts, vs, temps = prop.advance(s, remaining)
        unlocked = (ts[:, None] - s.last_switch[None, :]) >= p.device.t_lock
        m = memristance_array(s.lrs, p.device)
        v_mem = p.v_dd - vs
        firing = np.where(s.lrs, temps >= p.device.t_crit, v_mem * v_mem / m >= p.device.p_set) & unlocked
        rows = np.flatnonzero(firing.any(axis=1))
        bad_rows = np.flatnonzero(~np.isfinite(vs).all(axis=1))
        k = len(ts) if rows.size == 0 else int(rows[0])
        if bad_rows.size and bad_rows[0] <= k:
            j = int(bad_rows[0])
            raise SimulationDiverged(int(np.flatnonzero(~np.isfinite(vs[j]))[0]), float(ts[j]))
        # accept the k clean steps
        for j in range(cfg.sample_every - steps % cfg.sample_every - 1, k, cfg.sample_every):
            sample_t.append(float(ts[j]))
            sample_v.append(vs[j].copy())
        steps += k
        if k:
            s = NetworkState(float(ts[k - 1]), vs[k - 1].copy(), s.lrs, temps[k - 1].copy(), s.last_switch)
        if rows.size == 0:
            continue
        nxt = prop.step(s, cfg.dt)
        hit = locate_switch_event(s, nxt, p, fact, cfg.event_tol, prop.step)
        if hit is None:
            # block and single-step arithmetic disagree at roundoff; take the step
            s = nxt
        else:
            s = hit[3]
        if not np.all(np.isfinite(s.v)):
            raise SimulationDiverged(int(np.flatnonzero(~np.isfinite(s.v))[0]), s.t)
        steps += 1
        if steps % cfg.sample_every == 0:
            sample_t.append(s.t)
            sample_v.append(s.v.copy())
        if hit is not None:
            stopped = after_sets(_apply_pending(s, p, events))

    return Trace(sample_t, sample_v, events, s, steps=steps, cycles=cycles, stopped_early=stopped)


def analytic_single_node(p: CircuitParams, m: float, v0: float, t):
    """Closed-form output voltage of one uncoupled node with memristance ``m``."""
    v_tgt = divider_target(p.v_dd, p.r, m)
    tau = p.c * (p.r * m) / (p.r + m)
    return v_tgt + (v0 - v_tgt) * np.exp(-np.asarray(t) / tau)


def crossing_time(p: CircuitParams, m: float, v0: float, v_cross: float) -> float:
    """Time for the frozen single-node solution to reach ``v_cross`` (inf if never)."""
    v_tgt = divider_target(p.v_dd, p.r, m)
    tau = p.c * (p.r * m) / (p.r + m)
    ratio = (v_cross - v_tgt) / (v0 - v_tgt)
    if ratio <= 0 or ratio > 1:
        return math.inf
    return -tau * math.log(ratio)
