"""Run configuration: flat JSON of named fields, and the simulate/solve pipeline."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .device import DeviceParams
from .engine import SimConfig, Trace, jittered, run
from .network import CircuitParams, Factorization, NetworkState
from .puzzle import Boxes, PuzzleError, PuzzleSpec, constraint_graph, initial_voltages
from .readout import ReadoutTracker, SolveReport, report


class ConfigError(ValueError):
    pass


CIRCUIT_KEYS = ("v_dd", "r", "c", "c_c")
DEVICE_KEYS = tuple(f.name for f in dataclasses.fields(DeviceParams))
SIM_KEYS = tuple(f.name for f in dataclasses.fields(SimConfig))
ENCODING_KEYS = ("clue_base", "clue_step", "boxes")
ALL_KEYS = CIRCUIT_KEYS + DEVICE_KEYS + SIM_KEYS + ENCODING_KEYS


def _default_sim() -> SimConfig:
    return SimConfig(stop_mode="STABLE_READOUT")


@dataclass(frozen=True)
class RunConfig:
    circuit: CircuitParams = field(default_factory=CircuitParams)
    sim: SimConfig = field(default_factory=_default_sim)
    clue_base: float = 0.2
    clue_step: float = 0.25
    boxes: Boxes = Boxes.AUTO

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = sorted(set(data) - set(ALL_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        base = cls().to_dict()
        base.update(data)
        try:
            device = DeviceParams(**{k: float(base[k]) for k in DEVICE_KEYS})
            circuit = CircuitParams(device=device, **{k: float(base[k]) for k in CIRCUIT_KEYS})
            sim_kw = {k: base[k] for k in SIM_KEYS}
            for k in ("dt", "t_end", "event_tol", "jitter"):
                sim_kw[k] = float(sim_kw[k])
            for k in ("sample_every", "stable_cycles", "seed"):
                if isinstance(sim_kw[k], bool) or int(sim_kw[k]) != sim_kw[k]:
                    raise ValueError(f"{k} must be an integer")
                sim_kw[k] = int(sim_kw[k])
            sim = SimConfig(**sim_kw)
            boxes = Boxes(str(base["boxes"]).lower())
            clue_base, clue_step = float(base["clue_base"]), float(base["clue_step"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if clue_base < 0 or clue_step < 0:
            raise ConfigError("clue_base and clue_step must be >= 0")
        return cls(circuit, sim, clue_base, clue_step, boxes)

    @classmethod
    def load(cls, path) -> "RunConfig":
        if path is None:
            return cls()
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        c, d, s = self.circuit, self.circuit.device, self.sim
        out = {k: getattr(c, k) for k in CIRCUIT_KEYS}
        out.update({k: getattr(d, k) for k in DEVICE_KEYS})
        out.update({k: getattr(s, k) for k in SIM_KEYS})
        out["stop_mode"] = s.stop_mode.value
        out.update(clue_base=self.clue_base, clue_step=self.clue_step, boxes=self.boxes.value)
        return out

    def replace(self, **overrides) -> "RunConfig":
        """Copy with flat-key overrides, re-validated."""
        data = self.to_dict()
        data.update(overrides)
        return RunConfig.from_dict(data)


def load_device_only(path) -> tuple[DeviceParams, float]:
    """Device parameters and ``r`` without the cross-field check (for check-params)."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - set(ALL_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    defaults = RunConfig().to_dict()
    defaults.update(data)
    try:
        device = DeviceParams(**{k: float(defaults[k]) for k in DEVICE_KEYS})
        r = float(defaults["r"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return device, r


def simulate_puzzle(spec: PuzzleSpec, rc: RunConfig, hook=None, sim: SimConfig | None = None) -> Trace:
    sim = sim or rc.sim
    g = constraint_graph(spec)
    fact = Factorization.for_circuit(g, rc.circuit)
    v0 = initial_voltages(spec, rc.circuit, rc.clue_base, rc.clue_step)
    state = NetworkState.initial(jittered(v0, sim), rc.circuit)
    return run(state, rc.circuit, fact, sim, hook)


def solve_puzzle(spec: PuzzleSpec, rc: RunConfig) -> tuple[Trace, SolveReport]:
    trace = simulate_puzzle(spec, rc, hook=ReadoutTracker(spec))
    return trace, report(trace, spec)


__all__ = [
    "ConfigError",
    "PuzzleError",
    "RunConfig",
    "load_device_only",
    "simulate_puzzle",
    "solve_puzzle",
]
