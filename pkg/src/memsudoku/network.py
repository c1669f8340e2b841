"""Coupled memristor-RC oscillator network.

Each cell is a memristor from ``v_dd`` to an output node that is loaded by
``r`` and ``c`` to ground. Output nodes of conflicting cells are joined by
coupling capacitors ``c_c``. Nodal analysis gives

    K dv/dt = g(v),   K = c*I + c_c*L,   g_i = (v_dd - v_i)/M_i - v_i/r

with L the Laplacian of the constraint graph. K never changes during a run,
so it is factorised once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .device import DeviceParams, DeviceState, ResState, memristance_array, validate_params

DENSE_LIMIT = 128


@dataclass(frozen=True)
class ConstraintGraph:
    n_cells: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        seen = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop on cell {a}")
            if not (0 <= a < self.n_cells and 0 <= b < self.n_cells):
                raise ValueError(f"edge ({a}, {b}) out of range")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)

    @property
    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n_cells, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def laplacian(self) -> np.ndarray:
        lap = np.diag(self.degree.astype(float))
        for a, b in self.edges:
            lap[a, b] -= 1.0
            lap[b, a] -= 1.0
        return lap


@dataclass(frozen=True)
class CircuitParams:
    v_dd: float = 1.0
    r: float = 1e4
    c: float = 10e-9
    c_c: float = 1e-9
    device: DeviceParams = field(default_factory=DeviceParams)
    ratio_min: float = 20.0

    def __post_init__(self) -> None:
        for name in ("v_dd", "r", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        # c_c = 0 is allowed: it is the uncoupled control case
        if not self.c_c >= 0:
            raise ValueError("c_c must be >= 0")
        bad = validate_params(self.device, self.r, self.ratio_min)
        if bad:
            raise ValueError("parameter violations: " + ", ".join(bad))


@dataclass
class NetworkState:
    """Network snapshot. Device states are stored column-wise for speed."""

    t: float
    v: np.ndarray
    lrs: np.ndarray
    temperature: np.ndarray
    last_switch: np.ndarray

    @classmethod
    def initial(cls, v0, p: CircuitParams, t: float = 0.0) -> "NetworkState":
        v = np.array(v0, dtype=float)
        n = v.shape[0]
        return cls(
            t=t,
            v=v,
            lrs=np.zeros(n, dtype=bool),
            temperature=np.full(n, p.device.t_amb),
            last_switch=np.full(n, -np.inf),
        )

    @property
    def n_cells(self) -> int:
        return self.v.shape[0]

    def device(self, i: int) -> DeviceState:
        return DeviceState(
            res_state=ResState.LRS if self.lrs[i] else ResState.HRS,
            temperature=float(self.temperature[i]),
            last_switch_time=float(self.last_switch[i]),
        )

    @property
    def devices(self) -> list[DeviceState]:
        return [self.device(i) for i in range(self.n_cells)]

    def copy(self) -> "NetworkState":
        return NetworkState(
            self.t, self.v.copy(), self.lrs.copy(), self.temperature.copy(), self.last_switch.copy()
        )


def build_capacitance_matrix(g: ConstraintGraph, c, c_c: float) -> np.ndarray:
    """``c`` may be a scalar or a per-cell array."""
    c = np.broadcast_to(np.asarray(c, dtype=float), (g.n_cells,))
    return np.diag(c) + c_c * g.laplacian()


def build_capacitance_matrix_sparse(g: ConstraintGraph, c: float, c_c: float) -> scipy.sparse.csc_matrix:
    n = g.n_cells
    deg = g.degree.astype(float)
    if g.edges:
        a, b = np.array(g.edges).T
    else:
        a = b = np.zeros(0, dtype=int)
    rows = np.concatenate([np.arange(n), a, b])
    cols = np.concatenate([np.arange(n), b, a])
    vals = np.concatenate([c + c_c * deg, np.full(2 * len(a), -c_c)])
    return scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))


class Factorization:
    """Cached solver for ``K x = b``.

    Dense Cholesky up to ``DENSE_LIMIT`` cells, sparse LU above.
    """

    def __init__(self, g: ConstraintGraph, c: float, c_c: float):
        self.n = g.n_cells
        self.sparse = self.n > DENSE_LIMIT
        if self.sparse:
            self.matrix = build_capacitance_matrix_sparse(g, c, c_c)
            self._lu = scipy.sparse.linalg.splu(self.matrix)
            if np.any(self._lu.U.diagonal() <= 0):
                raise np.linalg.LinAlgError("capacitance matrix is not positive definite")
        else:
            self.matrix = build_capacitance_matrix(g, c, c_c)
            try:
                self._cho = scipy.linalg.cho_factor(self.matrix)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError("capacitance matrix is not positive definite") from exc

    @classmethod
    def for_circuit(cls, g: ConstraintGraph, p: CircuitParams) -> "Factorization":
        return cls(g, p.c, p.c_c)

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.sparse:
            return self._lu.solve(b)
        return scipy.linalg.cho_solve(self._cho, b)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.sparse else self.matrix


def conductance_rhs(s: NetworkState, p: CircuitParams) -> np.ndarray:
    m = memristance_array(s.lrs, p.device)
    return (p.v_dd - s.v) / m - s.v / p.r


def derivative(s: NetworkState, p: CircuitParams, fact: Factorization) -> np.ndarray:
    return fact.solve(conductance_rhs(s, p))


def divider_target(v_dd: float, r: float, m):
    return v_dd * r / (r + m)
