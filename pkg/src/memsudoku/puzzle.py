"""Sudoku / Latin-square puzzles: parsing, conflict graph, clue encoding and
a plain backtracking solution counter.

Cells are indexed row-major, ``index = (row - 1) * n + (col - 1)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .network import CircuitParams, ConstraintGraph


class PuzzleError(ValueError):
    pass


class Boxes(str, enum.Enum):
    AUTO = "auto"
    ON = "on"
    OFF = "off"


@dataclass(frozen=True)
class PuzzleSpec:
    n: int
    clues: tuple[tuple[int, int, int], ...] = ()
    boxes: Boxes = Boxes.AUTO

    def __post_init__(self) -> None:
        object.__setattr__(self, "boxes", Boxes(self.boxes))
        if self.n < 1:
            raise PuzzleError("n must be >= 1")
        seen = set()
        for r, c, d in self.clues:
            if not (1 <= r <= self.n and 1 <= c <= self.n):
                raise PuzzleError(f"clue position ({r}, {c}) outside a {self.n}x{self.n} grid")
            if not 1 <= d <= self.n:
                raise PuzzleError(f"clue digit {d} outside 1..{self.n}")
            if (r, c) in seen:
                raise PuzzleError(f"duplicate clue at ({r}, {c})")
            seen.add((r, c))
        if self.boxes == Boxes.ON and not _is_square(self.n):
            raise PuzzleError(f"boxes=on needs a perfect-square side, got n={self.n}")

    @property
    def use_boxes(self) -> bool:
        if self.boxes == Boxes.AUTO:
            return _is_square(self.n) and self.n >= 4
        return self.boxes == Boxes.ON

    @property
    def n_cells(self) -> int:
        return self.n * self.n

    def with_boxes(self, boxes) -> "PuzzleSpec":
        return PuzzleSpec(self.n, self.clues, Boxes(boxes))

    def clue_grid(self) -> "Grid":
        cells = np.zeros((self.n, self.n), dtype=int)
        for r, c, d in self.clues:
            cells[r - 1, c - 1] = d
        return Grid(cells)


@dataclass(frozen=True, eq=False)
class Grid:
    cells: np.ndarray

    def __post_init__(self) -> None:
        cells = np.array(self.cells, dtype=int)
        if cells.ndim != 2 or cells.shape[0] != cells.shape[1]:
            raise PuzzleError(f"grid must be square, got shape {cells.shape}")
        n = cells.shape[0]
        if cells.size and (cells.min() < 0 or cells.max() > n):
            raise PuzzleError(f"grid values must lie in 0..{n}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def n(self) -> int:
        return self.cells.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and np.array_equal(self.cells, other.cells)

    def __hash__(self) -> int:
        return hash(self.cells.tobytes())

    def tolist(self) -> list[list[int]]:
        return self.cells.tolist()

    def to_text(self) -> str:
        return "\n".join(" ".join(str(x) if x else "." for x in row) for row in self.cells) + "\n"


def _is_square(n: int) -> bool:
    return math.isqrt(n) ** 2 == n


def parse_grid(text: str, boxes=Boxes.AUTO, allow_single: bool = False) -> tuple[PuzzleSpec, Grid]:
    """Parse whitespace-separated rows; ``.`` or ``0`` marks a blank.

    ``allow_single`` admits a 1x1 grid (a lone oscillator, for simulation).
    """
    rows = [(lineno, line.split()) for lineno, line in enumerate(text.splitlines(), 1) if line.strip()]
    n = len(rows)
    if n < 1:
        raise PuzzleError("empty puzzle")
    cells = np.zeros((n, n), dtype=int)
    clues = []
    for r, (lineno, toks) in enumerate(rows):
        if len(toks) != n:
            raise PuzzleError(f"line {lineno}: expected {n} cells, found {len(toks)}")
        for c, tok in enumerate(toks):
            if tok in (".", "0"):
                continue
            if not tok.isdigit() or not 1 <= int(tok) <= n:
                raise PuzzleError(f"line {lineno}, column {c + 1}: bad cell {tok!r} (expected . or 1..{n})")
            cells[r, c] = int(tok)
            clues.append((r + 1, c + 1, int(tok)))
    if n < 2 and not allow_single:
        raise PuzzleError(f"line {rows[0][0]}: puzzle side must be >= 2, got {n}")
    return PuzzleSpec(n, tuple(clues), Boxes(boxes)), Grid(cells)


def constraint_graph(spec: PuzzleSpec) -> ConstraintGraph:
    n = spec.n
    b = math.isqrt(n) if spec.use_boxes else 0
    edges = []
    for a in range(n * n):
        ra, ca = divmod(a, n)
        for o in range(a + 1, n * n):
            ro, co = divmod(o, n)
            same_box = b and (ra // b == ro // b) and (ca // b == co // b)
            if ra == ro or ca == co or same_box:
                edges.append((a, o))
    return ConstraintGraph(n * n, tuple(edges))


def initial_voltages(spec: PuzzleSpec, p: CircuitParams, clue_base: float = 0.2, clue_step: float = 0.25) -> np.ndarray:
    """Capacitor start voltages: digit k maps to ``clue_base + (k-1)*clue_step``."""
    top = clue_base + (spec.n - 1) * clue_step
    if top > p.v_dd or clue_base < 0:
        raise PuzzleError(f"clue encoding spans up to {top:g} V, outside [0, v_dd={p.v_dd:g}]")
    v = np.zeros(spec.n_cells)
    for r, c, d in spec.clues:
        v[(r - 1) * spec.n + (c - 1)] = clue_base + (d - 1) * clue_step
    return v


def _units(spec: PuzzleSpec) -> list[list[int]]:
    n = spec.n
    units = [[r * n + c for c in range(n)] for r in range(n)]
    units += [[r * n + c for r in range(n)] for c in range(n)]
    if spec.use_boxes:
        b = math.isqrt(n)
        for br in range(0, n, b):
            for bc in range(0, n, b):
                units.append([(br + i) * n + bc + j for i in range(b) for j in range(b)])
    return units


def _peers(spec: PuzzleSpec) -> list[set[int]]:
    peers = [set() for _ in range(spec.n_cells)]
    for unit in _units(spec):
        for i in unit:
            peers[i].update(unit)
    for i, ps in enumerate(peers):
        ps.discard(i)
    return peers


def find_solutions(g: Grid, spec: PuzzleSpec, limit: int) -> list[Grid]:
    """Backtracking search for up to ``limit`` completions of ``g``.

    Uses row/column/box rules from ``spec`` only; nothing from the simulator.
    Clues in ``spec`` are imposed on top of the grid's own digits.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    n = spec.n
    flat = list(np.asarray(g.cells).ravel())
    for r, c, d in spec.clues:
        i = (r - 1) * n + (c - 1)
        if flat[i] and flat[i] != d:
            return []
        flat[i] = d
    peers = _peers(spec)
    for i, d in enumerate(flat):
        if d and any(flat[j] == d for j in peers[i]):
            return []

    found: list[Grid] = []
    digits = range(1, n + 1)

    def search() -> bool:
        best, best_cands = -1, None
        for i, d in enumerate(flat):
            if d:
                continue
            used = {flat[j] for j in peers[i]}
            cands = [k for k in digits if k not in used]
            if best_cands is None or len(cands) < len(best_cands):
                best, best_cands = i, cands
                if not cands:
                    return False
        if best_cands is None:
            found.append(Grid(np.array(flat).reshape(n, n)))
            return len(found) >= limit
        for k in best_cands:
            flat[best] = k
            if search():
                flat[best] = 0
                return True
        flat[best] = 0
        return False

    search()
    return found


def count_solutions(g: Grid, spec: PuzzleSpec, limit: int) -> int:
    return len(find_solutions(g, spec, limit))


def is_valid_solution(g: Grid, spec: PuzzleSpec) -> bool:
    cells = np.asarray(g.cells)
    n = spec.n
    if cells.shape != (n, n) or np.any(cells == 0):
        return False
    flat = cells.ravel()
    want = set(range(1, n + 1))
    for unit in _units(spec):
        if {int(flat[i]) for i in unit} != want:
            return False
    return all(cells[r - 1, c - 1] == d for r, c, d in spec.clues)


INSTANCE_A = PuzzleSpec(3, ((1, 1, 1), (2, 2, 3)), Boxes.OFF)
INSTANCE_B = PuzzleSpec(3, ((1, 1, 3), (2, 2, 1)), Boxes.OFF)
