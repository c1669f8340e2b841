"""Turn switching times into a digit grid.

Each cell's most recent SET marks its phase. The phases are split into n
groups at the largest gaps, and groups are mapped to digits through the
clues (unanchored groups take the leftover digits in time order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .device import Decision
from .engine import EventRecord, Trace
from .puzzle import Grid, PuzzleSpec, is_valid_solution

NOT_OSCILLATING = "not-oscillating"
INCOMPLETE_CYCLE = "incomplete-cycle"
UNBALANCED_GROUPING = "unbalanced-grouping"
CLUE_CONFLICT = "clue-conflict"
INVALID_SOLUTION = "invalid-solution"


class ReadoutError(Exception):
    def __init__(self, kind: str, message: str, **context):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.context = context


@dataclass(frozen=True)
class Clustering:
    cluster_of: np.ndarray
    cluster_mean_time: np.ndarray

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.cluster_of, minlength=len(self.cluster_mean_time))


def _events_of(trace_or_events) -> Iterable[EventRecord]:
    return trace_or_events.events if isinstance(trace_or_events, Trace) else trace_or_events


def last_cycle_events(trace_or_events, n_cells: int) -> np.ndarray:
    last = np.full(n_cells, np.nan)
    cell0 = []
    for e in _events_of(trace_or_events):
        if e.kind == Decision.SET:
            last[e.cell] = e.t
            if e.cell == 0:
                cell0.append(e.t)
    return _check_last_cycle(last, cell0)


def _check_last_cycle(last: np.ndarray, cell0_sets: list[float]) -> np.ndarray:
    missing = np.flatnonzero(np.isnan(last))
    if missing.size:
        cell = int(missing[0])
        raise ReadoutError(NOT_OSCILLATING, f"cell {cell} never switched on", cell=cell)
    if len(cell0_sets) >= 2:
        period = float(np.median(np.diff(cell0_sets)))
        spread = float(last.max() - last.min())
        if spread >= period:
            raise ReadoutError(
                INCOMPLETE_CYCLE,
                f"latest switching times spread over {spread:.6g} s, nominal period {period:.6g} s",
                spread=spread,
                period=period,
                times=last.tolist(),
            )
    return last


def gap_cluster(times, n_groups: int) -> Clustering:
    """Split 1-D times at the ``n_groups - 1`` widest positive gaps.

    Gaps equal to within 1e-9 of the total span count as ties and are cut
    earliest-first. Zero gaps are never cut, so coincident times always
    share a cluster (other clusters stay empty).
    """
    times = np.asarray(times, dtype=float)
    if n_groups < 1:
        raise ValueError("n_groups must be >= 1")
    order = np.argsort(times, kind="stable")
    sorted_t = times[order]
    gaps = np.diff(sorted_t)
    # rank on gaps relative to the span, rounded, so that an affine change of
    # time units cannot flip a tie through floating-point noise
    span = sorted_t[-1] - sorted_t[0] if times.size else 0.0
    rel = np.round(gaps / span, 9) if span > 0 else gaps
    # lexsort: primary key is the last one
    ranked = np.lexsort((np.arange(gaps.size), -rel))
    cuts = sorted(int(i) for i in ranked[: n_groups - 1] if gaps[i] > 0)
    labels_sorted = np.zeros(times.size, dtype=int)
    for c in cuts:
        labels_sorted[c + 1:] += 1
    cluster_of = np.empty(times.size, dtype=int)
    cluster_of[order] = labels_sorted
    means = np.full(n_groups, np.nan)
    for k in range(n_groups):
        members = sorted_t[labels_sorted == k]
        if members.size:
            means[k] = members.mean()
    return Clustering(cluster_of, means)


def assign_digits(cl: Clustering, spec: PuzzleSpec) -> Grid:
    n = spec.n
    sizes = cl.sizes
    if len(sizes) != n or np.any(sizes != n):
        raise ReadoutError(
            UNBALANCED_GROUPING,
            f"cluster sizes {sizes.tolist()}, expected {n} clusters of {n}",
            sizes=sizes.tolist(),
            cluster_times=cl.cluster_mean_time.tolist(),
        )
    digit_of = [0] * n
    for r, c, d in spec.clues:
        k = int(cl.cluster_of[(r - 1) * n + (c - 1)])
        if digit_of[k] and digit_of[k] != d:
            raise ReadoutError(CLUE_CONFLICT, f"clues {digit_of[k]} and {d} fall in cluster {k}", cluster=k)
        digit_of[k] = d
    claimed = [d for d in digit_of if d]
    if len(set(claimed)) != len(claimed):
        raise ReadoutError(CLUE_CONFLICT, f"digit claimed by two clusters: {digit_of}", digits=digit_of)
    free = iter(sorted(set(range(1, n + 1)) - set(claimed)))
    digit_of = [d or next(free) for d in digit_of]
    cells = np.array([digit_of[k] for k in cl.cluster_of]).reshape(n, n)
    return Grid(cells)


def solve(trace_or_events, spec: PuzzleSpec) -> Grid:
    """Full readout; raises :class:`ReadoutError` with context on failure."""
    times = last_cycle_events(trace_or_events, spec.n_cells)
    return grid_from_times(times, spec)


def grid_from_times(times: np.ndarray, spec: PuzzleSpec) -> Grid:
    cl = gap_cluster(times, spec.n)
    grid = assign_digits(cl, spec)
    if not is_valid_solution(grid, spec):
        raise ReadoutError(
            INVALID_SOLUTION,
            "grouping does not form a valid solution",
            grid=grid.tolist(),
            cluster_times=cl.cluster_mean_time.tolist(),
        )
    return grid


class ReadoutTracker:
    """Incremental readout for use as an engine hook.

    Consumes only the events appended since the previous call and returns
    the current grid as a tuple of tuples, or ``None`` if readout fails.
    """

    def __init__(self, spec: PuzzleSpec):
        self.spec = spec
        self.last = np.full(spec.n_cells, np.nan)
        self.cell0: list[float] = []
        self._seen = 0

    def __call__(self, events: list[EventRecord]):
        for e in events[self._seen:]:
            if e.kind == Decision.SET:
                self.last[e.cell] = e.t
                if e.cell == 0:
                    self.cell0.append(e.t)
        self._seen = len(events)
        try:
            times = _check_last_cycle(self.last, self.cell0)
            return tuple(map(tuple, grid_from_times(times, self.spec).tolist()))
        except ReadoutError:
            return None


@dataclass
class SolveReport:
    solved: bool
    grid: Optional[list[list[int]]]
    cluster_times_s: list[float]
    diagnostic: Optional[str]
    cycles_simulated: int
    detail: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "solved": self.solved,
            "grid": self.grid,
            "cluster_times_s": self.cluster_times_s,
            "diagnostic": self.diagnostic,
            "cycles_simulated": self.cycles_simulated,
        }


def report(trace: Trace, spec: PuzzleSpec) -> SolveReport:
    cluster_times: list[float] = []
    try:
        times = last_cycle_events(trace, spec.n_cells)
        cluster_times = gap_cluster(times, spec.n).cluster_mean_time.tolist()
        grid = grid_from_times(times, spec)
    except ReadoutError as exc:
        return SolveReport(
            solved=False,
            grid=exc.context.get("grid"),
            cluster_times_s=[t for t in cluster_times if t == t],
            diagnostic=exc.kind,
            cycles_simulated=trace.cycles,
            detail={"message": str(exc), **exc.context},
        )
    return SolveReport(True, grid.tolist(), cluster_times, None, trace.cycles)
