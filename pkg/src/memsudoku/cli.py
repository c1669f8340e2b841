"""Command-line entry point: solve, simulate, oracle, check-params, sweep."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_device_only, simulate_puzzle, solve_puzzle
from .device import validate_params
from .engine import SimulationDiverged, StopMode
from .puzzle import Boxes, PuzzleError, PuzzleSpec, count_solutions, find_solutions, parse_grid

EXIT_OK, EXIT_UNSOLVED, EXIT_USAGE = 0, 1, 2
SWEEP_PARAMS = ("clue_base", "clue_step", "c_c", "jitter", "seed-range")


class UsageError(Exception):
    pass


def _load(args, allow_single: bool = False) -> tuple[PuzzleSpec, RunConfig]:
    try:
        rc = RunConfig.load(args.config)
        if getattr(args, "seed", None) is not None:
            rc = rc.replace(seed=args.seed)
        boxes = Boxes(args.boxes) if getattr(args, "boxes", None) else rc.boxes
        text = Path(args.puzzle).read_text()
        spec, _ = parse_grid(text, boxes, allow_single=allow_single)
    except OSError as exc:
        raise UsageError(f"cannot read puzzle: {exc}") from exc
    except (ConfigError, PuzzleError) as exc:
        raise UsageError(str(exc)) from exc
    return spec, rc


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def cmd_solve(args) -> int:
    spec, rc = _load(args)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    try:
        trace, rep = solve_puzzle(spec, rc)
    except PuzzleError as exc:
        raise UsageError(str(exc)) from exc
    except SimulationDiverged as exc:
        print(f"unsolved: {exc}")
        return EXIT_UNSOLVED
    _dump_json(rep.to_json_dict(), out / "solution.json")
    trace.write_events_csv(out / "events.csv")
    if rep.solved:
        rows = " / ".join(" ".join(map(str, row)) for row in rep.grid)
        print(f"solved after {rep.cycles_simulated} cycles: {rows}")
        return EXIT_OK
    print(f"unsolved ({rep.diagnostic}) after {rep.cycles_simulated} cycles: {rep.detail.get('message', '')}")
    return EXIT_UNSOLVED


def cmd_simulate(args) -> int:
    spec, rc = _load(args, allow_single=True)
    overrides = {"stop_mode": StopMode.HORIZON.value}
    if args.sample_every is not None:
        overrides["sample_every"] = args.sample_every
    try:
        rc = rc.replace(**overrides)
        trace = simulate_puzzle(spec, rc)
    except (ConfigError, PuzzleError) as exc:
        raise UsageError(str(exc)) from exc
    except SimulationDiverged as exc:
        print(f"diverged: {exc}")
        return EXIT_UNSOLVED
    out = Path(args.out or "trace.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    trace.write_samples_csv(out)
    print(f"{trace.steps} steps, {len(trace.sample_t)} samples, {len(trace.events)} events -> {out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        spec, grid = parse_grid(Path(args.puzzle).read_text(), args.boxes or Boxes.AUTO)
    except OSError as exc:
        raise UsageError(f"cannot read puzzle: {exc}") from exc
    except PuzzleError as exc:
        raise UsageError(str(exc)) from exc
    if args.limit < 1:
        raise UsageError("--limit must be >= 1")
    sols = find_solutions(grid, spec, args.limit)
    print(f"count: {len(sols)}" + ("+" if len(sols) == args.limit and args.limit > 1 else ""))
    if len(sols) == 1 and count_solutions(grid, spec, 2) == 1:
        print(sols[0].to_text().rstrip("\n"))
    return EXIT_OK if sols else EXIT_UNSOLVED


def cmd_check_params(args) -> int:
    if args.config is None:
        rc = RunConfig()
        device, r = rc.circuit.device, rc.circuit.r
    else:
        try:
            device, r = load_device_only(args.config)
        except ConfigError as exc:
            raise UsageError(str(exc)) from exc
    violations = validate_params(device, r)
    if violations:
        print(f"violations: {', '.join(violations)} (lrs={device.lrs:g}, r={r:g}, hrs={device.hrs:g})")
        return EXIT_UNSOLVED
    if args.config is not None:
        # remaining cross-field checks
        try:
            RunConfig.load(args.config)
        except ConfigError as exc:
            raise UsageError(str(exc)) from exc
    print(f"ok: lrs={device.lrs:g} < r={r:g} << hrs={device.hrs:g}")
    return EXIT_OK


def sweep_rows(param: str, lo: float, hi: float, steps: int, seeds: int, rc: RunConfig) -> list[tuple]:
    """(value, seed, config) per row in output order; configs are validated here."""
    if param not in SWEEP_PARAMS:
        raise UsageError(f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    if steps < 1 or seeds < 1:
        raise UsageError("--steps and --seeds must be >= 1")
    values = np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])
    rows = []
    try:
        if param == "seed-range":
            for v in dict.fromkeys(int(round(x)) for x in values):
                rows.append((v, v, rc.replace(seed=v)))
        else:
            for v in values:
                v = float(v)
                for k in range(seeds):
                    seed = rc.sim.seed + k
                    rows.append((v, seed, rc.replace(**{param: v, "seed": seed})))
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    return rows


def _sweep_one(spec: PuzzleSpec, rc: RunConfig) -> tuple[bool, int, str]:
    try:
        _, rep = solve_puzzle(spec, rc)
    except PuzzleError:
        return False, 0, "encoding-out-of-range"
    except SimulationDiverged:
        return False, 0, "diverged"
    return rep.solved, rep.cycles_simulated, rep.diagnostic or ""


def cmd_sweep(args) -> int:
    spec, rc = _load(args)
    rows = sweep_rows(args.param, args.lo, args.hi, args.steps, args.seeds, rc)
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if args.jobs == 1:
        results = [_sweep_one(spec, cfg) for _, _, cfg in rows]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            # map preserves submission order, so rows come back in (value, seed) order
            results = list(pool.map(_sweep_one, [spec] * len(rows), [cfg for _, _, cfg in rows]))
    out = Path(args.out or "sweep.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "value", "seed", "solved", "cycles", "diagnostic"])
        for (value, seed, _), (solved, cycles, diag) in zip(rows, results):
            w.writerow([args.param, repr(value), seed, str(solved).lower(), cycles, diag])
    n_ok = sum(r[0] for r in results)
    print(f"{n_ok}/{len(rows)} rows solved -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memsudoku", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--puzzle", required=True, help="grid file: rows of digits, '.' for blanks")
        p.add_argument("--config", help="JSON config (flat keys)")
        p.add_argument("--out", help=out_help)
        p.add_argument("--seed", type=int, help="override the jitter seed")
        p.add_argument("--boxes", choices=[b.value for b in Boxes])

    p = sub.add_parser("solve", help="simulate until the readout is stable")
    common(p, "output directory for solution.json and events.csv (default .)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run to t_end and dump output voltages")
    common(p, "voltage CSV path (default trace.csv)")
    p.add_argument("--sample-every", type=int, help="keep every k-th step (overrides config)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="count completions by backtracking")
    p.add_argument("--puzzle", required=True)
    p.add_argument("--boxes", choices=[b.value for b in Boxes])
    p.add_argument("--limit", type=int, default=2)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check-params", help="check LRS < R << HRS")
    p.add_argument("--config")
    p.set_defaults(func=cmd_check_params)

    p = sub.add_parser("sweep", help="solve over a range of one parameter")
    common(p, "CSV path (default sweep.csv)")
    p.add_argument("--param", required=True, help="one of " + ", ".join(SWEEP_PARAMS))
    p.add_argument("--from", dest="lo", type=float, required=True)
    p.add_argument("--to", dest="hi", type=float, required=True)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--seeds", type=int, default=1, help="seeds per value, counting up from the config seed")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
