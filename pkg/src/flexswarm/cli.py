"""Command line front end.

    flexswarm run SCENARIO --out DIR [--trajectory]
    flexswarm sweep SWEEPFILE --out DIR [--parallel K]

Exit codes: 0 success, 1 usage or parse error, 2 invariant violation,
3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .engine import ScenarioConfig, StepMetrics, simulate
from .errors import ConfigError, InvariantViolation
from .scenario import SweepSpec, load_scenario, parse_sweep, scenario_json, scenario_to_dict

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_IO = 0, 1, 2, 3

METRICS_COLUMNS = (
    "step", "bounding_cx", "bounding_cy", "bounding_r", "dist_to_goal",
    "tasks_satisfied", "tasks_active", "vis_edges", "eff_edges", "connected",
)
METRICS_HEADER = ",".join(METRICS_COLUMNS)
_COLUMN_TYPES = dict(
    step=int, bounding_cx=float, bounding_cy=float, bounding_r=float, dist_to_goal=float,
    tasks_satisfied=int, tasks_active=int, vis_edges=int, eff_edges=int,
    connected=lambda v: v == "true",
)

SUMMARY_COLUMNS = (
    "cell", "overrides", "seed", "status", "steps_run",
    "final_dist_to_goal", "time_to_goal", "mean_bounding_r", "metrics_file",
)


def _num(x: float) -> str:
    return repr(float(x))


def metrics_row(m: StepMetrics) -> str:
    c = m.bounding_circle
    return ",".join([
        str(m.step), _num(c.center[0]), _num(c.center[1]), _num(c.radius),
        _num(m.distance_to_goal), str(m.tasks_satisfied), str(m.tasks_active),
        str(m.visibility_edge_count), str(m.effective_edge_count),
        "true" if m.connected else "false",
    ])


def _preamble(config_json: str) -> str:
    return f"# flexswarm metrics\n# config: {config_json}\n{METRICS_HEADER}\n"


def write_run(config: ScenarioConfig, out_dir: Path, trajectory: bool = False) -> StepMetrics:
    """Run one scenario, streaming metrics.csv (and trajectory.jsonl) into
    ``out_dir``.  On an invariant violation the error is appended to the
    metrics file as a comment before re-raising."""
    out_dir.mkdir(parents=True, exist_ok=True)
    header = scenario_json(config)
    last = None
    traj = open(out_dir / "trajectory.jsonl", "w", newline="\n") if trajectory else None
    try:
        with open(out_dir / "metrics.csv", "w", newline="\n") as fh:
            fh.write(_preamble(header))
            if traj is not None:
                traj.write(json.dumps({"config": scenario_to_dict(config)}, separators=(",", ":")) + "\n")
            try:
                for state, m in simulate(config):
                    fh.write(metrics_row(m) + "\n")
                    if traj is not None:
                        rec = {"step": m.step, "positions": state.positions.tolist()}
                        traj.write(json.dumps(rec, separators=(",", ":")) + "\n")
                    last = m
            except InvariantViolation as exc:
                fh.write(f"# error: {exc}\n")
                raise
    finally:
        if traj is not None:
            traj.close()
    return last


def read_metrics(path) -> tuple[list[dict], str | None]:
    """Parse a metrics.csv back into rows (floats/ints) and its error note."""
    error = None
    lines = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# error: "):
                error = line[len("# error: "):].strip()
            elif not line.startswith("#"):
                lines.append(line)
    rows = []
    for rec in csv.DictReader(io.StringIO("".join(lines))):
        rows.append({k: _COLUMN_TYPES[k](v) for k, v in rec.items()})
    return rows, error


def summarize_metrics(path, visibility: float) -> dict:
    """Per-cell summary computed only from the metrics file."""
    rows, error = read_metrics(path)
    if not rows:
        return {"status": f"error: {error}" if error else "error: empty metrics",
                "steps_run": 0, "final_dist_to_goal": "", "time_to_goal": -1, "mean_bounding_r": ""}
    arrival = next((int(r["step"]) for r in rows if r["dist_to_goal"] < visibility), -1)
    return {
        "status": f"error: {error}" if error else "ok",
        "steps_run": int(rows[-1]["step"]),
        "final_dist_to_goal": _num(rows[-1]["dist_to_goal"]),
        "time_to_goal": arrival,
        "mean_bounding_r": _num(sum(r["bounding_r"] for r in rows) / len(rows)),
    }


def cell_dirname(index: int, overrides: dict, seed: int) -> str:
    parts = [f"{k}={v}" for k, v in overrides.items()]
    return "_".join([f"{index:04d}", *parts, f"seed={seed}"])


def _run_cell(args) -> tuple[int, str]:
    config, out_dir = args
    try:
        write_run(config, Path(out_dir))
        return EXIT_OK, ""
    except InvariantViolation as exc:
        return EXIT_INVARIANT, str(exc)
    except ConfigError as exc:
        # placement failures surface at init; keep a metrics file so the
        # summary stays derivable from the cell directory alone
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / "metrics.csv", "w", newline="\n") as fh:
            fh.write(_preamble(scenario_json(config)) + f"# error: {exc}\n")
        return EXIT_USAGE, str(exc)


def run_sweep(spec: SweepSpec, out_dir: Path, parallel: int = 1) -> int:
    out_dir = Path(out_dir)
    cells = []
    for index, (overrides, seed) in enumerate(spec.cells()):
        cfg = spec.cell_config(overrides, seed)
        cells.append((index, overrides, seed, cfg, out_dir / "cells" / cell_dirname(index, overrides, seed)))
    jobs = [(cfg, str(path)) for _, _, _, cfg, path in cells]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(job) for job in jobs]

    with open(out_dir / "summary.csv", "w", newline="\n") as fh:
        fh.write(f"# base: {scenario_json(spec.base)}\n")
        fh.write(f"# axes: {json.dumps([[n, list(v)] for n, v in spec.axes], separators=(',', ':'))}\n")
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for (index, overrides, seed, cfg, path), _ in zip(cells, results):
            s = summarize_metrics(path / "metrics.csv", cfg.influence.visibility)
            row = [
                str(index), json.dumps(overrides, separators=(",", ":")), str(seed), s["status"],
                str(s["steps_run"]), s["final_dist_to_goal"], str(s["time_to_goal"]),
                s["mean_bounding_r"], str((path / "metrics.csv").relative_to(out_dir)),
            ]
            buf = io.StringIO()
            csv.writer(buf, lineterminator="\n").writerow(row)
            fh.write(buf.getvalue())
    codes = {code for code, _ in results}
    for code in (EXIT_INVARIANT, EXIT_USAGE):
        if code in codes:
            return code
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flexswarm", description="Deterministic layered-rule swarm simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("scenario", type=Path)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--trajectory", action="store_true", help="also write trajectory.jsonl")

    sweep = sub.add_parser("sweep", help="run a parameter sweep")
    sweep.add_argument("sweepfile", type=Path)
    sweep.add_argument("--out", type=Path, required=True)
    sweep.add_argument("--parallel", type=int, default=1, metavar="K")
    return parser


def run_command(scenario: Path, out: Path, trajectory: bool = False) -> int:
    try:
        config = load_scenario(scenario)
    except ConfigError as exc:
        print(f"{scenario}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read {scenario}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    try:
        last = write_run(config, out, trajectory)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ConfigError as exc:
        print(f"{scenario}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    c = last.bounding_circle
    print(
        f"ok: {last.step} steps, bounding radius {c.radius:.4f} at ({c.center[0]:.4f}, {c.center[1]:.4f}), "
        f"distance to goal {last.distance_to_goal:.4f}, tasks satisfied "
        f"{last.tasks_satisfied}/{len(config.tasks)} -> {out / 'metrics.csv'}"
    )
    return EXIT_OK


def sweep_command(sweepfile: Path, out: Path, parallel: int = 1) -> int:
    try:
        spec = parse_sweep(sweepfile.read_text(), base_dir=sweepfile.parent)
    except ConfigError as exc:
        print(f"{sweepfile}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read {sweepfile}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    if parallel < 1:
        print("--parallel must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        out.mkdir(parents=True, exist_ok=True)
        code = run_sweep(spec, out, parallel)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    n_cells = sum(1 for _ in spec.cells())
    print(f"sweep finished: {n_cells} cells -> {out / 'summary.csv'} (exit {code})")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_command(args.scenario, args.out, args.trajectory)
    return sweep_command(args.sweepfile, args.out, args.parallel)


if __name__ == "__main__":
    sys.exit(main())
