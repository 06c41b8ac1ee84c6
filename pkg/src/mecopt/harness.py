"""Command-line experiment runner.

Verbs: `gen` writes scenario files, `solve` runs one method on a scenario
and exports its trajectory and summary, `compare` aggregates repeated
trials into an optimal-rate table, and `plot` renders trajectories into a
deterministic SVG (best-so-far curves plus an allocation-index strip per
run). Exit codes: 0 success, 2 usage or input error, 3 backend failure
(partial outputs are still written and flagged).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .assignment import encode_index
from .llm_client import BackendDescriptor, BackendError, CompletionRequest, create_backend
from .netmodel import (
    SimulationParams,
    load_scenario,
    save_scenario,
    scenario_from_matrix,
    scenario_from_physical,
)
from .optimizer import (
    LoopConfig,
    MultiAgentConfig,
    MultiAgentError,
    OptimizationAborted,
    optimize,
    run_manifest,
    run_multi_agent,
)
from .solvers import (
    GAConfig,
    Trajectory,
    TrajectoryRecorder,
    brute_force,
    ga_run,
    random_search,
    read_trajectory,
    save_trajectory_json,
    trajectory_to_csv,
)

__all__ = [
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_BACKEND",
    "RunSummary",
    "render_trajectories_svg",
    "write_comparison_csv",
    "read_comparison_csv",
    "main",
    "cli",
]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BACKEND = 3

METHODS = ("brute", "ga", "llm", "multi", "random")

# A trial counts as optimal when its best matches the oracle this closely;
# sums of doubles need a hair of slack.
OPTIMAL_ATOL = 1e-12


@dataclass
class RunSummary:
    """Flat record of one run, written as summary.json."""

    scenario: str
    method: str
    best_objective_s: float | None
    best_allocation_index: int | None
    optimum_s: float | None
    optimality_gap_s: float | None
    iterations_to_best: int | None
    total_evaluations: int
    wall_time_s: float
    aborted: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "method": self.method,
            "best_objective_s": self.best_objective_s,
            "best_allocation_index": self.best_allocation_index,
            "optimum_s": self.optimum_s,
            "optimality_gap_s": self.optimality_gap_s,
            "iterations_to_best": self.iterations_to_best,
            "total_evaluations": self.total_evaluations,
            "wall_time_s": self.wall_time_s,
            "aborted": self.aborted,
            "error": self.error,
        }


def _summarize(
    scenario_name: str,
    method: str,
    traj: Trajectory,
    optimum_s: float | None,
    wall_time_s: float,
    aborted: bool = False,
    error: str | None = None,
) -> RunSummary:
    best = traj.best
    gap = None
    if best is not None and optimum_s is not None:
        gap = best[1] - optimum_s
    return RunSummary(
        scenario=scenario_name,
        method=method,
        best_objective_s=best[1] if best else None,
        best_allocation_index=best[0] if best else None,
        optimum_s=optimum_s,
        optimality_gap_s=gap,
        iterations_to_best=traj.iterations_to_best(),
        total_evaluations=traj.total_evaluations,
        wall_time_s=wall_time_s,
        aborted=aborted,
        error=error,
    )


def _oracle_optimum(matrix, cap: int) -> float | None:
    if matrix.num_servers**matrix.num_users > cap:
        return None
    _, obj = brute_force(matrix, cap=cap)
    return obj.max_latency_s


# --- backend and config assembly -------------------------------------------


def _descriptor_from_args(args, seed: int) -> BackendDescriptor:
    if args.backend == "live":
        if not args.endpoint:
            raise ValueError("--endpoint is required for the live backend")
        return BackendDescriptor(
            kind="live", endpoint=args.endpoint, credential_env=args.credential_env
        )
    if args.backend == "scripted":
        if not args.script:
            raise ValueError("--script is required for the scripted backend")
        return BackendDescriptor(kind="scripted", script_path=args.script)
    return BackendDescriptor(kind="heuristic", seed=seed)


def _loop_config_from_args(args, seed: int) -> LoopConfig:
    return LoopConfig(
        max_iterations=args.max_iters,
        latency_threshold_s=args.threshold_s,
        candidates_per_iteration=args.candidates,
        reprompt_retries=args.retries,
        nshot_capacity=args.nshot,
        seed=seed,
    )


def _ga_config_from_args(args, seed: int) -> GAConfig:
    return GAConfig(
        population_per_iter=args.pop,
        iterations=args.ga_iters,
        mutation_rate=args.mutation_rate,
        tournament_size=args.tournament,
        elitism=args.elitism,
        seed=seed,
    )


def _request_from_args(args) -> CompletionRequest:
    return CompletionRequest(
        user_text="(pending)",
        model_id=args.model,
        temperature=args.temperature,
        max_output_tokens=args.max_tokens,
        request_timeout_s=args.timeout_s,
    )


def _brute_trajectory(matrix, cap: int) -> Trajectory:
    alloc, obj = brute_force(matrix, cap=cap)
    recorder = TrajectoryRecorder("brute", matrix.num_servers, matrix.num_users)
    recorder.record_iteration([(encode_index(alloc), obj)])
    traj = recorder.build()
    traj.total_evaluations = matrix.num_servers**matrix.num_users
    return traj


def _run_single_method(matrix, method: str, args, seed: int):
    """Run one non-multi method; returns (trajectory, aborted_exception)."""
    if method == "brute":
        return _brute_trajectory(matrix, args.cap), None
    if method == "ga":
        return ga_run(matrix, _ga_config_from_args(args, seed)), None
    if method == "random":
        return random_search(matrix, args.evaluations, seed=seed, exhaustive=args.exhaustive), None
    if method == "llm":
        backend = create_backend(_descriptor_from_args(args, seed))
        try:
            traj = optimize(
                matrix,
                backend,
                _loop_config_from_args(args, seed),
                request_template=_request_from_args(args),
            )
            return traj, None
        except OptimizationAborted as exc:
            return exc.trajectory, exc
    raise ValueError(f"unknown method {method!r}")


# --- commands ---------------------------------------------------------------


def _read_matrix_file(path: Path):
    if path.suffix.lower() == ".json":
        return json.loads(path.read_text())
    rows = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append([float(tok) for tok in line.split()])
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError(f"matrix file {path} is empty or ragged")
    return rows


def cmd_gen(args) -> int:
    out = Path(args.out)
    name = args.name or out.stem
    if args.matrix_file:
        scenario = scenario_from_matrix(_read_matrix_file(Path(args.matrix_file)), name)
    else:
        if args.M is None or args.N is None:
            raise ValueError("either --matrix-file or both --M and --N are required")
        params = SimulationParams(
            bandwidth_hz=args.bandwidth_hz,
            ap_tx_power_w=args.ap_power_w,
            user_tx_power_w=args.user_power_w,
            path_loss_exponent=args.path_loss_exp,
            noise_power_dbm=args.noise_dbm,
            mec_cpu_cycles_per_s=args.mec_rate,
            tx_data_bits=args.tx_bits,
            rx_data_bits=args.rx_bits,
            cycles_per_bit_coeff=args.cycles_per_bit,
            area_side_m=args.area_m,
            fading=args.fading,
        )
        scenario = scenario_from_physical(params, args.M, args.N, args.seed, name)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(scenario, out)
    matrix = scenario.resolve_matrix()
    print(f"wrote scenario '{name}' ({matrix.num_servers}x{matrix.num_users}) to {out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    matrix = scenario.resolve_matrix()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    optimum = None if args.method == "brute" else _oracle_optimum(matrix, args.oracle_cap)

    started = time.perf_counter()
    aborted_exc: Exception | None = None

    if args.method == "multi":
        loop_cfg = _loop_config_from_args(args, args.seed)
        multi_cfg = MultiAgentConfig(
            pool_size=args.pool,
            preliminary_iterations=args.prelim_iters,
            selected_agents=args.select,
            continuation_iterations=args.cont_iters,
            loop=loop_cfg,
        )

        def factory(ordinal: int):
            if args.backend == "heuristic":
                return create_backend(
                    BackendDescriptor(kind="heuristic", seed=args.seed + 1 + ordinal)
                )
            return create_backend(_descriptor_from_args(args, args.seed + 1 + ordinal))

        try:
            result = run_multi_agent(
                matrix, multi_cfg, factory, request_template=_request_from_args(args)
            )
        except MultiAgentError as exc:
            print(f"multi-agent run failed: {exc}", file=sys.stderr)
            return EXIT_BACKEND
        wall = time.perf_counter() - started

        total_evals = 0
        best_iteration = None
        for run in result.agents:
            stem = f"trajectory_agent{run.ordinal}"
            save_trajectory_json(run.trajectory, out_dir / f"{stem}.json")
            trajectory_to_csv(run.trajectory, out_dir / f"{stem}.csv")
            total_evals += run.trajectory.total_evaluations
            if (
                run.trajectory.best is not None
                and run.trajectory.best[1] == result.overall_best_objective_s
            ):
                its = run.trajectory.iterations_to_best()
                if its is not None and (best_iteration is None or its < best_iteration):
                    best_iteration = its
        summary = RunSummary(
            scenario=scenario.name,
            method="multi",
            best_objective_s=result.overall_best_objective_s,
            best_allocation_index=result.overall_best_index,
            optimum_s=optimum,
            optimality_gap_s=(
                result.overall_best_objective_s - optimum if optimum is not None else None
            ),
            iterations_to_best=best_iteration,
            total_evaluations=total_evals,
            wall_time_s=wall,
            aborted=any(run.aborted for run in result.agents),
        )
        manifest = run_manifest(
            scenario.name,
            "multi",
            _descriptor_from_args(args, args.seed),
            loop_cfg,
            multi_cfg=multi_cfg,
            request=_request_from_args(args),
        )
        # agents use seeds agent_seed_base + 1 + ordinal
        manifest["agent_seed_base"] = args.seed
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    else:
        traj, aborted_exc = _run_single_method(matrix, args.method, args, args.seed)
        wall = time.perf_counter() - started
        if args.method == "brute":
            optimum = traj.best[1] if traj.best else None
        save_trajectory_json(traj, out_dir / "trajectory.json")
        trajectory_to_csv(traj, out_dir / "trajectory.csv")
        summary = _summarize(
            scenario.name,
            args.method,
            traj,
            optimum,
            wall,
            aborted=aborted_exc is not None,
            error=str(aborted_exc.cause) if aborted_exc is not None else None,
        )
        if args.method == "llm":
            manifest = run_manifest(
                scenario.name,
                "llm",
                _descriptor_from_args(args, args.seed),
                _loop_config_from_args(args, args.seed),
                request=_request_from_args(args),
            )
            (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    (out_dir / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
    best_text = (
        f"{summary.best_objective_s:.6f}s" if summary.best_objective_s is not None else "n/a"
    )
    print(
        f"[{summary.method}] scenario={summary.scenario} best={best_text} "
        f"evaluations={summary.total_evaluations} -> {out_dir}"
    )
    if summary.aborted:
        print(f"warning: run aborted early ({summary.error}); outputs are partial", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


_COMPARISON_COLUMNS = (
    "method",
    "trial",
    "seed",
    "best_s",
    "optimum_s",
    "gap_s",
    "optimal",
    "iterations_to_best",
    "total_evaluations",
    "wall_time_s",
)


def write_comparison_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COMPARISON_COLUMNS)
        for row in rows:
            writer.writerow([row[col] for col in _COMPARISON_COLUMNS])


def read_comparison_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != _COMPARISON_COLUMNS:
            raise ValueError(f"unexpected comparison CSV header in {path}")
        return list(reader)


def cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    matrix = scenario.resolve_matrix()
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS or m == "multi"]
    if not methods or unknown:
        raise ValueError(f"--methods must name solvers among brute/ga/llm/random, got {unknown}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    _, oracle_obj = brute_force(matrix, cap=args.oracle_cap)
    optimum = oracle_obj.max_latency_s

    rows: list[dict] = []
    backend_failed = False
    for method in methods:
        for trial in range(args.trials):
            seed = args.seed + trial
            started = time.perf_counter()
            traj, aborted = _run_single_method(matrix, method, args, seed)
            wall = time.perf_counter() - started
            best = traj.best
            rows.append(
                {
                    "method": method,
                    "trial": trial,
                    "seed": seed,
                    "best_s": repr(best[1]) if best else "",
                    "optimum_s": repr(optimum),
                    "gap_s": repr(best[1] - optimum) if best else "",
                    "optimal": int(best is not None and best[1] - optimum <= OPTIMAL_ATOL),
                    "iterations_to_best": (
                        traj.iterations_to_best() if traj.iterations_to_best() is not None else ""
                    ),
                    "total_evaluations": traj.total_evaluations,
                    "wall_time_s": f"{wall:.6f}",
                }
            )
            if aborted is not None:
                backend_failed = True
                break
        if backend_failed:
            break

    write_comparison_csv(rows, out_dir / "comparison.csv")
    aggregates = {}
    for method in methods:
        method_rows = [r for r in rows if r["method"] == method]
        if not method_rows:
            continue
        iter_values = [int(r["iterations_to_best"]) for r in method_rows if r["iterations_to_best"] != ""]
        aggregates[method] = {
            "trials": len(method_rows),
            "optimal_rate": sum(r["optimal"] for r in method_rows) / len(method_rows),
            "mean_best_s": sum(float(r["best_s"]) for r in method_rows if r["best_s"]) / len(method_rows),
            "mean_iterations_to_best": (
                sum(iter_values) / len(iter_values) if iter_values else None
            ),
        }
    report = {
        "scenario": scenario.name,
        "optimum_s": optimum,
        "trials_per_method": args.trials,
        "methods": aggregates,
        "partial": backend_failed,
    }
    (out_dir / "comparison.json").write_text(json.dumps(report, indent=2) + "\n")
    for method, agg in aggregates.items():
        print(
            f"[{method}] optimal-rate {agg['optimal_rate']:.3f} over {agg['trials']} trials, "
            f"mean best {agg['mean_best_s']:.6f}s"
        )
    if backend_failed:
        print("warning: comparison stopped early on a backend failure", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


# --- SVG rendering -----------------------------------------------------------

_PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
)


def _strip_color(index: int, span: int) -> str:
    hue = 330.0 * index / max(span - 1, 1)
    return f"hsl({hue:.1f}, 70%, 45%)"


def _iteration_best_candidate(record) -> int | None:
    if not record.candidates:
        return None
    best = min(record.candidates, key=lambda c: c[1])
    return best[0]


def render_trajectories_svg(series: list[tuple[str, Trajectory]]) -> str:
    """Render best-so-far curves and per-run allocation-index strips.

    Pure function of its inputs: identical series yield byte-identical SVG,
    so plots can be diffed and golden-tested.
    """
    series = [(label, traj) for label, traj in series]
    drawable = [(label, t) for label, t in series if t.records]
    width = 880
    chart_x0, chart_x1 = 70, 850
    chart_y0, chart_y1 = 30, 290
    strip_h, strip_gap = 18, 10
    strips_y0 = chart_y1 + 60
    height = strips_y0 + len(series) * (strip_h + strip_gap) + 30

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if not drawable:
        out.append(
            f'<text x="{width / 2:.1f}" y="{height / 2:.1f}" text-anchor="middle" '
            f'fill="#888888">no trajectory data</text>'
        )
        out.append("</svg>")
        return "\n".join(out) + "\n"

    max_iter = max(t.records[-1].iteration for _, t in drawable)
    bests = [
        rec.best_so_far[1]
        for _, t in drawable
        for rec in t.records
        if rec.best_so_far is not None
    ]
    y_lo, y_hi = min(bests), max(bests)
    if y_lo == y_hi:
        # Latencies are strictly positive, so a flat line still gets a band.
        y_lo, y_hi = y_lo * 0.9, y_hi * 1.1
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def x_of(iteration: float) -> float:
        if max_iter == 1:
            return (chart_x0 + chart_x1) / 2
        return chart_x0 + (iteration - 1) / (max_iter - 1) * (chart_x1 - chart_x0)

    def y_of(value: float) -> float:
        return chart_y1 - (value - y_lo) / (y_hi - y_lo) * (chart_y1 - chart_y0)

    # axes
    out.append(
        f'<line x1="{chart_x0}" y1="{chart_y1}" x2="{chart_x1}" y2="{chart_y1}" stroke="black"/>'
    )
    out.append(
        f'<line x1="{chart_x0}" y1="{chart_y0}" x2="{chart_x0}" y2="{chart_y1}" stroke="black"/>'
    )
    for tick in range(5):
        value = y_lo + tick / 4 * (y_hi - y_lo)
        y = y_of(value)
        out.append(f'<line x1="{chart_x0 - 4}" y1="{y:.2f}" x2="{chart_x0}" y2="{y:.2f}" stroke="black"/>')
        out.append(
            f'<text x="{chart_x0 - 8}" y="{y + 4:.2f}" text-anchor="end">{value:.3f}</text>'
        )
    x_step = max(1, (max_iter + 7) // 8)
    for iteration in range(1, max_iter + 1, x_step):
        x = x_of(iteration)
        out.append(
            f'<line x1="{x:.2f}" y1="{chart_y1}" x2="{x:.2f}" y2="{chart_y1 + 4}" stroke="black"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{chart_y1 + 18}" text-anchor="middle">{iteration}</text>'
        )
    out.append(
        f'<text x="{(chart_x0 + chart_x1) / 2:.1f}" y="{chart_y1 + 36}" '
        f'text-anchor="middle">iteration</text>'
    )
    out.append(
        f'<text x="16" y="{(chart_y0 + chart_y1) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(chart_y0 + chart_y1) / 2:.1f})">best max latency (s)</text>'
    )

    # best-so-far lines and legend
    for pos, (label, traj) in enumerate(drawable):
        color = _PALETTE[pos % len(_PALETTE)]
        points = [
            f"{x_of(rec.iteration):.2f},{y_of(rec.best_so_far[1]):.2f}"
            for rec in traj.records
            if rec.best_so_far is not None
        ]
        if points:
            out.append(
                f'<polyline points="{" ".join(points)}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        legend_y = chart_y0 + 14 * pos
        out.append(
            f'<line x1="{chart_x1 - 170}" y1="{legend_y}" x2="{chart_x1 - 150}" '
            f'y2="{legend_y}" stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{chart_x1 - 144}" y="{legend_y + 4}">{label}</text>')

    # allocation-index strips
    for pos, (label, traj) in enumerate(series):
        top = strips_y0 + pos * (strip_h + strip_gap)
        out.append(f'<text x="{chart_x0 - 8}" y="{top + strip_h - 5}" text-anchor="end">{label}</text>')
        if not traj.records:
            continue
        span = (
            traj.num_servers**traj.num_users
            if traj.num_servers >= 1 and traj.num_users >= 1
            else max(traj.visited_indices(), default=0) + 1
        )
        cell = (chart_x1 - chart_x0) / max_iter
        for rec in traj.records:
            index = _iteration_best_candidate(rec)
            fill = "#dddddd" if index is None else _strip_color(index, span)
            x = chart_x0 + (rec.iteration - 1) * cell
            out.append(
                f'<rect x="{x:.2f}" y="{top}" width="{cell:.2f}" height="{strip_h}" fill="{fill}"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_plot(args) -> int:
    series = []
    for path_text in args.trajectories:
        path = Path(path_text)
        traj = read_trajectory(path)
        if not traj.records:
            print(f"warning: {path} holds an empty trajectory", file=sys.stderr)
        series.append((f"{path.stem}:{traj.method}", traj))
    svg = render_trajectories_svg(series)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(f"wrote {out}")
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------


def _add_method_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="base seed for stochastic methods")
    parser.add_argument("--cap", type=int, default=10_000_000, help="brute-force enumeration cap")
    parser.add_argument(
        "--oracle-cap",
        type=int,
        default=1_000_000,
        help="skip the optimality oracle when M**N exceeds this",
    )
    # GA
    parser.add_argument("--ga-iters", type=int, default=50)
    parser.add_argument("--pop", type=int, default=5)
    parser.add_argument("--mutation-rate", type=float, default=None)
    parser.add_argument("--tournament", type=int, default=2)
    parser.add_argument("--elitism", type=int, default=1)
    # random search
    parser.add_argument("--evaluations", type=int, default=250)
    parser.add_argument("--exhaustive", action="store_true")
    # LLM loop
    parser.add_argument("--backend", choices=("heuristic", "scripted", "live"), default="heuristic")
    parser.add_argument("--script", default="", help="reply script for the scripted backend")
    parser.add_argument("--endpoint", default="", help="base URL of a chat-completions server")
    parser.add_argument("--model", default="gpt-4o-mini")
    parser.add_argument("--temperature", type=float, default=1.0)
    parser.add_argument("--max-tokens", type=int, default=None)
    parser.add_argument("--timeout-s", type=float, default=60.0)
    parser.add_argument(
        "--credential-env",
        default="OPENAI_API_KEY",
        help="environment variable holding the live-backend credential",
    )
    parser.add_argument("--max-iters", type=int, default=20)
    parser.add_argument("--candidates", type=int, default=5)
    parser.add_argument("--nshot", type=int, default=20)
    parser.add_argument("--threshold-s", type=float, default=None)
    parser.add_argument("--retries", type=int, default=3)
    # multi-agent
    parser.add_argument("--pool", type=int, default=10)
    parser.add_argument("--prelim-iters", type=int, default=5)
    parser.add_argument("--select", type=int, default=3)
    parser.add_argument("--cont-iters", type=int, default=15)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mecopt",
        description="Min-max latency task allocation: scenario generation, solvers, comparisons, plots.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    defaults = SimulationParams()
    gen = sub.add_parser("gen", help="write a scenario file")
    gen.add_argument("--out", required=True)
    gen.add_argument("--name", default="")
    gen.add_argument("--matrix-file", default="", help="embed a literal latency matrix")
    gen.add_argument("--M", type=int, default=None, help="number of servers")
    gen.add_argument("--N", type=int, default=None, help="number of users")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--bandwidth-hz", type=float, default=defaults.bandwidth_hz)
    gen.add_argument("--ap-power-w", type=float, default=defaults.ap_tx_power_w)
    gen.add_argument("--user-power-w", type=float, default=defaults.user_tx_power_w)
    gen.add_argument("--path-loss-exp", type=float, default=defaults.path_loss_exponent)
    gen.add_argument("--noise-dbm", type=float, default=defaults.noise_power_dbm)
    gen.add_argument("--mec-rate", type=float, default=defaults.mec_cpu_cycles_per_s)
    gen.add_argument("--tx-bits", type=float, default=defaults.tx_data_bits)
    gen.add_argument("--rx-bits", type=float, default=defaults.rx_data_bits)
    gen.add_argument("--cycles-per-bit", type=float, default=defaults.cycles_per_bit_coeff)
    gen.add_argument("--area-m", type=float, default=defaults.area_side_m)
    gen.add_argument("--fading", action="store_true")
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="run one method on a scenario")
    solve.add_argument("--scenario", required=True)
    solve.add_argument("--method", choices=METHODS, required=True)
    solve.add_argument("--out-dir", default="runs/latest")
    _add_method_flags(solve)
    solve.set_defaults(func=cmd_solve)

    compare = sub.add_parser("compare", help="repeat methods over trials and aggregate")
    compare.add_argument("--scenario", required=True)
    compare.add_argument("--methods", required=True, help="comma-separated: brute,ga,llm,random")
    compare.add_argument("--trials", type=int, default=10)
    compare.add_argument("--out-dir", default="runs/compare")
    _add_method_flags(compare)
    compare.set_defaults(func=cmd_compare)

    plot = sub.add_parser("plot", help="render trajectories to SVG")
    plot.add_argument("trajectories", nargs="+", help="trajectory .json or .csv files")
    plot.add_argument("--out", required=True)
    plot.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


def cli() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    cli()
