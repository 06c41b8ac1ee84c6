"""Reference solvers for the bottleneck-assignment problem.

The exhaustive search is the ground-truth oracle every other method is
measured against; the genetic algorithm and uniform random search are the
reproducible baselines. All three emit the same Trajectory record so runs
can be compared, exported, and plotted uniformly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assignment import Allocation, Objective, decode_index, encode_index, objective
from .netmodel import LatencyMatrix

__all__ = [
    "DEFAULT_BRUTE_FORCE_CAP",
    "BruteForceBudgetError",
    "GAConfig",
    "IterationRecord",
    "Trajectory",
    "TrajectoryRecorder",
    "brute_force",
    "ga_run",
    "random_search",
    "trajectory_to_json_dict",
    "trajectory_from_json_dict",
    "save_trajectory_json",
    "load_trajectory_json",
    "trajectory_to_csv",
    "trajectory_from_csv",
    "read_trajectory",
]

DEFAULT_BRUTE_FORCE_CAP = 10_000_000

_CSV_COLUMNS = ("iteration", "candidate_rank", "allocation_index", "objective_s", "best_so_far_s")


class BruteForceBudgetError(ValueError):
    """Enumeration would exceed the configured evaluation budget."""


@dataclass(frozen=True)
class GAConfig:
    """Knobs of the genetic-algorithm baseline.

    mutation_rate=None resolves to 1/num_users at run time. Operators are
    the textbook set: tournament selection, per-user uniform crossover,
    per-user mutation to a uniformly random server, and elitism.
    """

    population_per_iter: int = 5
    iterations: int = 50
    mutation_rate: float | None = None
    tournament_size: int = 2
    elitism: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_per_iter < 2:
            raise ValueError("population_per_iter must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")
        if self.elitism < 0:
            raise ValueError("elitism cannot be negative")


@dataclass(frozen=True)
class IterationRecord:
    """Everything one iteration produced: the candidates it evaluated
    (allocation index, objective seconds) and the best seen so far."""

    iteration: int
    candidates: tuple[tuple[int, float], ...]
    best_so_far: tuple[int, float] | None


@dataclass
class Trajectory:
    """Ordered record of an optimization run."""

    method: str
    num_servers: int
    num_users: int
    records: list[IterationRecord]
    total_evaluations: int

    @property
    def best(self) -> tuple[int, float] | None:
        return self.records[-1].best_so_far if self.records else None

    @property
    def best_objective_s(self) -> float | None:
        return self.best[1] if self.best else None

    @property
    def best_index(self) -> int | None:
        return self.best[0] if self.best else None

    def visited_indices(self) -> set[int]:
        return {idx for rec in self.records for idx, _ in rec.candidates}

    def iterations_to_best(self) -> int | None:
        """First iteration whose running best equals the final best."""
        if self.best is None:
            return None
        final = self.best[1]
        for rec in self.records:
            if rec.best_so_far is not None and rec.best_so_far[1] == final:
                return rec.iteration
        return None


class TrajectoryRecorder:
    """Accumulates iteration records while tracking the running best under
    the objective tie-break order."""

    def __init__(self, method: str, num_servers: int, num_users: int):
        self.method = method
        self.num_servers = num_servers
        self.num_users = num_users
        self._records: list[IterationRecord] = []
        self._best_key: tuple | None = None
        self._best: tuple[int, float] | None = None
        self._best_objective: Objective | None = None
        self._evaluations = 0

    @property
    def best(self) -> tuple[int, float] | None:
        return self._best

    @property
    def best_objective(self) -> Objective | None:
        return self._best_objective

    def record_iteration(self, candidates: list[tuple[int, Objective]]) -> IterationRecord:
        entries = []
        for index, obj in candidates:
            key = obj.sort_key()
            if self._best_key is None or key < self._best_key:
                self._best_key = key
                self._best = (index, obj.max_latency_s)
                self._best_objective = obj
            entries.append((index, obj.max_latency_s))
        self._evaluations += len(entries)
        record = IterationRecord(
            iteration=len(self._records) + 1,
            candidates=tuple(entries),
            best_so_far=self._best,
        )
        self._records.append(record)
        return record

    def build(self) -> Trajectory:
        return Trajectory(
            method=self.method,
            num_servers=self.num_servers,
            num_users=self.num_users,
            records=list(self._records),
            total_evaluations=self._evaluations,
        )


def brute_force(
    matrix: LatencyMatrix, cap: int = DEFAULT_BRUTE_FORCE_CAP
) -> tuple[Allocation, Objective]:
    """Enumerate every allocation and return the global optimum.

    Ties resolve by the objective sort key, then by the smallest allocation
    index, so the result is deterministic. Refuses outright when M**N
    exceeds `cap` rather than running for hours.
    """
    m, n = matrix.num_servers, matrix.num_users
    total = m**n
    if total > cap:
        raise BruteForceBudgetError(
            f"exhaustive search needs {total} evaluations but the cap is {cap}; "
            f"pass cap>={total} to force it"
        )
    values = matrix.values
    powers = [m ** (n - 1 - u) for u in range(n)]
    best_key: tuple | None = None
    best_index = -1
    batch = 1 << 14
    for start in range(0, total, batch):
        stop = min(start + batch, total)
        indices = np.arange(start, stop, dtype=np.int64)
        digits = np.empty((stop - start, n), dtype=np.int64)
        for u in range(n):
            digits[:, u] = (indices // powers[u]) % m
        loads = np.zeros((stop - start, m))
        for i in range(m):
            loads[:, i] = ((digits == i) * values[i]).sum(axis=1)
        maxima = loads.max(axis=1)
        floor = float(maxima.min())
        # Vectorized sums may differ from the exact evaluator by a few ulps
        # (different add association), so shortlist within a tiny band and
        # let objective() make the exact call.
        slack = floor * 1e-12
        if best_key is not None and floor > best_key[0] + slack:
            continue
        for row in np.nonzero(maxima <= floor + slack)[0]:
            index = int(indices[row])
            obj = objective(decode_index(index, m, n), matrix)
            key = obj.sort_key()
            if best_key is None or key < best_key or (key == best_key and index < best_index):
                best_key = key
                best_index = index
    alloc = decode_index(best_index, m, n)
    return alloc, objective(alloc, matrix)


def _random_allocation(rng: np.random.Generator, num_servers: int, num_users: int) -> Allocation:
    return Allocation(tuple(int(s) for s in rng.integers(0, num_servers, size=num_users)), num_servers)


def ga_run(matrix: LatencyMatrix, cfg: GAConfig) -> Trajectory:
    """Run the genetic-algorithm baseline.

    Every generation evaluates exactly cfg.population_per_iter candidates,
    all feasible by construction, so a default run costs 5 x 50 = 250
    evaluations. Deterministic given cfg.seed.
    """
    m, n = matrix.num_servers, matrix.num_users
    rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / n
    rng = np.random.default_rng(cfg.seed)
    recorder = TrajectoryRecorder("ga", m, n)

    population = [_random_allocation(rng, m, n) for _ in range(cfg.population_per_iter)]
    for generation in range(cfg.iterations):
        scored = [(alloc, objective(alloc, matrix)) for alloc in population]
        recorder.record_iteration([(encode_index(a), obj) for a, obj in scored])
        if generation == cfg.iterations - 1:
            break

        ranked = sorted(range(len(scored)), key=lambda k: scored[k][1].sort_key())
        elites = [scored[k][0] for k in ranked[: cfg.elitism]]

        def tournament() -> Allocation:
            drawn = rng.integers(0, len(scored), size=cfg.tournament_size)
            winner = min(drawn, key=lambda k: scored[k][1].sort_key())
            return scored[int(winner)][0]

        children: list[Allocation] = []
        while len(elites) + len(children) < cfg.population_per_iter:
            mother, father = tournament(), tournament()
            take_mother = rng.random(n) < 0.5
            genes = [
                mother.servers[u] if take_mother[u] else father.servers[u] for u in range(n)
            ]
            mutate = rng.random(n) < rate
            for u in range(n):
                if mutate[u]:
                    genes[u] = int(rng.integers(0, m))
            children.append(Allocation(tuple(genes), m))
        population = (elites + children)[: cfg.population_per_iter]
    return recorder.build()


def random_search(
    matrix: LatencyMatrix, evaluations: int, seed: int = 0, exhaustive: bool = False
) -> Trajectory:
    """Uniform i.i.d. sampling baseline, one candidate per iteration.

    With exhaustive=True the run sweeps every allocation index in order
    instead of sampling, turning it into a slow but simple oracle.
    """
    m, n = matrix.num_servers, matrix.num_users
    if exhaustive:
        evaluations = m**n
    if evaluations < 1:
        raise ValueError("evaluations must be >= 1")
    rng = np.random.default_rng(seed)
    recorder = TrajectoryRecorder("random", m, n)
    for k in range(evaluations):
        if exhaustive:
            alloc = decode_index(k, m, n)
        else:
            alloc = _random_allocation(rng, m, n)
        recorder.record_iteration([(encode_index(alloc), objective(alloc, matrix))])
    return recorder.build()


# --- serialization ---------------------------------------------------------


def trajectory_to_json_dict(traj: Trajectory) -> dict:
    return {
        "method": traj.method,
        "num_servers": traj.num_servers,
        "num_users": traj.num_users,
        "total_evaluations": traj.total_evaluations,
        "iterations": [
            {
                "iteration": rec.iteration,
                "candidates": [
                    {"allocation_index": idx, "objective_s": obj} for idx, obj in rec.candidates
                ],
                "best_index": rec.best_so_far[0] if rec.best_so_far else None,
                "best_objective_s": rec.best_so_far[1] if rec.best_so_far else None,
            }
            for rec in traj.records
        ],
    }


def trajectory_from_json_dict(data: dict) -> Trajectory:
    records = []
    for item in data["iterations"]:
        best = None
        if item["best_index"] is not None:
            best = (int(item["best_index"]), float(item["best_objective_s"]))
        records.append(
            IterationRecord(
                iteration=int(item["iteration"]),
                candidates=tuple(
                    (int(c["allocation_index"]), float(c["objective_s"]))
                    for c in item["candidates"]
                ),
                best_so_far=best,
            )
        )
    return Trajectory(
        method=data["method"],
        num_servers=int(data["num_servers"]),
        num_users=int(data["num_users"]),
        records=records,
        total_evaluations=int(data["total_evaluations"]),
    )


def save_trajectory_json(traj: Trajectory, path) -> None:
    Path(path).write_text(json.dumps(trajectory_to_json_dict(traj), indent=2) + "\n")


def load_trajectory_json(path) -> Trajectory:
    return trajectory_from_json_dict(json.loads(Path(path).read_text()))


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """One row per candidate; iterations without candidates keep a
    placeholder row (rank 0) so the running best stays visible."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for rec in traj.records:
            best = repr(rec.best_so_far[1]) if rec.best_so_far else ""
            if rec.candidates:
                for rank, (idx, obj) in enumerate(rec.candidates, start=1):
                    writer.writerow([rec.iteration, rank, idx, repr(obj), best])
            else:
                writer.writerow([rec.iteration, 0, "", "", best])


def trajectory_from_csv(
    path, method: str = "unknown", num_servers: int = 0, num_users: int = 0
) -> Trajectory:
    """Rebuild a trajectory from its CSV form.

    The CSV carries no dimension metadata; pass num_servers/num_users when
    downstream consumers need them.
    """
    rows_by_iteration: dict[int, list[dict]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != _CSV_COLUMNS:
            raise ValueError(f"unexpected trajectory CSV header in {path}")
        for row in reader:
            rows_by_iteration.setdefault(int(row["iteration"]), []).append(row)
    records = []
    evaluations = 0
    for iteration in sorted(rows_by_iteration):
        rows = sorted(rows_by_iteration[iteration], key=lambda r: int(r["candidate_rank"]))
        candidates = tuple(
            (int(r["allocation_index"]), float(r["objective_s"]))
            for r in rows
            if int(r["candidate_rank"]) >= 1
        )
        evaluations += len(candidates)
        best_field = rows[-1]["best_so_far_s"]
        best = None
        if best_field != "":
            # The best index is recoverable whenever the best value matches a
            # candidate seen so far (first match wins); otherwise use -1.
            best_idx = None
            for rec_candidates in [rec.candidates for rec in records] + [candidates]:
                for idx, obj in rec_candidates:
                    if repr(obj) == best_field:
                        best_idx = idx
                        break
                if best_idx is not None:
                    break
            best = (best_idx if best_idx is not None else -1, float(best_field))
        records.append(IterationRecord(iteration=iteration, candidates=candidates, best_so_far=best))
    return Trajectory(
        method=method,
        num_servers=num_servers,
        num_users=num_users,
        records=records,
        total_evaluations=evaluations,
    )


def read_trajectory(path) -> Trajectory:
    """Load a trajectory from either serialized form, keyed on extension."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return load_trajectory_json(path)
    if path.suffix.lower() == ".csv":
        return trajectory_from_csv(path)
    raise ValueError(f"unsupported trajectory file type: {path}")
