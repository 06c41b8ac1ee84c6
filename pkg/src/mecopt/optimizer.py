"""Iterative in-context refinement over the assignment problem.

Each iteration renders the current prompt, asks the backend for candidate
allocations, discards anything infeasible (re-prompting with a diagnostic a
bounded number of times), evaluates what survives, and feeds the results
back into the observation window. A multi-start variant explores with a
pool of agents and continues only the most mutually distinct ones.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .assignment import encode_index, objective
from .llm_client import BackendError, CompletionRequest
from .netmodel import LatencyMatrix
from .prompting import (
    ObservationBuffer,
    ParseFailure,
    build_prompt,
    correction_text,
    parse_response,
)
from .solvers import Trajectory, TrajectoryRecorder

__all__ = [
    "LoopConfig",
    "MultiAgentConfig",
    "OptimizationAborted",
    "MultiAgentError",
    "AgentLoop",
    "optimize",
    "DiversitySelection",
    "trajectory_diversity",
    "AgentRun",
    "MultiAgentResult",
    "run_multi_agent",
    "run_manifest",
]


@dataclass(frozen=True)
class LoopConfig:
    """Single-agent loop settings.

    The threshold, when set, stops the loop as soon as the best-so-far
    latency drops below it; otherwise only the iteration cap stops it.
    The seed is carried for manifests; randomness lives in the backend.
    """

    max_iterations: int = 20
    latency_threshold_s: float | None = None
    candidates_per_iteration: int = 5
    reprompt_retries: int = 3
    nshot_capacity: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.latency_threshold_s is not None and not self.latency_threshold_s > 0:
            raise ValueError("latency_threshold_s must be > 0 when set")
        if self.candidates_per_iteration < 1:
            raise ValueError("candidates_per_iteration must be >= 1")
        if self.reprompt_retries < 0:
            raise ValueError("reprompt_retries cannot be negative")
        if self.nshot_capacity < 1:
            raise ValueError("nshot_capacity must be >= 1")


@dataclass(frozen=True)
class MultiAgentConfig:
    """Pool exploration settings: every agent runs the preliminary phase,
    then only the selected ones continue."""

    pool_size: int = 10
    preliminary_iterations: int = 5
    selected_agents: int = 3
    continuation_iterations: int = 15
    loop: LoopConfig = LoopConfig()

    def __post_init__(self) -> None:
        for name in ("pool_size", "preliminary_iterations", "selected_agents", "continuation_iterations"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.selected_agents > self.pool_size:
            raise ValueError("cannot select more agents than the pool holds")


class OptimizationAborted(RuntimeError):
    """A backend hard failure ended the run; the partial trajectory is kept."""

    def __init__(self, cause: BackendError, trajectory: Trajectory):
        super().__init__(f"optimization aborted: {cause}")
        self.cause = cause
        self.trajectory = trajectory


class MultiAgentError(RuntimeError):
    """Too few agents survived the preliminary phase to run a selection."""


class AgentLoop:
    """Resumable single-agent loop; run() may be called in phases."""

    def __init__(
        self,
        matrix: LatencyMatrix,
        backend,
        cfg: LoopConfig,
        request_template: CompletionRequest | None = None,
        method: str = "llm",
    ):
        self.matrix = matrix
        self.backend = backend
        self.cfg = cfg
        self.request_template = request_template
        self.buffer = ObservationBuffer(capacity=cfg.nshot_capacity)
        self.recorder = TrajectoryRecorder(method, matrix.num_servers, matrix.num_users)
        self.iteration = 0
        self.done = False

    def _request(self, prompt_text: str) -> CompletionRequest:
        if self.request_template is None:
            return CompletionRequest(user_text=prompt_text)
        return replace(self.request_template, user_text=prompt_text)

    def _threshold_met(self) -> bool:
        threshold = self.cfg.latency_threshold_s
        best = self.recorder.best
        return threshold is not None and best is not None and best[1] < threshold

    def run(self, iterations: int) -> None:
        """Advance the loop by up to `iterations` further iterations."""
        m, n = self.matrix.num_servers, self.matrix.num_users
        k = self.cfg.candidates_per_iteration
        for _ in range(iterations):
            if self.done:
                return
            self.iteration += 1
            prompt = build_prompt(self.matrix, self.buffer, k)
            prompt_text = prompt.text
            allocations = []
            for attempt in range(self.cfg.reprompt_retries + 1):
                try:
                    reply = self.backend.complete(self._request(prompt_text))
                except BackendError as exc:
                    raise OptimizationAborted(exc, self.trajectory()) from exc
                parsed = parse_response(reply, m, n, k)
                if isinstance(parsed, ParseFailure):
                    # Rejected replies still count the iteration; after the
                    # retry budget it simply records zero candidates.
                    prompt_text = prompt_text + correction_text(parsed, m, n, k)
                    continue
                allocations = parsed
                break
            evaluated = []
            for alloc in allocations:
                self.buffer.record(alloc, self.matrix, iteration_born=self.iteration)
                evaluated.append((encode_index(alloc), objective(alloc, self.matrix)))
            self.recorder.record_iteration(evaluated)
            if self._threshold_met():
                self.done = True

    def trajectory(self) -> Trajectory:
        return self.recorder.build()


def optimize(
    matrix: LatencyMatrix,
    backend,
    cfg: LoopConfig = LoopConfig(),
    request_template: CompletionRequest | None = None,
) -> Trajectory:
    """Run the full single-agent loop and return its trajectory.

    Raises OptimizationAborted on backend hard failure, with the partial
    trajectory attached.
    """
    loop = AgentLoop(matrix, backend, cfg, request_template=request_template)
    loop.run(cfg.max_iterations)
    return loop.trajectory()


@dataclass(frozen=True)
class DiversitySelection:
    """Chosen trajectory positions plus the max-min distance each pick had;
    the first pick is chosen by objective, so its distance is None."""

    indices: tuple[int, ...]
    distances: tuple[float | None, ...]


def _jaccard_distance(a: set[int], b: set[int]) -> float:
    union = a | b
    if not union:
        return 0.0
    return 1.0 - len(a & b) / len(union)


def trajectory_diversity(trajectories: list[Trajectory], k: int) -> DiversitySelection:
    """Greedy max-min selection of k mutually distinct trajectories.

    Distance is the Jaccard distance between visited allocation-index sets.
    The first pick is the best objective; later picks maximize the minimum
    distance to everything already picked, breaking ties by better
    objective and then by position.
    """
    if k > len(trajectories):
        raise ValueError(f"cannot select {k} from {len(trajectories)} trajectories")
    sets = [t.visited_indices() for t in trajectories]
    bests = [t.best_objective_s if t.best_objective_s is not None else math.inf for t in trajectories]

    first = min(range(len(trajectories)), key=lambda i: (bests[i], i))
    chosen = [first]
    distances: list[float | None] = [None]
    while len(chosen) < k:
        scored = []
        for i in range(len(trajectories)):
            if i in chosen:
                continue
            nearest = min(_jaccard_distance(sets[i], sets[j]) for j in chosen)
            scored.append((-nearest, bests[i], i))
        _, _, pick = min(scored)
        chosen.append(pick)
        distances.append(min(_jaccard_distance(sets[pick], sets[j]) for j in chosen[:-1]))
    return DiversitySelection(indices=tuple(chosen), distances=tuple(distances))


@dataclass(frozen=True)
class AgentRun:
    ordinal: int
    trajectory: Trajectory
    aborted: bool = False


@dataclass(frozen=True)
class MultiAgentResult:
    """Selected agents' trajectories plus the pool-wide best they found."""

    agents: tuple[AgentRun, ...]
    overall_best_index: int
    overall_best_objective_s: float
    selection: DiversitySelection
    failed_preliminary: tuple[int, ...]


def run_multi_agent(
    matrix: LatencyMatrix,
    cfg: MultiAgentConfig,
    backend_factory,
    request_template: CompletionRequest | None = None,
) -> MultiAgentResult:
    """Explore with a pool of agents, then continue the most distinct ones.

    backend_factory(ordinal) must return an independent backend per agent.
    Agents whose backend fails during the preliminary phase drop out of the
    pool; the selection needs at least cfg.selected_agents survivors.
    Failures during continuation keep the partial trajectory.
    """
    loops = [
        AgentLoop(matrix, backend_factory(i), cfg.loop, request_template=request_template)
        for i in range(cfg.pool_size)
    ]

    def run_phase(loop: AgentLoop, iterations: int) -> bool:
        try:
            loop.run(iterations)
            return True
        except OptimizationAborted:
            return False

    with ThreadPoolExecutor(max_workers=min(cfg.pool_size, 8)) as pool:
        prelim_ok = list(pool.map(lambda lp: run_phase(lp, cfg.preliminary_iterations), loops))
    survivors = [i for i, ok in enumerate(prelim_ok) if ok]
    failed = tuple(i for i, ok in enumerate(prelim_ok) if not ok)
    if len(survivors) < cfg.selected_agents:
        raise MultiAgentError(
            f"only {len(survivors)} agents survived the preliminary phase; "
            f"{cfg.selected_agents} needed"
        )

    selection = trajectory_diversity(
        [loops[i].trajectory() for i in survivors], cfg.selected_agents
    )
    selected = [survivors[pos] for pos in selection.indices]

    with ThreadPoolExecutor(max_workers=min(len(selected), 8)) as pool:
        cont_ok = list(
            pool.map(lambda i: run_phase(loops[i], cfg.continuation_iterations), selected)
        )

    agents = tuple(
        AgentRun(ordinal=i, trajectory=loops[i].trajectory(), aborted=not ok)
        for i, ok in zip(selected, cont_ok)
    )
    best_agent = min(
        (run for run in agents if run.trajectory.best is not None),
        key=lambda run: (run.trajectory.best_objective_s, run.ordinal),
        default=None,
    )
    if best_agent is None:
        raise MultiAgentError("no selected agent recorded a single feasible candidate")
    best_index, best_objective = best_agent.trajectory.best
    return MultiAgentResult(
        agents=agents,
        overall_best_index=best_index,
        overall_best_objective_s=best_objective,
        selection=selection,
        failed_preliminary=failed,
    )


def run_manifest(
    scenario_name: str,
    method: str,
    descriptor,
    loop_cfg: LoopConfig,
    multi_cfg: MultiAgentConfig | None = None,
    request: CompletionRequest | None = None,
) -> dict:
    """Everything needed to reproduce a stub-backed run, credentials excluded."""
    manifest = {
        "scenario": scenario_name,
        "method": method,
        "backend": descriptor.to_dict() if descriptor is not None else None,
        "loop": {
            "max_iterations": loop_cfg.max_iterations,
            "latency_threshold_s": loop_cfg.latency_threshold_s,
            "candidates_per_iteration": loop_cfg.candidates_per_iteration,
            "reprompt_retries": loop_cfg.reprompt_retries,
            "nshot_capacity": loop_cfg.nshot_capacity,
            "seed": loop_cfg.seed,
        },
    }
    if multi_cfg is not None:
        manifest["multi"] = {
            "pool_size": multi_cfg.pool_size,
            "preliminary_iterations": multi_cfg.preliminary_iterations,
            "selected_agents": multi_cfg.selected_agents,
            "continuation_iterations": multi_cfg.continuation_iterations,
        }
    if request is not None:
        manifest["request"] = {
            "model_id": request.model_id,
            "temperature": request.temperature,
            "max_output_tokens": request.max_output_tokens,
            "request_timeout_s": request.request_timeout_s,
        }
    return manifest
