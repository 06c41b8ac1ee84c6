import json

import pytest

from mecopt.assignment import decode_index
from mecopt.llm_client import (
    BackendDescriptor,
    CompletionRequest,
    HeuristicBackend,
    ScriptedBackend,
)
from mecopt.optimizer import (
    AgentLoop,
    LoopConfig,
    MultiAgentConfig,
    MultiAgentError,
    OptimizationAborted,
    optimize,
    run_manifest,
    run_multi_agent,
    trajectory_diversity,
)
from mecopt.solvers import IterationRecord, Trajectory, brute_force

from conftest import assert_trajectory_invariants


def allocation_line(index, num_servers=3, num_users=3):
    servers = decode_index(index, num_servers, num_users).servers
    return "Allocation: [" + ", ".join(str(s + 1) for s in servers) + "]"


class RecordingBackend:
    """Wraps a backend and keeps every prompt it was asked to complete."""

    def __init__(self, inner):
        self.inner = inner
        self.prompts = []

    def complete(self, req):
        self.prompts.append(req.user_text)
        return self.inner.complete(req)


class TestSingleAgentLoop:
    def test_heuristic_reaches_optimum_on_a(self, matrix_a):
        traj = optimize(matrix_a, HeuristicBackend(seed=1), LoopConfig(seed=1))
        assert traj.best_objective_s == pytest.approx(0.126, abs=1e-12)
        assert traj.iterations_to_best() <= 20
        assert_trajectory_invariants(traj)

    def test_deterministic_given_seed(self, matrix_a):
        a = optimize(matrix_a, HeuristicBackend(seed=4), LoopConfig(seed=4))
        b = optimize(matrix_a, HeuristicBackend(seed=4), LoopConfig(seed=4))
        assert a.records == b.records

    def test_threshold_stops_after_first_iteration(self, matrix_a):
        backend = ScriptedBackend(["Allocation: [3, 1, 2]"])
        cfg = LoopConfig(latency_threshold_s=0.13, candidates_per_iteration=1)
        traj = optimize(matrix_a, backend, cfg)
        assert len(traj.records) == 1
        assert traj.best_objective_s == pytest.approx(0.126, abs=1e-12)

    def test_threshold_compares_strictly(self, matrix_a):
        # best 0.126 is not strictly below a 0.126 threshold, so the loop
        # keeps going until the iteration cap
        replies = ["Allocation: [3, 1, 2]"] * 4
        cfg = LoopConfig(max_iterations=4, latency_threshold_s=0.126, candidates_per_iteration=1)
        traj = optimize(matrix_a, ScriptedBackend(replies), cfg)
        assert len(traj.records) == 4

    def test_malformed_only_replies_never_crash(self, matrix_a):
        cfg = LoopConfig(max_iterations=3, reprompt_retries=2, candidates_per_iteration=5)
        backend = ScriptedBackend(["nonsense"] * 9)
        traj = optimize(matrix_a, backend, cfg)
        assert len(traj.records) == 3
        assert traj.total_evaluations == 0
        assert all(rec.best_so_far is None for rec in traj.records)

    def test_exhaustive_script_matches_brute_force(self, matrix_a):
        lines = [allocation_line(k) for k in range(27)]
        replies = ["\n".join(lines[i : i + 5]) for i in range(0, 27, 5)]
        cfg = LoopConfig(max_iterations=len(replies), candidates_per_iteration=5)
        traj = optimize(matrix_a, ScriptedBackend(replies), cfg)
        _, obj = brute_force(matrix_a)
        assert traj.total_evaluations == 27
        assert traj.best_objective_s == obj.max_latency_s
        assert traj.best_index == 19

    def test_backend_failure_preserves_partial_trajectory(self, matrix_a):
        backend = ScriptedBackend(["Allocation: [1, 2, 3]"])
        cfg = LoopConfig(max_iterations=5, candidates_per_iteration=1)
        with pytest.raises(OptimizationAborted) as excinfo:
            optimize(matrix_a, backend, cfg)
        partial = excinfo.value.trajectory
        assert len(partial.records) == 1
        assert partial.total_evaluations == 1

    def test_reprompt_carries_diagnostic(self, matrix_a):
        backend = RecordingBackend(ScriptedBackend(["Allocation: [7, 1, 2]", "Allocation: [3, 1, 2]"]))
        cfg = LoopConfig(max_iterations=1, candidates_per_iteration=1, reprompt_retries=3)
        traj = optimize(matrix_a, backend, cfg)
        assert traj.total_evaluations == 1
        assert len(backend.prompts) == 2
        assert "## Correction" not in backend.prompts[0]
        assert "## Correction" in backend.prompts[1]
        assert "[7, 1, 2]" in backend.prompts[1]

    def test_retry_budget_is_finite(self, matrix_a):
        backend = RecordingBackend(ScriptedBackend(["bad"] * 10))
        cfg = LoopConfig(max_iterations=1, reprompt_retries=2)
        traj = optimize(matrix_a, backend, cfg)
        assert len(backend.prompts) == 3
        assert traj.total_evaluations == 0

    def test_every_recorded_candidate_is_feasible(self, matrix_a):
        mixed = [
            "Allocation: [3, 1, 2]\nAllocation: [5, 1, 2]",
            "Allocation: [0, 0, 0]",
            "Allocation: [2, 2, 2]\ngarbage",
            "Allocation: [1, 1]",
        ] * 3
        cfg = LoopConfig(max_iterations=3, candidates_per_iteration=5, reprompt_retries=3)
        loop = AgentLoop(matrix_a, ScriptedBackend(mixed), cfg)
        loop.run(cfg.max_iterations)
        traj = loop.trajectory()
        for rec in traj.records:
            for index, _ in rec.candidates:
                decode_index(index, 3, 3)
        for obs in loop.buffer.observations:
            assert all(0 <= s < 3 for s in obs.allocation.servers)

    def test_request_template_is_respected(self, matrix_a):
        captured = []

        class Probe:
            def complete(self, req):
                captured.append(req)
                return "Allocation: [1, 1, 1]"

        template = CompletionRequest(user_text="-", model_id="my-model", temperature=0.2)
        optimize(matrix_a, Probe(), LoopConfig(max_iterations=1), request_template=template)
        assert captured[0].model_id == "my-model"
        assert captured[0].temperature == 0.2
        assert "## Solution format" in captured[0].user_text


def make_trajectory(indices, best, method="llm"):
    records = [
        IterationRecord(
            iteration=i + 1, candidates=((idx, 0.5),), best_so_far=(indices[0], best)
        )
        for i, idx in enumerate(indices)
    ]
    return Trajectory(
        method=method, num_servers=3, num_users=3, records=records, total_evaluations=len(indices)
    )


class TestDiversitySelection:
    def test_identical_trajectories_tie_break_in_order(self):
        trajs = [make_trajectory([1, 2, 3], 0.3), make_trajectory([1, 2, 3], 0.3)]
        selection = trajectory_diversity(trajs, 2)
        assert selection.indices == (0, 1)
        assert selection.distances[1] == 0.0

    def test_disjoint_sets_have_distance_one(self):
        trajs = [make_trajectory([1, 2], 0.3), make_trajectory([5, 6], 0.4)]
        selection = trajectory_diversity(trajs, 2)
        assert selection.distances[1] == 1.0

    def test_k1_picks_best_objective(self):
        trajs = [
            make_trajectory([1], 0.5),
            make_trajectory([2], 0.2),
            make_trajectory([3], 0.4),
        ]
        assert trajectory_diversity(trajs, 1).indices == (1,)

    def test_greedy_prefers_far_sets(self):
        trajs = [
            make_trajectory([1, 2, 3], 0.1),
            make_trajectory([1, 2, 4], 0.2),
            make_trajectory([10, 11, 12], 0.3),
        ]
        selection = trajectory_diversity(trajs, 2)
        assert selection.indices == (0, 2)

    def test_rejects_oversized_k(self):
        with pytest.raises(ValueError):
            trajectory_diversity([make_trajectory([1], 0.1)], 2)


class TestMultiAgent:
    def test_protocol_on_b(self, matrix_b):
        cfg = MultiAgentConfig()
        result = run_multi_agent(matrix_b, cfg, lambda i: HeuristicBackend(seed=i + 1))
        assert len(result.agents) == 3
        for run in result.agents:
            assert len(run.trajectory.records) == 20
            assert result.overall_best_objective_s <= run.trajectory.best_objective_s
        single = optimize(matrix_b, HeuristicBackend(seed=1), LoopConfig(seed=1))
        assert result.overall_best_objective_s <= single.best_objective_s

    def test_deterministic(self, matrix_b):
        cfg = MultiAgentConfig(pool_size=4, selected_agents=2)
        a = run_multi_agent(matrix_b, cfg, lambda i: HeuristicBackend(seed=i + 1))
        b = run_multi_agent(matrix_b, cfg, lambda i: HeuristicBackend(seed=i + 1))
        assert [r.trajectory.records for r in a.agents] == [r.trajectory.records for r in b.agents]
        assert a.selection == b.selection

    def test_identical_scripted_pool_selects_first_k(self, matrix_a):
        replies = ["Allocation: [3, 1, 2]"] * 20

        def factory(i):
            return ScriptedBackend(list(replies))

        cfg = MultiAgentConfig(
            pool_size=5,
            preliminary_iterations=2,
            selected_agents=3,
            continuation_iterations=2,
            loop=LoopConfig(candidates_per_iteration=1),
        )
        result = run_multi_agent(matrix_a, cfg, factory)
        assert tuple(run.ordinal for run in result.agents) == (0, 1, 2)

    def test_failing_agents_shrink_the_pool(self, matrix_a):
        def factory(i):
            # agents 0 and 1 fail immediately; the rest are fine
            if i < 2:
                return ScriptedBackend([])
            return HeuristicBackend(seed=i)

        cfg = MultiAgentConfig(pool_size=5, selected_agents=3, preliminary_iterations=2,
                               continuation_iterations=2)
        result = run_multi_agent(matrix_a, cfg, factory)
        assert result.failed_preliminary == (0, 1)
        assert {run.ordinal for run in result.agents} <= {2, 3, 4}

    def test_too_many_failures_is_an_error(self, matrix_a):
        cfg = MultiAgentConfig(pool_size=3, selected_agents=3)
        with pytest.raises(MultiAgentError):
            run_multi_agent(matrix_a, cfg, lambda i: ScriptedBackend([]))


class TestManifest:
    def test_round_trips_through_json_without_secrets(self, monkeypatch):
        monkeypatch.setenv("SECRET_KEY_ENV", "hunter2-sentinel")
        descriptor = BackendDescriptor(
            kind="live", endpoint="https://api.example", credential_env="SECRET_KEY_ENV"
        )
        manifest = run_manifest(
            "demo",
            "multi",
            descriptor,
            LoopConfig(seed=7),
            multi_cfg=MultiAgentConfig(),
            request=CompletionRequest(user_text="-", temperature=0.3),
        )
        text = json.dumps(manifest)
        assert "hunter2-sentinel" not in text
        assert manifest["loop"]["seed"] == 7
        assert manifest["multi"]["pool_size"] == 10
        assert manifest["request"]["temperature"] == 0.3
