"""Min-max latency task allocation for edge computing.

A physical channel/compute model produces per-link latency matrices; exact,
metaheuristic, and LLM-driven solvers search the allocation space under a
hard one-server-per-user rule; a CLI harness runs, compares, and plots the
lot. Deterministic stub backends make every loop testable offline.
"""

from .assignment import (
    Allocation,
    Objective,
    decode_index,
    encode_index,
    is_feasible_onehot,
    objective,
    objective_lower_bound,
    server_load,
)
from .llm_client import (
    BackendDescriptor,
    BackendError,
    CompletionRequest,
    HeuristicBackend,
    LiveBackend,
    ScriptedBackend,
    complete,
    create_backend,
)
from .netmodel import (
    Instance,
    LatencyMatrix,
    Scenario,
    SimulationParams,
    channel_gain,
    computation_latency,
    generate_instance,
    latency_matrix,
    load_scenario,
    save_scenario,
    transmission_latency,
)
from .optimizer import (
    LoopConfig,
    MultiAgentConfig,
    MultiAgentResult,
    OptimizationAborted,
    optimize,
    run_multi_agent,
    trajectory_diversity,
)
from .prompting import (
    ObservationBuffer,
    ParseFailure,
    PromptDocument,
    build_prompt,
    parse_response,
)
from .solvers import (
    GAConfig,
    Trajectory,
    brute_force,
    ga_run,
    random_search,
)

__version__ = "0.1.0"
