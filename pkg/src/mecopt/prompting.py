"""Prompt construction and reply validation for the in-context loop.

The prompt is six fixed sections. The solution format and the feasibility
rules come first so the model knows the shape of the search space before it
sees the objective; the numeric inputs and the history of already-evaluated
candidates follow; usage instructions close the document. Replies are parsed
strictly: anything that is not a well-formed, feasible allocation is turned
into a diagnostic for re-prompting and never reaches downstream state.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .assignment import Allocation, objective
from .netmodel import LatencyMatrix

__all__ = [
    "SECTION_TITLES",
    "Observation",
    "ObservationBuffer",
    "PromptDocument",
    "ParseFailure",
    "build_prompt",
    "parse_response",
    "format_allocation_line",
    "correction_text",
]

SECTION_TITLES = (
    "Solution format",
    "Constraints",
    "Objective",
    "Network parameters",
    "Previous solutions",
    "Instructions",
)

NO_HISTORY_MARKER = "No candidates have been evaluated yet."

ALLOCATION_LINE_RE = re.compile(r"allocation\s*:\s*\[([^\]\n]*)\]", re.IGNORECASE)


@dataclass(frozen=True)
class Observation:
    """One evaluated candidate: the allocation, its bottleneck latency, and
    the iteration that produced it."""

    allocation: Allocation
    objective_s: float
    iteration_born: int


class ObservationBuffer:
    """Rolling window of the most recently evaluated candidates.

    Capacity-bounded: recording beyond capacity evicts the oldest entry.
    Only feasible allocations can enter because evaluation goes through
    the typed Allocation.
    """

    def __init__(self, capacity: int = 20):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Observation] = []
        self._records_seen = 0

    def __len__(self) -> int:
        return len(self._items)

    @property
    def observations(self) -> tuple[Observation, ...]:
        return tuple(self._items)

    def record(
        self, alloc: Allocation, matrix: LatencyMatrix, iteration_born: int | None = None
    ) -> Observation:
        """Evaluate an allocation against the matrix and append it."""
        value = objective(alloc, matrix).max_latency_s
        self._records_seen += 1
        born = self._records_seen if iteration_born is None else iteration_born
        obs = Observation(allocation=alloc, objective_s=value, iteration_born=born)
        self._items.append(obs)
        if len(self._items) > self.capacity:
            self._items.pop(0)
        return obs

    def to_json(self) -> str:
        return json.dumps(
            {
                "capacity": self.capacity,
                "records_seen": self._records_seen,
                "observations": [
                    {
                        "servers": list(o.allocation.servers),
                        "num_servers": o.allocation.num_servers,
                        "objective_s": o.objective_s,
                        "iteration_born": o.iteration_born,
                    }
                    for o in self._items
                ],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ObservationBuffer":
        data = json.loads(text)
        buffer = cls(capacity=data["capacity"])
        buffer._records_seen = data.get("records_seen", 0)
        for item in data["observations"]:
            buffer._items.append(
                Observation(
                    allocation=Allocation(tuple(item["servers"]), item["num_servers"]),
                    objective_s=item["objective_s"],
                    iteration_born=item["iteration_born"],
                )
            )
        return buffer


@dataclass(frozen=True)
class PromptDocument:
    """The rendered prompt plus each of its six sections, in order."""

    solution_variable_definition: str
    constraint_enforcement: str
    objective_description: str
    network_parameter_input: str
    nshot_observations: str
    utilization_instruction: str
    text: str


def format_allocation_line(alloc: Allocation) -> str:
    """External textual form of an allocation, with 1-based server indices."""
    return "Allocation: [" + ", ".join(str(s + 1) for s in alloc.servers) + "]"


def _matrix_block(matrix: LatencyMatrix) -> str:
    lines = []
    for i, row in enumerate(matrix.values):
        lines.append(f"server {i + 1}: " + " ".join(f"{v:.3f}" for v in row))
    return "\n".join(lines)


def build_prompt(
    matrix: LatencyMatrix, buffer: ObservationBuffer, candidates_requested: int
) -> PromptDocument:
    """Render the six-section prompt for one loop iteration.

    The output is a pure function of the inputs, byte for byte, which keeps
    stub-backed runs reproducible and makes golden-file tests possible.
    """
    if candidates_requested < 1:
        raise ValueError("candidates_requested must be >= 1")
    m, n = matrix.num_servers, matrix.num_users
    for obs in buffer.observations:
        if obs.allocation.num_servers != m or obs.allocation.num_users != n:
            raise ValueError("buffer observation does not match the matrix dimensions")

    solution = (
        "A candidate solution assigns every user to a server. Write each\n"
        "candidate on its own line, in exactly this form:\n"
        "Allocation: [s_1, s_2, ..., s_N]\n"
        f"where s_a is the server index chosen for user a. Here N = {n} users\n"
        f"and there are M = {m} servers."
    )
    constraints = (
        "Each user must be connected to exactly one server.\n"
        f"Every server index must be an integer between 1 and {m}.\n"
        "Candidates violating either rule are discarded without evaluation."
    )
    objective_text = (
        "A server processes its assigned tasks sequentially, so its load is\n"
        "the sum of the per-task latencies of the users connected to it. The\n"
        "score of a candidate is the largest load across all servers, in\n"
        "seconds. Lower is better: find allocations that minimize this\n"
        "worst-case latency."
    )
    parameters = (
        "Per-task latency in seconds between each server (row) and each\n"
        "user (column):\n" + _matrix_block(matrix)
    )
    if buffer.observations:
        history_lines = [
            f"{format_allocation_line(o.allocation)} -> {o.objective_s:.3f}"
            for o in buffer.observations
        ]
        history = (
            "Earlier candidates and their worst-case latency in seconds,\n"
            "oldest first:\n" + "\n".join(history_lines)
        )
    else:
        history = NO_HISTORY_MARKER
    instructions = (
        f"Propose exactly {candidates_requested} new candidate allocation(s), one per line, in\n"
        "the exact form given in the solution-format section. Study the\n"
        "previous solutions and their latencies to steer toward better\n"
        "allocations. Reply with the allocation lines only: do not write\n"
        "code, and do not explain your reasoning."
    )

    sections = (solution, constraints, objective_text, parameters, history, instructions)
    text = "\n\n".join(
        f"## {title}\n{body}" for title, body in zip(SECTION_TITLES, sections)
    )
    return PromptDocument(*sections, text=text)


@dataclass(frozen=True)
class ParseFailure:
    """Why a reply yielded no usable candidates, phrased for re-prompting.

    kind is one of "no_candidates", "infeasible_only", "dimension_mismatch".
    """

    kind: str
    detail: str


def parse_response(
    text: str, num_servers: int, num_users: int, candidates_requested: int
) -> list[Allocation] | ParseFailure:
    """Extract feasible allocations from arbitrary reply text.

    Scans every line for the declared allocation form, tolerating
    surrounding prose. At most candidates_requested allocations are
    returned, all feasible; if none survive validation the failure reports
    what was wrong so the caller can re-prompt.
    """
    matches = ALLOCATION_LINE_RE.findall(text or "")
    if not matches:
        return ParseFailure(
            kind="no_candidates",
            detail="no line of the form 'Allocation: [s_1, ..., s_N]' was found",
        )
    valid: list[Allocation] = []
    wrong_length: list[str] = []
    out_of_range: list[str] = []
    unreadable: list[str] = []
    for body in matches:
        if len(valid) == candidates_requested:
            break
        shown = f"Allocation: [{body.strip()}]"
        try:
            entries = [int(part.strip()) for part in body.split(",")]
        except ValueError:
            unreadable.append(shown)
            continue
        if len(entries) != num_users:
            wrong_length.append(shown)
            continue
        if any(not 1 <= s <= num_servers for s in entries):
            out_of_range.append(shown)
            continue
        valid.append(Allocation(tuple(s - 1 for s in entries), num_servers))
    if valid:
        return valid
    if out_of_range:
        return ParseFailure(
            kind="infeasible_only",
            detail=(
                f"every server index must be between 1 and {num_servers}; "
                f"rejected: {'; '.join(out_of_range[:3])}"
            ),
        )
    if wrong_length:
        return ParseFailure(
            kind="dimension_mismatch",
            detail=(
                f"each allocation must list exactly {num_users} entries, one per user; "
                f"rejected: {'; '.join(wrong_length[:3])}"
            ),
        )
    return ParseFailure(
        kind="no_candidates",
        detail=f"allocation lines were present but unreadable: {'; '.join(unreadable[:3])}",
    )


def correction_text(
    failure: ParseFailure, num_servers: int, num_users: int, candidates_requested: int
) -> str:
    """Diagnostic block appended to the prompt after a rejected reply."""
    return (
        "\n\n## Correction\n"
        f"Your previous reply could not be used: {failure.detail}.\n"
        f"Reply again with exactly {candidates_requested} line(s) of the form "
        f"Allocation: [s_1, ..., s_{num_users}] using integer server indices "
        f"between 1 and {num_servers}."
    )
