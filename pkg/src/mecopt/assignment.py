"""User-to-server assignments and the bottleneck-latency objective.

An allocation maps every user to exactly one server, so the single-server
constraint is unrepresentable-by-construction internally. One-hot matrices
exist only at validation boundaries (for text extracted from a model reply)
and integer indices provide a compact fingerprint of any allocation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netmodel import LatencyMatrix

__all__ = [
    "Allocation",
    "Objective",
    "server_load",
    "objective",
    "is_feasible_onehot",
    "encode_index",
    "decode_index",
    "objective_lower_bound",
]


@dataclass(frozen=True)
class Allocation:
    """servers[a] is the 0-based server index handling user a."""

    servers: tuple[int, ...]
    num_servers: int

    def __post_init__(self) -> None:
        if self.num_servers < 1:
            raise ValueError(f"num_servers must be >= 1, got {self.num_servers}")
        if len(self.servers) < 1:
            raise ValueError("allocation must cover at least one user")
        for a, s in enumerate(self.servers):
            if not isinstance(s, (int, np.integer)) or isinstance(s, bool):
                raise ValueError(f"server index for user {a} must be an integer, got {s!r}")
            if not 0 <= s < self.num_servers:
                raise ValueError(
                    f"server index {s} for user {a} outside [0, {self.num_servers})"
                )
        object.__setattr__(self, "servers", tuple(int(s) for s in self.servers))

    @property
    def num_users(self) -> int:
        return len(self.servers)

    def to_onehot(self) -> np.ndarray:
        """Binary matrix with rows = servers, columns = users."""
        x = np.zeros((self.num_servers, self.num_users), dtype=int)
        for a, s in enumerate(self.servers):
            x[s, a] = 1
        return x


@dataclass(frozen=True)
class Objective:
    """Per-server total processing times and their maximum."""

    max_latency_s: float
    per_server_loads: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.per_server_loads:
            raise ValueError("per_server_loads must be non-empty")
        if any(load < 0.0 for load in self.per_server_loads):
            raise ValueError("server loads cannot be negative")
        if self.max_latency_s != max(self.per_server_loads):
            raise ValueError("max_latency_s must equal the largest per-server load")

    def sort_key(self) -> tuple[float, tuple[float, ...]]:
        """Total order used everywhere a single 'best' must be picked.

        Primary: the bottleneck latency. Ties: the per-server load vector
        sorted descending, compared lexicographically.
        """
        return (self.max_latency_s, tuple(sorted(self.per_server_loads, reverse=True)))


def _check_dims(alloc: Allocation, matrix: LatencyMatrix) -> None:
    if alloc.num_servers != matrix.num_servers or alloc.num_users != matrix.num_users:
        raise ValueError(
            f"allocation is {alloc.num_servers}x{alloc.num_users} but matrix is "
            f"{matrix.num_servers}x{matrix.num_users}"
        )


def server_load(alloc: Allocation, matrix: LatencyMatrix, server: int) -> float:
    """Total latency server `server` spends on the users assigned to it."""
    _check_dims(alloc, matrix)
    if not 0 <= server < matrix.num_servers:
        raise ValueError(f"server index {server} outside [0, {matrix.num_servers})")
    load = 0.0
    for a, s in enumerate(alloc.servers):
        if s == server:
            load += float(matrix.values[server, a])
    return load


def objective(alloc: Allocation, matrix: LatencyMatrix) -> Objective:
    """Evaluate the bottleneck latency of an allocation."""
    _check_dims(alloc, matrix)
    loads = [0.0] * matrix.num_servers
    for a, s in enumerate(alloc.servers):
        loads[s] += float(matrix.values[s, a])
    return Objective(max_latency_s=max(loads), per_server_loads=tuple(loads))


def is_feasible_onehot(x) -> bool:
    """True iff the binary matrix assigns every user to exactly one server.

    Rows are servers, columns are users. Entries outside {0, 1} are a
    validation error, not mere infeasibility.
    """
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise ValueError(f"one-hot matrix must be 2-D, got shape {arr.shape}")
    bad = np.argwhere((arr != 0) & (arr != 1))
    if bad.size:
        i, a = bad[0]
        raise ValueError(f"non-binary entry {arr[i, a]!r} at server {i}, user {a}")
    return bool(np.all(arr.sum(axis=0) == 1))


def encode_index(alloc: Allocation) -> int:
    """Pack an allocation into one integer, user 0 most significant.

    The digits are the per-user server choices in base `num_servers`, so the
    index ranges over [0, M**N) and round-trips exactly with decode_index.
    """
    index = 0
    for s in alloc.servers:
        index = index * alloc.num_servers + s
    return index


def decode_index(index: int, num_servers: int, num_users: int) -> Allocation:
    """Inverse of encode_index."""
    if num_servers < 1 or num_users < 1:
        raise ValueError("need at least one server and one user")
    span = num_servers**num_users
    if not 0 <= index < span:
        raise ValueError(f"index {index} outside [0, {span})")
    servers = [0] * num_users
    rem = int(index)
    for a in range(num_users - 1, -1, -1):
        servers[a] = rem % num_servers
        rem //= num_servers
    return Allocation(tuple(servers), num_servers)


def objective_lower_bound(matrix: LatencyMatrix) -> float:
    """A bound no allocation can beat.

    Every user must land on some server, so the bottleneck is at least that
    user's cheapest link; the largest of those minima bounds the optimum
    from below.
    """
    return float(np.max(np.min(matrix.values, axis=0)))
