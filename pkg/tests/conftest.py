import itertools

import pytest

from mecopt.netmodel import LatencyMatrix

# Two small bundled scenarios used throughout the suite. A has a unique
# optimum of 0.126; B has a global optimum of 0.264 and a nearby local
# optimum of 0.269 that leaves one server idle.
MATRIX_A_ROWS = [
    [0.257, 0.101, 0.199],
    [0.137, 0.108, 0.061],
    [0.126, 0.065, 0.102],
]
MATRIX_B_ROWS = [
    [0.264, 0.291, 0.078],
    [0.292, 0.330, 0.084],
    [0.104, 0.165, 0.149],
]


@pytest.fixture
def matrix_a() -> LatencyMatrix:
    return LatencyMatrix(MATRIX_A_ROWS)


@pytest.fixture
def matrix_b() -> LatencyMatrix:
    return LatencyMatrix(MATRIX_B_ROWS)


def assert_trajectory_invariants(traj):
    """Shared checks: monotone running best, consistent evaluation
    accounting, and feasibility of every recorded candidate."""
    from mecopt.assignment import decode_index

    previous = None
    count = 0
    for rec in traj.records:
        count += len(rec.candidates)
        if rec.best_so_far is not None and previous is not None:
            assert rec.best_so_far[1] <= previous
        if rec.best_so_far is not None:
            previous = rec.best_so_far[1]
        for index, _ in rec.candidates:
            # decoding validates the one-server-per-user structure
            decode_index(index, traj.num_servers, traj.num_users)
    assert traj.total_evaluations == count


def enumerate_optimum(rows):
    """Independent exhaustive oracle, deliberately separate from the
    library's search: plain itertools enumeration with the same tie-break
    (bottleneck, then per-server loads sorted descending, then order)."""
    num_servers, num_users = len(rows), len(rows[0])
    best_key, best_alloc = None, None
    for alloc in itertools.product(range(num_servers), repeat=num_users):
        loads = [0.0] * num_servers
        for user, server in enumerate(alloc):
            loads[server] += rows[server][user]
        key = (max(loads), tuple(sorted(loads, reverse=True)))
        if best_key is None or key < best_key:
            best_key, best_alloc = key, alloc
    return best_alloc, best_key[0]
