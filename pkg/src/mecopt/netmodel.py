"""Physical model of a wireless edge-computing deployment.

Access points (each fronting an edge server) and user devices are placed in
a square service area. Every user offloads one compute task per round: the
task data is uploaded, executed on the server, and the result is downloaded
back. The per-link latency is the sum of those three phases, and the matrix
of all per-link latencies is what the solvers operate on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

__all__ = [
    "MIN_NODE_DISTANCE_M",
    "SimulationParams",
    "Instance",
    "LatencyMatrix",
    "Scenario",
    "dbm_to_watts",
    "channel_gain",
    "transmission_latency",
    "computation_latency",
    "generate_instance",
    "latency_matrix",
    "scenario_from_matrix",
    "scenario_from_physical",
    "scenario_to_dict",
    "scenario_from_dict",
    "load_scenario",
    "save_scenario",
]

# Power-law gains diverge as distance -> 0; no link computation ever sees a
# shorter range than this.
MIN_NODE_DISTANCE_M = 1.0


def dbm_to_watts(dbm: float) -> float:
    """Convert a dBm power level to watts."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SimulationParams:
    """Radio and compute parameters shared by every link.

    Defaults describe a 10 MHz access point serving 5 Mbit uplink tasks whose
    results come back at 20% of the uploaded size, executed at 1 Gcycle/s
    with 330 CPU cycles needed per uploaded bit.
    """

    bandwidth_hz: float = 10e6
    ap_tx_power_w: float = 2.0
    user_tx_power_w: float = 0.5
    path_loss_exponent: float = 3.0
    noise_power_dbm: float = -75.0
    mec_cpu_cycles_per_s: float = 1e9
    tx_data_bits: float = 5e6
    rx_data_bits: float = 1e6
    cycles_per_bit_coeff: float = 330.0
    area_side_m: float = 1000.0
    # Opt-in unit-mean fading multiplier on channel gains; off by default so
    # identical instances always yield identical matrices.
    fading: bool = False

    _POSITIVE = (
        "bandwidth_hz",
        "ap_tx_power_w",
        "user_tx_power_w",
        "mec_cpu_cycles_per_s",
        "tx_data_bits",
        "rx_data_bits",
        "cycles_per_bit_coeff",
        "area_side_m",
    )

    def __post_init__(self) -> None:
        for name in self._POSITIVE:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if not (math.isfinite(self.path_loss_exponent) and self.path_loss_exponent >= 2.0):
            raise ValueError(
                f"path_loss_exponent must be >= 2, got {self.path_loss_exponent!r}"
            )
        if not math.isfinite(self.noise_power_dbm):
            raise ValueError(f"noise_power_dbm must be finite, got {self.noise_power_dbm!r}")

    @property
    def cpu_cycles_per_task(self) -> float:
        return self.cycles_per_bit_coeff * self.tx_data_bits

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown simulation parameter(s): {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class Instance:
    """One concrete deployment: node positions plus shared parameters."""

    num_servers: int
    num_users: int
    server_positions: np.ndarray  # (M, 2) meters
    user_positions: np.ndarray  # (N, 2) meters
    params: SimulationParams
    rng_seed: int

    def __post_init__(self) -> None:
        if self.num_servers < 1 or self.num_users < 1:
            raise ValueError("need at least one server and one user")
        for label, count, attr in (
            ("server_positions", self.num_servers, "server_positions"),
            ("user_positions", self.num_users, "user_positions"),
        ):
            arr = np.array(getattr(self, attr), dtype=float)
            if arr.shape != (count, 2):
                raise ValueError(f"{label} must have shape ({count}, 2), got {arr.shape}")
            if np.any(arr < 0.0) or np.any(arr > self.params.area_side_m):
                raise ValueError(f"{label} must lie inside the service area")
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)


@dataclass(frozen=True, eq=False)
class LatencyMatrix:
    """Per-link total offloading latency, rows = servers, columns = users."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"latency matrix must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or not np.all(arr > 0.0):
            raise ValueError("latency entries must all be finite and > 0")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def num_servers(self) -> int:
        return self.values.shape[0]

    @property
    def num_users(self) -> int:
        return self.values.shape[1]

    def tolist(self) -> list[list[float]]:
        return self.values.tolist()


def channel_gain(distance_m: float, path_loss_exponent: float) -> float:
    """Deterministic power-law gain of a link of the given length.

    Raises ValueError for non-positive distances, which signal coincident
    nodes; callers clamp distances to MIN_NODE_DISTANCE_M instead.
    """
    if not distance_m > 0.0:
        raise ValueError(f"distance must be > 0 m, got {distance_m!r}")
    return float(distance_m) ** -float(path_loss_exponent)


def transmission_latency(
    data_bits: float,
    bandwidth_hz: float,
    tx_power_w: float,
    gain: float,
    noise_dbm: float,
) -> float:
    """Time to move `data_bits` over one link at its Shannon rate.

    Serves both the upload phase (user transmit power) and the download
    phase (access-point transmit power).
    """
    for name, value in (
        ("data_bits", data_bits),
        ("bandwidth_hz", bandwidth_hz),
        ("tx_power_w", tx_power_w),
        ("gain", gain),
    ):
        if not value > 0.0:
            raise ValueError(f"{name} must be > 0, got {value!r}")
    noise_w = dbm_to_watts(noise_dbm)
    snr = tx_power_w * gain / noise_w
    seconds = data_bits / (bandwidth_hz * math.log2(1.0 + snr))
    if not (math.isfinite(seconds) and seconds > 0.0):
        raise ArithmeticError(f"non-finite transmission latency from snr={snr!r}")
    return seconds


def computation_latency(cpu_cycles: float, mec_cycles_per_s: float) -> float:
    """Execution time of a task needing `cpu_cycles` on one server."""
    if not cpu_cycles > 0.0:
        raise ValueError(f"cpu_cycles must be > 0, got {cpu_cycles!r}")
    if not mec_cycles_per_s > 0.0:
        raise ValueError(f"mec_cycles_per_s must be > 0, got {mec_cycles_per_s!r}")
    return cpu_cycles / mec_cycles_per_s


def generate_instance(
    params: SimulationParams, num_servers: int, num_users: int, seed: int
) -> Instance:
    """Draw a deployment with positions uniform over the service area.

    Identical arguments produce bit-identical instances. Users are redrawn
    until they sit at least MIN_NODE_DISTANCE_M away from every server so
    channel gains stay finite.
    """
    if num_servers < 1 or num_users < 1:
        raise ValueError("need at least one server and one user")
    rng = np.random.default_rng(seed)
    side = params.area_side_m
    servers = rng.uniform(0.0, side, size=(num_servers, 2))
    users = np.empty((num_users, 2))
    for a in range(num_users):
        for _ in range(10_000):
            point = rng.uniform(0.0, side, size=2)
            if np.min(np.linalg.norm(servers - point, axis=1)) >= MIN_NODE_DISTANCE_M:
                users[a] = point
                break
        else:
            raise RuntimeError("could not place a user clear of every server")
    return Instance(
        num_servers=num_servers,
        num_users=num_users,
        server_positions=servers,
        user_positions=users,
        params=params,
        rng_seed=seed,
    )


def latency_matrix(instance: Instance) -> LatencyMatrix:
    """Total offloading latency of every server-user link of an instance.

    Each entry is upload + execution + download for one task. Deterministic
    given the instance; with fading enabled the multipliers derive from the
    instance seed, so the matrix is still reproducible.
    """
    p = instance.params
    diffs = instance.server_positions[:, None, :] - instance.user_positions[None, :, :]
    dists = np.maximum(np.linalg.norm(diffs, axis=2), MIN_NODE_DISTANCE_M)
    gains = dists ** -p.path_loss_exponent
    if p.fading:
        # Unit-mean exponential multipliers (squared Rayleigh amplitude).
        fade_rng = np.random.default_rng([instance.rng_seed, 1])
        gains = gains * fade_rng.exponential(1.0, size=gains.shape)
    exec_s = computation_latency(p.cpu_cycles_per_task, p.mec_cpu_cycles_per_s)
    entries = np.empty_like(gains)
    for i in range(instance.num_servers):
        for a in range(instance.num_users):
            up = transmission_latency(
                p.tx_data_bits, p.bandwidth_hz, p.user_tx_power_w, gains[i, a], p.noise_power_dbm
            )
            down = transmission_latency(
                p.rx_data_bits, p.bandwidth_hz, p.ap_tx_power_w, gains[i, a], p.noise_power_dbm
            )
            entries[i, a] = up + exec_s + down
    return LatencyMatrix(entries)


@dataclass(frozen=True)
class Scenario:
    """A named problem input: either a literal latency matrix or a physical
    deployment from which the matrix is derived."""

    name: str
    matrix: LatencyMatrix | None = None
    instance: Instance | None = None

    def __post_init__(self) -> None:
        if (self.matrix is None) == (self.instance is None):
            raise ValueError("scenario needs exactly one of matrix or instance")

    def resolve_matrix(self) -> LatencyMatrix:
        if self.matrix is not None:
            return self.matrix
        return latency_matrix(self.instance)


def scenario_from_matrix(values, name: str) -> Scenario:
    return Scenario(name=name, matrix=LatencyMatrix(values))


def scenario_from_physical(
    params: SimulationParams, num_servers: int, num_users: int, seed: int, name: str
) -> Scenario:
    instance = generate_instance(params, num_servers, num_users, seed)
    return Scenario(name=name, instance=instance)


def scenario_to_dict(scenario: Scenario) -> dict:
    if scenario.matrix is not None:
        return {"name": scenario.name, "matrix": scenario.matrix.tolist()}
    inst = scenario.instance
    return {
        "name": scenario.name,
        "physical": {
            "params": inst.params.to_dict(),
            "M": inst.num_servers,
            "N": inst.num_users,
            "seed": inst.rng_seed,
        },
    }


def scenario_from_dict(data: dict, default_name: str = "scenario") -> Scenario:
    if ("matrix" in data) == ("physical" in data):
        raise ValueError("scenario must define exactly one of 'matrix' or 'physical'")
    name = data.get("name", default_name)
    if "matrix" in data:
        return scenario_from_matrix(data["matrix"], name)
    phys = data["physical"]
    params = SimulationParams.from_dict(phys.get("params", {}))
    return scenario_from_physical(params, phys["M"], phys["N"], phys["seed"], name)


def load_scenario(path) -> Scenario:
    path = Path(path)
    data = json.loads(path.read_text())
    return scenario_from_dict(data, default_name=path.stem)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")
