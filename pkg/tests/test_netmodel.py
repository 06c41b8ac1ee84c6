import json

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from mecopt.netmodel import (
    MIN_NODE_DISTANCE_M,
    Instance,
    LatencyMatrix,
    SimulationParams,
    channel_gain,
    computation_latency,
    dbm_to_watts,
    generate_instance,
    latency_matrix,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_from_matrix,
    scenario_from_physical,
    transmission_latency,
)


def oracle_transmission_latency(bits, hz, power_w, gain, noise_dbm):
    """Independently coded evaluator on arbitrary-precision arithmetic."""
    noise_w = mpmath.mpf(10) ** ((mpmath.mpf(noise_dbm) - 30) / 10)
    snr = mpmath.mpf(power_w) * mpmath.mpf(gain) / noise_w
    rate = mpmath.mpf(hz) * mpmath.log(1 + snr) / mpmath.log(2)
    return float(mpmath.mpf(bits) / rate)


class TestUnits:
    def test_dbm_conversion(self):
        assert dbm_to_watts(-75.0) == pytest.approx(10.0**-10.5, rel=1e-15)
        assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-15)

    def test_channel_gain_unit_distance(self):
        assert channel_gain(1.0, 3.0) == 1.0

    def test_channel_gain_power_law(self):
        assert channel_gain(100.0, 3.0) == pytest.approx(1e-6, rel=1e-12)
        assert channel_gain(10.0, 2.0) == pytest.approx(1e-2, rel=1e-12)

    @pytest.mark.parametrize("distance", [0.0, -1.0])
    def test_channel_gain_rejects_coincident_nodes(self, distance):
        with pytest.raises(ValueError):
            channel_gain(distance, 3.0)


class TestTransmissionLatency:
    def test_unit_snr(self):
        # Noise of -30 dBm is 1e-6 W, so power 1 W at gain 1e-6 gives SNR 1
        # and the link runs at exactly one bit per Hz-second.
        assert transmission_latency(1e6, 1e6, 1.0, 1e-6, -30.0) == pytest.approx(1.0, rel=1e-12)

    def test_reference_point(self):
        value = transmission_latency(5e6, 1e7, 0.5, 1e-6, -75.0)
        assert value == pytest.approx(0.03584, abs=2e-5)
        assert value == pytest.approx(
            oracle_transmission_latency(5e6, 1e7, 0.5, 1e-6, -75.0), rel=1e-9
        )

    def test_linear_in_payload(self):
        one = transmission_latency(1e6, 1e7, 0.5, 1e-6, -75.0)
        two = transmission_latency(2e6, 1e7, 0.5, 1e-6, -75.0)
        assert two == pytest.approx(2 * one, rel=1e-12)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"data_bits": 0.0},
            {"bandwidth_hz": -1.0},
            {"tx_power_w": 0.0},
            {"gain": 0.0},
        ],
    )
    def test_rejects_nonpositive_inputs(self, kwargs):
        base = dict(data_bits=1e6, bandwidth_hz=1e6, tx_power_w=1.0, gain=1e-6, noise_dbm=-75.0)
        base.update(kwargs)
        with pytest.raises(ValueError):
            transmission_latency(**base)

    @given(
        factor=st.floats(min_value=1.01, max_value=100.0),
        bandwidth=st.floats(min_value=1e5, max_value=1e8),
    )
    def test_more_bandwidth_never_slower(self, factor, bandwidth):
        slow = transmission_latency(1e6, bandwidth, 0.5, 1e-6, -75.0)
        fast = transmission_latency(1e6, bandwidth * factor, 0.5, 1e-6, -75.0)
        assert fast <= slow

    @given(
        factor=st.floats(min_value=1.01, max_value=100.0),
        power=st.floats(min_value=1e-3, max_value=10.0),
    )
    def test_more_power_never_slower(self, factor, power):
        slow = transmission_latency(1e6, 1e7, power, 1e-6, -75.0)
        fast = transmission_latency(1e6, 1e7, power * factor, 1e-6, -75.0)
        assert fast <= slow


class TestComputationLatency:
    def test_identity_ratio(self):
        assert computation_latency(1e9, 1e9) == 1.0

    def test_default_task_cost(self):
        assert computation_latency(330 * 5e6, 1e9) == pytest.approx(1.65, abs=1e-12)

    def test_rejects_zero_cycles(self):
        with pytest.raises(ValueError):
            computation_latency(0.0, 1e9)


class TestParams:
    def test_defaults(self):
        p = SimulationParams()
        assert p.bandwidth_hz == 10e6
        assert p.ap_tx_power_w == 2.0
        assert p.user_tx_power_w == 0.5
        assert p.path_loss_exponent == 3.0
        assert p.noise_power_dbm == -75.0
        assert p.tx_data_bits == 5e6
        assert p.rx_data_bits == 1e6
        assert p.mec_cpu_cycles_per_s == 1e9
        assert p.cycles_per_bit_coeff == 330.0
        assert p.cpu_cycles_per_task == pytest.approx(1.65e9)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"bandwidth_hz": 0.0},
            {"ap_tx_power_w": -2.0},
            {"tx_data_bits": 0.0},
            {"path_loss_exponent": 1.5},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SimulationParams(**kwargs)

    def test_dict_round_trip(self):
        p = SimulationParams(bandwidth_hz=5e6, fading=True)
        assert SimulationParams.from_dict(p.to_dict()) == p

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ValueError, match="unknown"):
            SimulationParams.from_dict({"bandwith_hz": 1e6})


class TestInstanceGeneration:
    def test_positions_in_area(self):
        inst = generate_instance(SimulationParams(), 3, 3, seed=7)
        for arr in (inst.server_positions, inst.user_positions):
            assert arr.shape[1] == 2
            assert np.all(arr >= 0.0) and np.all(arr <= 1000.0)
        assert inst.server_positions.shape == (3, 2)
        assert inst.user_positions.shape == (3, 2)

    def test_determinism(self):
        a = generate_instance(SimulationParams(), 3, 6, seed=11)
        b = generate_instance(SimulationParams(), 3, 6, seed=11)
        assert np.array_equal(a.server_positions, b.server_positions)
        assert np.array_equal(a.user_positions, b.user_positions)

    def test_different_seeds_differ(self):
        a = generate_instance(SimulationParams(), 3, 6, seed=1)
        b = generate_instance(SimulationParams(), 3, 6, seed=2)
        assert not np.array_equal(a.user_positions, b.user_positions)

    def test_min_separation(self):
        inst = generate_instance(SimulationParams(area_side_m=30.0), 4, 50, seed=5)
        diffs = inst.server_positions[:, None, :] - inst.user_positions[None, :, :]
        assert np.linalg.norm(diffs, axis=2).min() >= MIN_NODE_DISTANCE_M

    def test_rejects_degenerate_counts(self):
        with pytest.raises(ValueError):
            generate_instance(SimulationParams(), 0, 3, seed=0)


class TestLatencyMatrix:
    def test_validation(self):
        with pytest.raises(ValueError):
            LatencyMatrix([[0.1, -0.2], [0.3, 0.4]])
        with pytest.raises(ValueError):
            LatencyMatrix([[float("nan")]])

    def test_execution_time_is_a_floor(self):
        inst = generate_instance(SimulationParams(), 3, 6, seed=1)
        matrix = latency_matrix(inst)
        assert matrix.values.shape == (3, 6)
        # Execution alone costs 1.65 s under defaults; radio time only adds.
        assert np.all(matrix.values > 1.65)

    def test_determinism(self):
        inst = generate_instance(SimulationParams(), 3, 4, seed=3)
        a, b = latency_matrix(inst), latency_matrix(inst)
        assert np.array_equal(a.values, b.values)

    def test_equidistant_servers_tie(self):
        params = SimulationParams()
        inst = Instance(
            num_servers=2,
            num_users=1,
            server_positions=np.array([[0.0, 0.0], [200.0, 0.0]]),
            user_positions=np.array([[100.0, 0.0]]),
            params=params,
            rng_seed=0,
        )
        matrix = latency_matrix(inst)
        assert matrix.values[0, 0] == matrix.values[1, 0]

    def test_farther_is_never_faster(self):
        params = SimulationParams()
        base = Instance(
            num_servers=1,
            num_users=1,
            server_positions=np.array([[0.0, 0.0]]),
            user_positions=np.array([[50.0, 0.0]]),
            params=params,
            rng_seed=0,
        )
        farther = Instance(
            num_servers=1,
            num_users=1,
            server_positions=np.array([[0.0, 0.0]]),
            user_positions=np.array([[300.0, 0.0]]),
            params=params,
            rng_seed=0,
        )
        assert latency_matrix(farther).values[0, 0] >= latency_matrix(base).values[0, 0]

    def test_fading_is_seeded_and_optional(self):
        plain = generate_instance(SimulationParams(), 2, 3, seed=9)
        faded = generate_instance(SimulationParams(fading=True), 2, 3, seed=9)
        assert np.array_equal(latency_matrix(faded).values, latency_matrix(faded).values)
        assert not np.array_equal(latency_matrix(plain).values, latency_matrix(faded).values)

    def test_matches_oracle_on_random_draws(self):
        # Single-link totals recomputed with the arbitrary-precision oracle.
        p = SimulationParams()
        inst = generate_instance(p, 2, 2, seed=21)
        matrix = latency_matrix(inst)
        dists = np.linalg.norm(
            inst.server_positions[:, None, :] - inst.user_positions[None, :, :], axis=2
        )
        for i in range(2):
            for a in range(2):
                gain = max(dists[i, a], MIN_NODE_DISTANCE_M) ** -p.path_loss_exponent
                expected = (
                    oracle_transmission_latency(p.tx_data_bits, p.bandwidth_hz, p.user_tx_power_w, gain, p.noise_power_dbm)
                    + 330 * 5e6 / 1e9
                    + oracle_transmission_latency(p.rx_data_bits, p.bandwidth_hz, p.ap_tx_power_w, gain, p.noise_power_dbm)
                )
                assert matrix.values[i, a] == pytest.approx(expected, rel=1e-9)


class TestScenarioIO:
    def test_matrix_scenario_round_trip(self, tmp_path, matrix_a):
        scenario = scenario_from_matrix(matrix_a.values, "demo")
        path = tmp_path / "demo.json"
        save_scenario(scenario, path)
        loaded = load_scenario(path)
        assert loaded.name == "demo"
        assert np.array_equal(loaded.resolve_matrix().values, matrix_a.values)

    def test_physical_scenario_round_trip(self, tmp_path):
        scenario = scenario_from_physical(SimulationParams(), 3, 6, 1, "phys")
        path = tmp_path / "phys.json"
        save_scenario(scenario, path)
        loaded = load_scenario(path)
        assert np.array_equal(
            loaded.resolve_matrix().values, scenario.resolve_matrix().values
        )

    def test_rejects_ambiguous_payload(self):
        with pytest.raises(ValueError):
            scenario_from_dict({"matrix": [[1.0]], "physical": {}})
        with pytest.raises(ValueError):
            scenario_from_dict({"name": "x"})

    def test_loader_defaults_name_to_stem(self, tmp_path):
        path = tmp_path / "mystery.json"
        path.write_text(json.dumps({"matrix": [[0.5]]}))
        assert load_scenario(path).name == "mystery"
