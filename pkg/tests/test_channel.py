"""
Tests for the geometric cluster channel and the cell layout.
"""

import dataclasses
import os
import sys

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from ici_whitening.channel import (
    ArrayGeometry,
    advance_ue,
    array_geometries,
    cell_layout,
    compute_paths,
    generate_drop_geometry,
    make_link,
    path_gain,
    rsrp_dbm,
    steering_vector,
    subcarrier_channel,
    subcarrier_channels,
    ue_position,
)
from ici_whitening.config import SPEED_OF_LIGHT, ChannelParams, ScenarioConfig
from ici_whitening.errors import DegenerateGeometryError, EmptyChannelListError, NonPositiveDistanceError


class TestSteeringVector:

    def test_unit_modulus(self):
        a = steering_vector(ArrayGeometry(8), 0.7)
        assert a.shape == (8,)
        assert np.allclose(np.abs(a), 1.0)

    def test_broadside(self):
        assert np.allclose(steering_vector(ArrayGeometry(4), np.pi / 2), 1.0)

    def test_invalid_array(self):
        with pytest.raises(ValueError):
            ArrayGeometry(0)


class TestPathGain:

    def test_doubling_a_segment_halves_amplitude(self, small_params):
        assert path_gain(small_params, (20.0, 40.0)) == pytest.approx(0.5 * path_gain(small_params, (20.0, 20.0)))

    def test_non_positive_distance(self, small_params):
        with pytest.raises(NonPositiveDistanceError):
            path_gain(small_params, (10.0, 0.0))

    def test_degenerate_scatterer(self, small_params):
        scatterers = np.zeros((1, 1, 2))
        with pytest.raises(DegenerateGeometryError):
            compute_paths(np.zeros(2), np.array([5.0, 0.0]), scatterers, small_params)

    def test_path_record_geometry(self, small_params):
        scatterers = np.array([[[0.0, 10.0]]])
        (path,) = compute_paths(np.zeros(2), np.array([10.0, 10.0]), scatterers, small_params)
        assert path.segment_distances_m == pytest.approx((10.0, 10.0))
        assert path.delay_s == pytest.approx(20.0 / SPEED_OF_LIGHT)
        assert path.aod_rad == pytest.approx(np.pi / 2)
        assert path.aoa_rad == pytest.approx(0.0)


class TestCellLayout:

    def test_trajectories_cross_at_midpoint(self):
        cfg = ScenarioConfig(n_positions=201)
        layout = cell_layout(cfg)
        assert np.allclose(ue_position(layout, 0, 100, cfg.step_m), layout.meeting_point_m)
        assert np.allclose(ue_position(layout, 1, 100, cfg.step_m), layout.meeting_point_m)

    def test_horizontal_and_vertical_motion(self):
        layout = cell_layout(ScenarioConfig())
        assert np.allclose(layout.ue_directions[0], [1.0, 0.0])
        assert np.allclose(layout.ue_directions[1], [0.0, 1.0])

    def test_total_travel(self):
        cfg = ScenarioConfig()
        layout = cell_layout(cfg)
        start = ue_position(layout, 0, 0, cfg.step_m)
        end = ue_position(layout, 0, cfg.n_positions - 1, cfg.step_m)
        assert np.linalg.norm(end - start) == pytest.approx(20.0, abs=0.15)

    def test_ue1_starts_closer_to_serving_cell(self):
        cfg = ScenarioConfig()
        layout = cell_layout(cfg)
        start = ue_position(layout, 0, 0, cfg.step_m)
        serving, neighbour = layout.gnb_positions_m[:2]
        assert np.linalg.norm(start - serving) < np.linalg.norm(start - neighbour)

    def test_neighbour_sites(self):
        layout = cell_layout(ScenarioConfig(n_neighbors=3))
        assert layout.gnb_positions_m.shape == (4, 2)
        assert np.allclose(np.linalg.norm(layout.gnb_positions_m[1:], axis=1), 80.0)


class TestDropGeometry:

    def test_links_share_scatterers_per_gnb(self, small_scenario, small_params):
        links = generate_drop_geometry(np.random.default_rng(0), small_scenario, small_params)
        assert set(links) == {(0, 0), (0, 1), (1, 0), (1, 1)}
        assert np.array_equal(links[(1, 0)].scatterer_positions_m, links[(1, 1)].scatterer_positions_m)
        assert links[(0, 0)].scatterer_positions_m.shape == (2, 3, 2)
        assert len(links[(0, 0)].paths) == 6

    def test_advance_keeps_scatterers(self, small_scenario, small_params):
        link = generate_drop_geometry(np.random.default_rng(0), small_scenario, small_params)[(0, 0)]
        moved = advance_ue(link, [0.1, 0.0], small_params)
        assert np.array_equal(moved.scatterer_positions_m, link.scatterer_positions_m)
        assert np.allclose(moved.rx_position_m, link.rx_position_m + [0.1, 0.0])

    def test_path_parameters_move_smoothly(self, small_scenario, small_params):
        link = generate_drop_geometry(np.random.default_rng(1), small_scenario, small_params)[(0, 0)]
        moved = advance_ue(link, [small_scenario.step_m, 0.0], small_params)
        for before, after in zip(link.paths, moved.paths):
            assert abs(after.delay_s - before.delay_s) <= small_scenario.step_m / SPEED_OF_LIGHT + 1e-18
            assert before.aod_rad == pytest.approx(after.aod_rad)

    def test_advance_is_reversible(self, small_scenario, small_params):
        link = generate_drop_geometry(np.random.default_rng(2), small_scenario, small_params)[(1, 0)]
        back = advance_ue(advance_ue(link, [0.7, -0.3], small_params), [-0.7, 0.3], small_params)
        assert np.allclose(back.rx_position_m, link.rx_position_m, rtol=0, atol=1e-12)
        for before, after in zip(link.paths, back.paths):
            assert after.delay_s == pytest.approx(before.delay_s, rel=1e-12)
            assert abs(after.gain - before.gain) <= 1e-12 * abs(before.gain)
            assert after.aoa_rad == pytest.approx(before.aoa_rad, abs=1e-12)
            assert after.aod_rad == pytest.approx(before.aod_rad, abs=1e-12)

    def test_delays_at_least_line_of_sight(self, small_scenario, small_params):
        for seed in range(5):
            links = generate_drop_geometry(np.random.default_rng(seed), small_scenario, small_params)
            for link in links.values():
                los = np.linalg.norm(link.rx_position_m - link.tx_position_m) / SPEED_OF_LIGHT
                assert all(p.delay_s >= los * (1 - 1e-12) for p in link.paths)

    @pytest.mark.timeout(60)
    def test_consecutive_positions_are_correlated(self):
        # 0.1 m is about a third of a wavelength at 300 MHz
        params = ChannelParams(carrier_hz=300e6)
        scenario = ScenarioConfig()
        geom_rx, geom_tx = array_geometries(params)
        step = scenario.step_m * cell_layout(scenario).ue_directions[0]
        ratios = []
        for seed in range(100):
            link = generate_drop_geometry(np.random.default_rng(seed), scenario, params)[(0, 0)]
            h0 = subcarrier_channel(link, geom_rx, geom_tx, 0, params)
            h1 = subcarrier_channel(advance_ue(link, step, params), geom_rx, geom_tx, 0, params)
            ratios.append(np.linalg.norm(h1 - h0) / np.linalg.norm(h0))
        assert np.mean(ratios) < 1.0


class TestSubcarrierChannels:

    def test_single_path_matches_formula(self, small_params):
        geom_rx, geom_tx = array_geometries(small_params)
        link = make_link([0.0, 0.0], [30.0, 5.0], np.array([[[10.0, 10.0]]]), small_params)
        (p,) = link.paths
        m = 7
        expected = (
            p.gain
            * np.exp(-2j * np.pi * small_params.carrier_hz * p.delay_s)
            * np.exp(-2j * np.pi * small_params.sampling_hz * m / small_params.total_subcarriers * p.delay_s)
            * np.outer(steering_vector(geom_rx, p.aoa_rad), steering_vector(geom_tx, p.aod_rad).conj())
        )
        assert np.allclose(subcarrier_channel(link, geom_rx, geom_tx, m, small_params), expected)

    def test_linear_in_path_list(self, small_params):
        geom_rx, geom_tx = array_geometries(small_params)
        a = make_link([0.0, 0.0], [30.0, 5.0], np.array([[[10.0, 10.0], [12.0, -4.0]]]), small_params)
        b = make_link([0.0, 0.0], [30.0, 5.0], np.array([[[20.0, -8.0]], [[5.0, 15.0]]]), small_params)
        both = dataclasses.replace(a, paths=a.paths + b.paths)
        m = [0, 3, 11]
        expected = subcarrier_channels(a, geom_rx, geom_tx, m, small_params) + subcarrier_channels(b, geom_rx, geom_tx, m, small_params)
        combined = subcarrier_channels(both, geom_rx, geom_tx, m, small_params)
        assert np.max(np.abs(combined - expected)) <= 1e-12 * np.max(np.abs(expected))

    def test_shape(self, small_scenario, small_params):
        geom_rx, geom_tx = array_geometries(small_params)
        link = generate_drop_geometry(np.random.default_rng(0), small_scenario, small_params)[(0, 0)]
        h = subcarrier_channels(link, geom_rx, geom_tx, range(24), small_params)
        assert h.shape == (24, 4, 8)

    def test_subcarrier_out_of_range(self, small_params):
        geom_rx, geom_tx = array_geometries(small_params)
        link = make_link([0.0, 0.0], [30.0, 5.0], np.array([[[10.0, 10.0]]]), small_params)
        with pytest.raises(ValueError):
            subcarrier_channels(link, geom_rx, geom_tx, [small_params.total_subcarriers], small_params)


class TestRsrp:

    def test_scales_with_power(self):
        h = np.ones((3, 4, 8), dtype=complex)
        f = np.ones(8) / np.sqrt(8)
        assert rsrp_dbm(h, f, 33.0) - rsrp_dbm(h, f, 30.0) == pytest.approx(3.0)

    def test_beamformed_gain(self):
        h = np.ones((4, 8), dtype=complex)
        f = np.ones(8) / np.sqrt(8)
        assert rsrp_dbm(h, f, 0.0) == pytest.approx(10 * np.log10(8.0))

    def test_empty(self):
        with pytest.raises(EmptyChannelListError):
            rsrp_dbm(np.empty((0, 4, 8)), np.ones(8) / np.sqrt(8), 0.0)

    def test_precoder_must_be_unit_norm(self):
        with pytest.raises(ValueError):
            rsrp_dbm(np.ones((4, 8)), np.ones(8), 0.0)


class TestParams:

    def test_noise_variance(self):
        params = ChannelParams()
        assert 10 * np.log10(params.noise_variance_mw) == pytest.approx(-174 + 10 * np.log10(120e3))

    def test_wavelength_and_sampling(self):
        assert ChannelParams().wavelength_m == pytest.approx(0.0107, abs=1e-4)
        assert ScenarioConfig().sampling_period_s == pytest.approx(0.1 / 3.0)
