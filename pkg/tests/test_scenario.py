"""
Tests for the two-cell scenario: drops, slot synthesis, datasets and CSI-IM.
"""

import os
import sys

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from ici_whitening.config import ScenarioConfig
from ici_whitening.detectors.features import featurize
from ici_whitening.errors import EmptySampleSetError, IndexOutOfRangeError
from ici_whitening.scenario import (
    QPSK,
    build_drop,
    csi_im_measure,
    feature_matrix,
    interpolate_estimates,
    make_datasets,
    pilot_subcarriers,
    svd_precoder,
    synthesize_reception,
)
from ici_whitening.whitening import complex_gaussian, sample_covariance


@pytest.fixture
def drop(small_scenario, small_params):
    return build_drop(3, small_scenario, small_params)


class TestBuildDrop:

    def test_shapes_and_flags(self, drop, small_scenario):
        assert drop.n_positions == 20
        assert drop.serving_effective.shape == (20, 24, 4)
        assert drop.interfering_effective.shape == (1, 20, 24, 4)
        assert drop.serving_precoders.shape == (20, 8)
        assert np.flatnonzero(drop.flags).tolist() == [8, 9, 10, 11]

    def test_precoders_have_unit_norm(self, drop):
        assert np.allclose(np.linalg.norm(drop.serving_precoders, axis=1), 1.0)
        assert np.allclose(np.linalg.norm(drop.interferer_precoders, axis=2), 1.0)

    def test_same_seed_same_drop(self, drop, small_scenario, small_params):
        again = build_drop(3, small_scenario, small_params)
        assert np.array_equal(drop.serving_effective, again.serving_effective)
        assert np.array_equal(drop.interfering_effective, again.interfering_effective)
        assert np.array_equal(drop.rsrp_neighbor_dbm, again.rsrp_neighbor_dbm)

    def test_trajectory_spacing(self, drop, small_scenario):
        steps = np.linalg.norm(np.diff(drop.ue_positions_m, axis=0), axis=1)
        assert np.allclose(steps, small_scenario.step_m)

    def test_rsrp_gap_shrinks_towards_midpoint(self, small_params):
        cfg = ScenarioConfig(rb_count=1)
        gaps_start, gaps_mid = [], []
        for seed in range(5):
            d = build_drop(seed, cfg, small_params)
            gap = d.rsrp_serving_dbm - d.rsrp_neighbor_dbm
            gaps_start.append(gap[0])
            gaps_mid.append(gap[100])
        assert np.mean(gaps_start) > np.mean(gaps_mid)


class TestSvdPrecoder:

    def test_rank_one(self):
        a = np.array([1.0, 1j, 2.0, 0.5])
        b = np.array([1.0, -1.0, 1j, 0.0, 2.0, 1.0, 0.0, 1.0])
        f = svd_precoder([np.outer(a, b.conj())] * 3)
        assert np.linalg.norm(f) == pytest.approx(1.0)
        assert abs(np.vdot(b / np.linalg.norm(b), f)) == pytest.approx(1.0, abs=1e-10)

    def test_strong_column(self):
        h = np.eye(4, 8) * 0.1
        h[:, 5] = 3.0
        f = svd_precoder(h)
        assert abs(f[5]) == pytest.approx(1.0, abs=1e-6)

    def test_empty(self):
        with pytest.raises(EmptySampleSetError):
            svd_precoder(np.empty((0, 4, 8)))


class TestSynthesizeReception:

    def test_noise_free_estimates_are_exact(self, drop, small_scenario):
        rec = synthesize_reception(drop, 2, None, 0, n_symbols=50, interference=False, noise=False)
        amp = np.sqrt(10 ** (small_scenario.tx_power_serving_dbm / 10))
        h = amp * drop.serving_effective[2]
        assert np.allclose(rec.pilot_estimates, h[rec.pilot_subcarriers], rtol=1e-12, atol=0)
        assert np.allclose(rec.u, 0, atol=1e-12 * np.abs(h).max())
        assert np.allclose(rec.rx_symbols, h[rec.data_subcarriers] * rec.tx_symbols[:, None], rtol=1e-12, atol=0)

    def test_sizes(self, drop, small_scenario):
        rec = synthesize_reception(drop, 0, None, 0, n_symbols=30)
        assert rec.u.shape == (small_scenario.n_pilot_symbols * 24, 4)
        assert rec.rx_symbols.shape == (30, 4)
        assert len(rec.u_samples) == rec.u.shape[0]
        assert set(np.unique(rec.tx_indices)) <= {0, 1, 2, 3}

    def test_interference_covariance(self, drop, small_scenario):
        cfg = small_scenario.model_copy(update={"n_pilot_symbols": 2000})
        rec = synthesize_reception(drop, 9, cfg, 1, n_symbols=0, interference=True)
        amp_i2 = 10 ** (cfg.tx_power_interferer_dbm / 10)
        g = drop.interfering_effective[0, 9][rec.pilot_subcarriers]
        expected = amp_i2 * np.einsum("mr,ms->rs", g, g.conj()) / g.shape[0] + drop.noise_variance * np.eye(4)
        err = np.linalg.norm(sample_covariance(rec.u) - expected) / np.linalg.norm(expected)
        assert err < 0.05

    def test_interference_raises_power(self, drop):
        clean = synthesize_reception(drop, 9, None, 5, n_symbols=0, interference=False)
        dirty = synthesize_reception(drop, 9, None, 5, n_symbols=0, interference=True)
        assert csi_im_measure(dirty.u) > csi_im_measure(clean.u)

    def test_position_out_of_range(self, drop):
        with pytest.raises(IndexOutOfRangeError):
            synthesize_reception(drop, 20, None, 0)


class TestPilotsAndInterpolation:

    def test_pilot_positions(self):
        assert pilot_subcarriers(ScenarioConfig(rb_count=1, n_f_per_rb=6)).tolist() == [0, 2, 4, 6, 8, 10]
        assert pilot_subcarriers(ScenarioConfig(rb_count=2, n_f_per_rb=4)).tolist() == [0, 3, 6, 9, 12, 15, 18, 21]
        assert pilot_subcarriers(ScenarioConfig(rb_count=1)).tolist() == list(range(12))

    def test_linear_midpoint_and_edge_hold(self):
        est = np.array([[0.0], [2 + 2j]])
        grid = interpolate_estimates(np.array([0, 2]), est, 4)
        assert grid[1, 0] == pytest.approx(1 + 1j)
        assert grid[3, 0] == pytest.approx(2 + 2j)

    def test_flat_channel_is_exact(self):
        pilots = np.array([0, 2, 4, 6, 8, 10])
        h = np.array([1 - 2j, 0.5j, 3.0, -1.0])
        grid = interpolate_estimates(pilots, np.tile(h, (6, 1)), 12)
        assert np.allclose(grid, np.tile(h, (12, 1)))


class TestDatasets:

    def test_labels(self, drop):
        data = make_datasets(drop)
        assert len(data["train"]) == 10
        assert not any(s.label for s in data["train"])
        assert sum(s.label for s in data["test"]) == 4
        assert [s.position_index for s in data["test"]] == list(range(5, 15))

    def test_feature_length(self, drop):
        x, y = feature_matrix(make_datasets(drop)["test"])
        assert x.shape == (10, 2 * 4 * 12 * 2)
        assert y.dtype == bool

    def test_reduced_pilots_keep_full_grid(self, small_scenario, small_params):
        cfg = small_scenario.model_copy(update={"n_f_per_rb": 6})
        d = build_drop(3, cfg, small_params)
        x, _ = feature_matrix(make_datasets(d)["train"])
        assert x.shape[1] == 2 * 4 * 12 * 2

    def test_deterministic(self, drop):
        a, b = make_datasets(drop), make_datasets(drop)
        for s, t in zip(a["test"], b["test"]):
            assert np.array_equal(s.features, t.features)

    def test_features_come_from_estimates(self, drop):
        sample = make_datasets(drop)["train"][0]
        assert sample.features.size == featurize(np.zeros((24, 4))).size
        assert sample.csi_im > 0


class TestCsiIm:

    def test_zero(self):
        assert csi_im_measure(np.zeros((5, 4))) == 0.0

    def test_unit_vectors(self):
        assert csi_im_measure(np.eye(4)) == pytest.approx(0.25)

    def test_pure_noise(self):
        u = complex_gaussian(np.random.default_rng(0), (1000, 4), 3.0)
        assert csi_im_measure(u) == pytest.approx(3.0, rel=0.1)

    def test_empty(self):
        with pytest.raises(EmptySampleSetError):
            csi_im_measure([])

    def test_qpsk_unit_power(self):
        assert np.allclose(np.abs(QPSK), 1.0)
