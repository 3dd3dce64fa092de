"""
Desk-scale sweeps at the default scenario. Deselected by default; run with
``pytest -m slow`` (tests/run_ci.py does).
"""

import math
import os
import sys

import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from ici_whitening.config import ExperimentSpec, ScenarioConfig
from ici_whitening.harness import run_experiment
from ici_whitening.harness.reporting import read_csv

pytestmark = pytest.mark.slow

JOBS = os.cpu_count() or 1


def mean_f1(agg, grid_value=None):
    """{detector: mean F1} from an aggregate CSV, optionally at one grid value."""
    return {
        row["detector"]: float(row["f1"])
        for row in agg
        if grid_value is None or float(row["grid_value"]) == grid_value
    }


class TestDetectionTrend:

    @pytest.mark.timeout(1800)
    def test_zrd_svdd_over_training_sizes(self, tmp_path):
        spec = ExperimentSpec(
            kind="f1_vs_nt",
            grid=(30, 40, 50, 60, 70, 80, 90, 100),
            n_drops=10,
            detectors=("zrd_svdd", "svdd_no_zscore"),
        )
        run_experiment(spec, master_seed=2024, output_dir=tmp_path, jobs=JOBS)
        agg = read_csv(tmp_path / "f1_vs_nt_agg.csv")

        assert mean_f1(agg, 30.0)["zrd_svdd"] >= 0.75
        for n_t in spec.grid:
            f1 = mean_f1(agg, float(n_t))
            assert f1["zrd_svdd"] > f1["svdd_no_zscore"], f"N_t={n_t}: {f1}"

    @pytest.mark.timeout(1800)
    def test_zrd_svdd_against_baselines_with_sparse_pilots(self, tmp_path):
        spec = ExperimentSpec(
            kind="f1_vs_nf",
            grid=(6,),
            n_drops=10,
            detectors=("zrd_svdd", "svdd_no_zscore", "ocsvm", "knn20"),
        )
        run_experiment(spec, master_seed=2024, output_dir=tmp_path, jobs=JOBS)
        f1 = mean_f1(read_csv(tmp_path / "f1_vs_nf_agg.csv"))
        for baseline in ("svdd_no_zscore", "ocsvm", "knn20"):
            assert f1["zrd_svdd"] >= f1[baseline] - 0.05, f"{baseline}: {f1}"


class TestSerPolicies:

    @pytest.mark.timeout(3600)
    def test_policy_ordering_across_radii(self, tmp_path):
        scenario = ScenarioConfig(tx_power_serving_dbm=46.0, tx_power_interferer_dbm=46.0)
        spec = ExperimentSpec(
            kind="ser_vs_radius",
            grid=(100, 200, 400, 700, 1000),
            n_drops=10,
            detectors=("zrd_svdd",),
            scenario=scenario,
        )
        run_experiment(spec, master_seed=2024, output_dir=tmp_path, jobs=JOBS)

        agg = read_csv(tmp_path / "ser_vs_radius_agg.csv")
        n_symbols = spec.n_drops * scenario.n_positions * scenario.symbols_per_position
        by_radius = {}
        for row in agg:
            by_radius.setdefault(float(row["grid_value"]), {})[row["policy"]] = float(row["ser"])

        for radius, ser in by_radius.items():
            best = min(ser["always_on"], ser["always_off"])
            slack = 3.0 * math.sqrt(max(best * (1.0 - best), 1e-12) / n_symbols)
            assert ser["genie"] <= best + slack, f"radius {radius}: {ser}"

        for radius in (min(by_radius), max(by_radius)):
            ser = by_radius[radius]
            assert ser["zrd_svdd"] <= 1.5 * ser["genie"], f"radius {radius}: {ser}"
