import math

import numpy as np
import pytest

from pao.bench.experiments import (ConfigError, ExperimentConfig, Workbench, binned_means, first_reach,
                                   interpolate_grid, interpolation_pick, leave_one_out_table,
                                   received_power_grid, render_heatmap, rmse_trend_ok, run_budget_curves,
                                   run_interpolation_benchmark, run_rmse_vs_s, run_sinr_mismatch, write_csv)
from pao.codebook import beam_subset_indices, build_codebook

from conftest import TINY


class TestInterpolation:
    def test_linear_row_is_exact(self):
        cb = build_codebook()
        idx = beam_subset_indices(cb, 3)
        az = np.array(cb.az_deg)
        vals = 0.1 * az[[0, 10, 20]] + 3.0
        grid, mask = interpolate_grid(cb, idx, vals)
        np.testing.assert_allclose(grid[1], 0.1 * az + 3.0)
        assert mask.sum() == 3 and mask[1].sum() == 3

    def test_missing_rows_copy_nearest(self):
        cb = build_codebook()
        idx = beam_subset_indices(cb, 3)
        grid, _ = interpolate_grid(cb, idx, [1.0, 5.0, 2.0])
        np.testing.assert_array_equal(grid[0], grid[1])
        np.testing.assert_array_equal(grid[2], grid[1])

    def test_constant_extension(self):
        cb = build_codebook()
        i, j = cb.index(1, 5), cb.index(1, 15)
        grid, _ = interpolate_grid(cb, [i, j], [4.0, 8.0])
        assert np.all(grid[1, :6] == 4.0) and np.all(grid[1, 15:] == 8.0)

    def test_pick_peak_between_samples(self):
        cb = build_codebook()
        idx = beam_subset_indices(cb, 5)
        pick = interpolation_pick(cb, idx, [0.0, 9.0, 3.0, 1.0, 0.0])
        assert pick == idx[1]

    def test_no_measurements(self):
        with pytest.raises(ValueError):
            interpolate_grid(build_codebook(), [], [])


class TestHelpers:
    def test_trend(self):
        assert rmse_trend_ok([1.5, 1.3, 1.0, 0.95, 0.9, 0.88])
        assert rmse_trend_ok([1.5, 1.55, 1.0, 0.95, 0.9, 0.88])
        assert not rmse_trend_ok([1.5, 1.6, 1.0, 0.95, 0.9, 0.88])
        assert not rmse_trend_ok([1.5, 1.3, 1.2, 1.1, 0.9, 0.8])

    def test_first_reach(self):
        c = np.array([1.0, 2.0, 2.0, 5.0])
        assert first_reach(c, 2.0) == 2
        assert first_reach(c, 6.0) is None

    def test_binned(self):
        x = np.arange(10.0)[::-1]
        bx, by = binned_means(x, 2 * x, 2)
        np.testing.assert_allclose(bx, [2.0, 7.0])
        np.testing.assert_allclose(by, [4.0, 14.0])

    def test_csv_format(self, tmp_path):
        write_csv(tmp_path / "a.csv", ["a", "b"], [[1, 0.5], ["x", 1 / 3]])
        assert (tmp_path / "a.csv").read_text() == "a,b\n1,0.500000\nx,0.333333\n"

    def test_power_grid(self, office):
        p = np.concatenate([office.sta.position, office.interferers[0].position])
        g = received_power_grid(office, p, build_codebook())
        assert g.shape == (3, 21) and np.all(np.isfinite(g))


class TestConfig:
    def test_round_trip(self):
        cfg = ExperimentConfig.from_dict(TINY)
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    @pytest.mark.parametrize("bad", [{"bogus": 1}, {"s_list": [0]}, {"optimizer": {"kind": "X"}},
                                     {"pretrain": {"speed": 2}}, {"eval_positions": "moon"},
                                     {"scene": "/nonexistent.json"}, {"seeds": []}])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**TINY, **bad})

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(p)


@pytest.fixture(scope="module")
def tiny_bench():
    cfg = ExperimentConfig.from_dict(TINY)
    return cfg, Workbench(cfg)


class TestRunners:
    def test_rmse_vs_s(self, tiny_bench, tmp_path):
        cfg, wb = tiny_bench
        r = run_rmse_vs_s(cfg, wb, tmp_path)
        assert r["s"] == [3, 11] and len(r["rmse_m"]) == 2
        assert (tmp_path / "rmse_vs_s.csv").exists() and (tmp_path / "rmse_vs_s.svg").exists()

    def test_interp(self, tiny_bench, tmp_path):
        cfg, wb = tiny_bench
        r = run_interpolation_benchmark(cfg, wb, tmp_path)
        assert all(math.isfinite(v) for v in r["pao_db"] + r["baseline_db"])
        text = (tmp_path / "interp_benchmark.svg").read_text()
        assert "<!-- data: interp_benchmark.csv -->" in text

    def test_budget(self, tiny_bench, tmp_path):
        cfg, wb = tiny_bench
        r = run_budget_curves(cfg, wb, tmp_path)
        assert r["pao_cost"] == 3
        for m in ("GA", "GBO"):
            assert len(r["methods"][m]["curve"]) == 40
        for f in ("budget_direct.csv", "budget_summary.csv", "budget_twin_traces.csv", "budget_twin_gbo.svg"):
            assert (tmp_path / f).exists()

    def test_gbo_prefix_budgets(self, tiny_bench):
        cfg, wb = tiny_bench
        r = run_budget_curves(cfg, wb)
        assert set(r["gbo_dms_final_db"]) == {1, 2, 3}

    def test_heatmap(self, tiny_bench, tmp_path):
        cfg, wb = tiny_bench
        r = render_heatmap(cfg, wb, tmp_path)
        assert r["true_dbm"].shape == (3, 21) and -1 <= r["pearson_r"] <= 1
        assert len((tmp_path / "heatmap.csv").read_text().splitlines()) == 64

    def test_loo_table(self, tiny_bench, tmp_path):
        cfg, wb = tiny_bench
        rows = leave_one_out_table(cfg, 3, 0, wb, tmp_path)
        assert len(rows) == 30 and rows[0]["location"] == "A1"

    def test_mismatch(self, tiny_bench, tmp_path):
        cfg, wb = tiny_bench
        r = run_sinr_mismatch(cfg, wb, tmp_path)
        assert set(r) == {3, 11}
        assert len(r[3]["bin_x"]) == 2

    def test_rerun_identical(self, tmp_path):
        cfg = ExperimentConfig.from_dict(TINY)
        for d in ("a", "b"):
            run_interpolation_benchmark(cfg, Workbench(cfg), tmp_path / d)
        for f in ("interp_benchmark.csv", "interp_benchmark.svg"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
