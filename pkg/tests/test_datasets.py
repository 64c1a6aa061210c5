import numpy as np
import pytest

from pao.channel import SinrModel
from pao.codebook import beam_subset, build_codebook
from pao.datasets import Dataset, DatasetError, experimental_layout, gen_dataset, gen_experimental
from pao.localize import (FINETUNE, evaluate_rmse, fine_tune, leave_one_location_out, new_localizer,
                          per_sample_error, train)
from pao.mlp import TrainConfig


@pytest.fixture(scope="module")
def small(office):
    return gen_dataset(office, 40, seed=3)


class TestDatasets:
    def test_shapes_and_region(self, office, small):
        assert small.sinr_db.shape == (40, 63)
        assert small.positions.shape == (40, 6)
        (x0, x1), (y0, y1), z = office.sample_region
        p = small.positions.reshape(-1, 3)
        assert np.all((p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1))
        assert np.all(p[:, 2] == z)

    def test_rows_match_sweeps(self, office, small):
        cb = build_codebook()
        for i in (0, 17):
            p = small.positions[i].reshape(-1, 3)
            m = SinrModel.at(office, p[0], p[1:], clamp=False)
            az, el = cb.grid_rad()
            np.testing.assert_allclose(small.sinr_db[i], m.sinr_db(az, el), atol=1e-9)

    def test_subset_columns(self, small):
        cb = build_codebook()
        sub = small.subset_beams(11)
        full_beams = cb.entries
        idx = sub.meta["beam_index"]
        assert [full_beams[i] for i in idx] == beam_subset(cb, 11)
        np.testing.assert_array_equal(sub.sinr_db, small.sinr_db[:, idx])
        with pytest.raises(DatasetError):
            sub.subset_beams(3)

    def test_seeded(self, office):
        a = gen_dataset(office, 5, seed=1)
        b = gen_dataset(office, 5, seed=1)
        assert np.array_equal(a.sinr_db, b.sinr_db)
        c = gen_dataset(office, 5, seed=2)
        assert not np.array_equal(a.positions, c.positions)

    def test_save_load(self, tmp_path, small):
        small.save(tmp_path / "d.csv")
        back = Dataset.load(tmp_path / "d.csv")
        np.testing.assert_allclose(back.sinr_db, small.sinr_db, rtol=1e-9)
        np.testing.assert_allclose(back.positions, small.positions, rtol=1e-9)
        assert back.meta["seed"] == 3

    def test_experimental_layout(self, office):
        pts, labels = experimental_layout(office)
        assert len(pts) == 30 and labels[0] == "A1" and labels[-1] == "B15"
        assert np.allclose(np.diff(pts[:15, 0]), 0.1)
        assert pts[15, 1] - pts[0, 1] == pytest.approx(1.0)

    def test_experimental_groups(self, office):
        ds = gen_experimental(office, 0, n_sweeps=2)
        assert len(ds) == 60
        assert np.bincount(ds.groups).tolist() == [2] * 30
        assert ds.meta["locations"][29] == "B15"

    def test_validation(self):
        with pytest.raises(DatasetError):
            Dataset(np.zeros((3, 2)), np.zeros((2, 6)))
        with pytest.raises(DatasetError):
            Dataset(np.zeros((3, 2)), np.zeros((3, 4)))


class TestLocalizer:
    def test_training_beats_mean_predictor(self, office):
        tr = gen_dataset(office, 600, s=11, seed=0)
        te = gen_dataset(office, 200, s=11, seed=1)
        model, _ = train(new_localizer(office, 11), tr, TrainConfig(epochs=30))
        baseline = np.sqrt(np.mean(np.sum((te.positions - tr.positions.mean(0)) ** 2, axis=1)))
        assert evaluate_rmse(model, te) < baseline
        assert per_sample_error(model, te).shape == (200,)

    def test_mismatched_dataset(self, office, small):
        with pytest.raises(DatasetError):
            train(new_localizer(office, 5), small.subset_beams(3))

    def test_fine_tune_keeps_two_layers(self, office):
        ds = gen_experimental(office, 0, n_sweeps=2).subset_beams(5)
        m = new_localizer(office, 5)
        tuned, _ = fine_tune(m, ds, 2, TrainConfig(epochs=2, lr=1e-3))
        for i in range(2):
            assert np.array_equal(m.layers[i].W, tuned.layers[i].W)
        assert not np.array_equal(m.layers[3].W, tuned.layers[3].W)

    def test_loo_shuffle_invariant(self, office):
        ds = gen_experimental(office, 0, n_sweeps=2).subset_beams(3)
        m = new_localizer(office, 3)
        cfg = TrainConfig(epochs=1, lr=1e-3)
        a = leave_one_location_out(m, ds, 2, cfg)
        perm = np.random.default_rng(0).permutation(len(ds))
        b = leave_one_location_out(m, ds.take(perm), 2, cfg)
        assert [f.location for f in a] == list(range(30))
        assert a == b

    def test_loo_needs_groups(self, office, small):
        with pytest.raises(DatasetError):
            leave_one_location_out(new_localizer(office, 63), small, 2, FINETUNE)
