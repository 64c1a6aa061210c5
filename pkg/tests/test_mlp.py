import numpy as np
import pytest

from pao.mlp import (FINETUNE, MlpModel, TrainConfig, TrainingError, box_output_norm, fit, forward,
                     init_mlp, sinr_input_norm)

from gradcheck import max_relative_error


def small_model(seed=0, s=5):
    return init_mlp([s, 16, 16, 8, 6], sinr_input_norm(), box_output_norm((0, 0, 0), (10, 6.5, 3), 2), seed)


def toy_data(n=256, s=5, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.uniform([1, 1, 0.9, 1, 1, 0.9], [9, 5, 0.9, 9, 5, 0.9], (n, 6))
    w = rng.normal(size=(6, s))
    return y @ w, y


class TestGradients:
    @pytest.mark.parametrize("seed", [0, 1])
    def test_relu_network(self, seed):
        assert max(max_relative_error(seed)) < 1e-4

    def test_tanh_network(self):
        assert max(max_relative_error(3, activation="tanh")) < 1e-4


class TestModel:
    def test_shapes(self):
        m = small_model()
        assert m.sizes == [5, 16, 16, 8, 6]
        assert forward(m, np.zeros(5)).shape == (6,)
        assert forward(m, np.zeros((3, 5))).shape == (3, 6)
        with pytest.raises(ValueError):
            forward(m, np.zeros(4))

    def test_norm_round_trip(self):
        n = box_output_norm((0, 0, 0), (10, 6.5, 3), 2)
        y = np.array([[1.0, 2.0, 0.9, 9.0, 6.0, 2.5]])
        np.testing.assert_allclose(n.denormalize(n.normalize(y)), y)
        assert np.all((n.normalize(y) >= 0) & (n.normalize(y) <= 1))

    def test_input_clipped(self):
        n = sinr_input_norm()
        np.testing.assert_allclose(n.normalize([-100.0, 100.0]), [-1.0, 1.0])

    def test_save_load(self, tmp_path):
        m = small_model(4)
        m.meta["S"] = 5
        m.save(tmp_path / "m.json")
        back = MlpModel.load(tmp_path / "m.json")
        x = np.random.default_rng(0).normal(size=(7, 5)) * 10
        assert np.array_equal(forward(m, x), forward(back, x))
        assert back.meta == {"S": 5}

    def test_deterministic_init(self):
        a, b = small_model(9), small_model(9)
        assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))


class TestTraining:
    def test_loss_decreases(self):
        x, y = toy_data()
        _, trace = fit(small_model(), x, y, TrainConfig(epochs=40, batch_size=32, lr=3e-3))
        assert trace[-1] < 0.2 * trace[0]

    def test_reproducible(self):
        x, y = toy_data()
        cfg = TrainConfig(epochs=3, batch_size=32, seed=2)
        a, ta = fit(small_model(), x, y, cfg)
        b, tb = fit(small_model(), x, y, cfg)
        assert ta == tb
        assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))

    def test_input_untouched(self):
        x, y = toy_data()
        m = small_model()
        before = [p.copy() for p in m.params()]
        fit(m, x, y, TrainConfig(epochs=1))
        assert all(np.array_equal(p, q) for p, q in zip(before, m.params()))

    @pytest.mark.parametrize("frozen", [1, 2, 3])
    def test_frozen_layers_bit_identical(self, frozen):
        x, y = toy_data()
        m = small_model()
        tuned, _ = fit(m, x, y, FINETUNE, frozen_layers=frozen)
        for i, (a, b) in enumerate(zip(m.layers, tuned.layers)):
            same = np.array_equal(a.W, b.W) and np.array_equal(a.b, b.b)
            assert same == (i < frozen)
        assert tuned.frozen[:frozen] == (True,) * frozen

    def test_cannot_freeze_all(self):
        x, y = toy_data()
        with pytest.raises(TrainingError):
            fit(small_model(), x, y, FINETUNE, frozen_layers=4)

    def test_empty(self):
        with pytest.raises(TrainingError):
            fit(small_model(), np.zeros((0, 5)), np.zeros((0, 6)), FINETUNE)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reported(self):
        x, y = toy_data()
        with pytest.raises(TrainingError):
            fit(small_model(), x * 1e300, y * 1e300, TrainConfig(epochs=2, lr=1e300))
