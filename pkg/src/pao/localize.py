"""Position regression from SINR sweeps: pre-training, fine-tuning and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, DatasetError
from .mlp import (FINETUNE, PRETRAIN, MlpModel, TrainConfig, TrainingError, box_output_norm, fit,
                  forward, init_mlp, sinr_input_norm)
from .scene import Scene

HIDDEN = (128, 128, 64)


def new_localizer(scene: Scene, s: int, seed: int = 0, hidden=HIDDEN) -> MlpModel:
    """Untrained S -> 3(K+1) regressor normalized to the scene's room."""
    sizes = [s, *hidden, 3 * (scene.k + 1)]
    return init_mlp(sizes, sinr_input_norm(), box_output_norm(scene.room_lo, scene.room_hi, scene.k + 1), seed)


def _check(model: MlpModel, ds: Dataset) -> None:
    if len(ds) == 0:
        raise DatasetError("empty dataset")
    if ds.s != model.n_in or ds.positions.shape[1] != model.n_out:
        raise DatasetError(f"dataset ({ds.s} -> {ds.positions.shape[1]}) does not fit model "
                           f"({model.n_in} -> {model.n_out})")


def predict(model: MlpModel, ds: Dataset) -> np.ndarray:
    _check(model, ds)
    return forward(model, ds.sinr_db)


def loss_mse(model: MlpModel, ds: Dataset) -> float:
    """Mean squared position error over the dataset, m^2."""
    err = predict(model, ds) - ds.positions
    return float(np.mean(np.sum(err * err, axis=1)))


def evaluate_rmse(model: MlpModel, ds: Dataset) -> float:
    """Root of the mean squared full-vector position error, meters."""
    return float(np.sqrt(loss_mse(model, ds)))


def per_sample_error(model: MlpModel, ds: Dataset) -> np.ndarray:
    return np.linalg.norm(predict(model, ds) - ds.positions, axis=1)


def train(model: MlpModel, ds: Dataset, cfg: TrainConfig = PRETRAIN) -> tuple[MlpModel, list[float]]:
    _check(model, ds)
    return fit(model, ds.sinr_db, ds.positions, cfg)


def fine_tune(model: MlpModel, ds: Dataset, frozen_layers: int = 2,
              cfg: TrainConfig = FINETUNE) -> tuple[MlpModel, list[float]]:
    """Update only the layers after the first ``frozen_layers`` on new data."""
    _check(model, ds)
    if frozen_layers >= len(model.layers):
        raise TrainingError("at least one layer must stay trainable")
    return fit(model, ds.sinr_db, ds.positions, cfg, frozen_layers=frozen_layers)


@dataclass(frozen=True)
class FoldResult:
    location: int
    rmse_pretrained: float
    rmse_finetuned: float


def _canonical(ds: Dataset) -> Dataset:
    """Rows sorted by (group, measurements, positions) so results ignore input order."""
    keys = (*ds.positions.T[::-1], *ds.sinr_db.T[::-1], ds.groups)
    return ds.take(np.lexsort(keys))


def leave_one_location_out(model: MlpModel, ds: Dataset, frozen_layers: int = 2,
                           cfg: TrainConfig = FINETUNE) -> list[FoldResult]:
    """Fine-tune on all locations but one, test on the held-out one, for every location.

    Results are ordered by location label, so they do not depend on row order.
    """
    if ds.groups is None:
        raise DatasetError("dataset has no location labels")
    locs = np.unique(ds.groups)
    if len(locs) < 2:
        raise DatasetError("need at least two locations")
    out = []
    for loc in locs:
        test = _canonical(ds.take(np.flatnonzero(ds.groups == loc)))
        rest = _canonical(ds.take(np.flatnonzero(ds.groups != loc)))
        tuned, _ = fine_tune(model, rest, frozen_layers, cfg)
        out.append(FoldResult(int(loc), evaluate_rmse(model, test), evaluate_rmse(tuned, test)))
    return out
