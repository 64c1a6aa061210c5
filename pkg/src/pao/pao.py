"""The closed loop: sweep -> positions -> twin-driven beam optimization."""

from __future__ import annotations

import numpy as np

from .array import Angles
from .channel import DimensionError, SinrModel
from .measurement import MeasurementVector
from .mlp import MlpModel, forward
from .optim import OptimizerConfig, PaoResult, grid_optimize, optimize
from .scene import Scene


def twin_objective(twin: Scene, positions) -> SinrModel:
    """Twin SINR (dB) as a function of the relay beam for stacked positions p_0..p_K."""
    p = np.asarray(positions, dtype=float).reshape(-1, 3)
    if len(p) != twin.k + 1:
        raise DimensionError(f"expected {twin.k + 1} positions, got {len(p)}")
    return SinrModel.at(twin, p[0], p[1:], clamp=True)


def optimize_at(twin: Scene, positions, cfg: OptimizerConfig) -> PaoResult:
    """Optimize the relay beam on the twin with nodes placed at ``positions``."""
    model = twin_objective(twin, positions)
    res = grid_optimize(model.sinr_db, cfg) if cfg.kind == "GRID" else optimize(model, cfg)
    res.positions_used = np.asarray(positions, dtype=float).reshape(-1)
    return res


def pao_loop(measurements: MeasurementVector | np.ndarray, model: MlpModel, twin: Scene,
             cfg: OptimizerConfig) -> PaoResult:
    """Predict positions from the sweep, then maximize twin SINR at those positions.

    Only the sweep touches the real system; every optimizer evaluation runs on
    the twin.  The returned ``theta_hat`` is the beam to apply in
    communication mode.
    """
    g = measurements.sinr_db if isinstance(measurements, MeasurementVector) else np.asarray(measurements)
    g = np.asarray(g, dtype=float).reshape(-1)
    if g.size != model.n_in:
        raise DimensionError(f"model expects {model.n_in} measurements, got {g.size}")
    p_hat = forward(model, g)
    return optimize_at(twin, p_hat, cfg)


def apply_beam(res: PaoResult) -> Angles:
    return res.theta_hat
