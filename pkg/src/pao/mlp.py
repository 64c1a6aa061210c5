"""Fully connected network with hand-written backpropagation and Adam.

Everything operates on row-major batches: inputs ``(n, B_0)``, outputs
``(n, B_L)``.  Layer ``l`` computes ``g_l(F W_l^T + b_l)``.  Inputs and
targets pass through affine normalizers so training runs on O(1) values;
the loss minimized is the mean over samples of the squared Euclidean error
in normalized coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import json
import math
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")


class TrainingError(RuntimeError):
    pass


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _dact(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass(frozen=True)
class Affine:
    """``normalize(x) = (clip(x) - shift) / scale``; clipping only if bounds are set."""
    shift: np.ndarray
    scale: np.ndarray
    clip_lo: float | None = None
    clip_hi: float | None = None

    def normalize(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.clip_lo is not None:
            x = np.clip(x, self.clip_lo, self.clip_hi)
        return (x - self.shift) / self.scale

    def denormalize(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.scale + self.shift

    def to_dict(self) -> dict:
        return {"shift": np.asarray(self.shift).tolist(), "scale": np.asarray(self.scale).tolist(),
                "clip_lo": self.clip_lo, "clip_hi": self.clip_hi}

    @classmethod
    def from_dict(cls, d: dict) -> "Affine":
        return cls(np.asarray(d["shift"], dtype=float), np.asarray(d["scale"], dtype=float),
                   d.get("clip_lo"), d.get("clip_hi"))


def sinr_input_norm(lo_db: float = -40.0, hi_db: float = 50.0) -> Affine:
    """Clip SINR (dB) to [lo, hi] and map it onto [-1, 1]."""
    return Affine(np.array(0.5 * (lo_db + hi_db)), np.array(0.5 * (hi_db - lo_db)), lo_db, hi_db)


def box_output_norm(lo, hi, n_points: int) -> Affine:
    """Map stacked 3-D points onto [0, 1] per coordinate of the box [lo, hi]."""
    lo = np.tile(np.asarray(lo, dtype=float), n_points)
    hi = np.tile(np.asarray(hi, dtype=float), n_points)
    return Affine(lo, hi - lo)


@dataclass
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: str = "relu"


@dataclass
class MlpModel:
    layers: list[Layer]
    input_norm: Affine
    output_norm: Affine
    frozen: tuple[bool, ...] = ()
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for prev, nxt in zip(self.layers[:-1], self.layers[1:]):
            if nxt.W.shape[1] != prev.W.shape[0]:
                raise ValueError("layer dimensions do not chain")
        if self.layers[-1].activation != "linear":
            raise ValueError("output layer must be linear")
        if not self.frozen:
            self.frozen = (False,) * len(self.layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def n_out(self) -> int:
        return self.layers[-1].W.shape[0]

    @property
    def sizes(self) -> list[int]:
        return [self.n_in] + [l.W.shape[0] for l in self.layers]

    def copy(self) -> "MlpModel":
        return replace(self, layers=[Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers],
                       meta=dict(self.meta))

    def params(self) -> list[np.ndarray]:
        out = []
        for l in self.layers:
            out += [l.W, l.b]
        return out

    # -- persistence ------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "layers": [{"W": l.W.tolist(), "b": l.b.tolist(), "activation": l.activation} for l in self.layers],
            "input_norm": self.input_norm.to_dict(),
            "output_norm": self.output_norm.to_dict(),
            "frozen": list(self.frozen),
            "seed": self.seed,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        layers = [Layer(np.asarray(l["W"], dtype=float), np.asarray(l["b"], dtype=float), l["activation"])
                  for l in d["layers"]]
        return cls(layers, Affine.from_dict(d["input_norm"]), Affine.from_dict(d["output_norm"]),
                   tuple(d.get("frozen", ())), d.get("seed"), d.get("meta", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "MlpModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_mlp(sizes, input_norm: Affine, output_norm: Affine, seed: int = 0,
             hidden_activation: str = "relu") -> MlpModel:
    """He-initialized network with the given layer widths (input first)."""
    if hidden_activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {hidden_activation!r}")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        std = math.sqrt((1.0 if last else 2.0) / fan_in)
        layers.append(Layer(rng.normal(0.0, std, size=(fan_out, fan_in)), np.zeros(fan_out),
                            "linear" if last else hidden_activation))
    return MlpModel(layers, input_norm, output_norm, seed=seed)


def forward_normalized(model: MlpModel, xn: np.ndarray) -> tuple[np.ndarray, list]:
    """Network output in normalized coordinates plus the cache for backprop."""
    cache = []
    a = xn
    for l in model.layers:
        z = a @ l.W.T + l.b
        out = _act(l.activation, z)
        cache.append((a, z, out))
        a = out
    return a, cache


def forward(model: MlpModel, x) -> np.ndarray:
    """Positions predicted from SINR measurements; accepts (S,) or (n, S)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    if xb.shape[1] != model.n_in:
        raise ValueError(f"expected {model.n_in} inputs, got {xb.shape[1]}")
    y, _ = forward_normalized(model, model.input_norm.normalize(xb))
    y = model.output_norm.denormalize(y)
    return y[0] if single else y


def backward(model: MlpModel, cache: list, dy: np.ndarray) -> list[np.ndarray]:
    """Gradients [dW_1, db_1, ..., dW_L, db_L] given dLoss/dOutput."""
    grads: list[np.ndarray] = []
    delta = dy
    for l, (a_in, z, a_out) in zip(reversed(model.layers), reversed(cache)):
        dz = delta * _dact(l.activation, z, a_out)
        grads.append(dz.sum(axis=0))
        grads.append(dz.T @ a_in)
        delta = dz @ l.W
    grads.reverse()
    return grads


def loss_and_grads(model: MlpModel, xn: np.ndarray, yn: np.ndarray) -> tuple[float, list[np.ndarray]]:
    out, cache = forward_normalized(model, xn)
    err = out - yn
    n = len(xn)
    loss = float(np.sum(err * err) / n)
    return loss, backward(model, cache, 2.0 * err / n)


def normalized_loss(model: MlpModel, xn: np.ndarray, yn: np.ndarray) -> float:
    out, _ = forward_normalized(model, xn)
    return float(np.sum((out - yn) ** 2) / len(xn))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


PRETRAIN = TrainConfig()
FINETUNE = TrainConfig(epochs=30, batch_size=64, lr=1e-4)


class Adam:
    def __init__(self, params: list[np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], active: list[bool]) -> None:
        c = self.cfg
        self.t += 1
        b1t = 1.0 - c.beta1 ** self.t
        b2t = 1.0 - c.beta2 ** self.t
        for p, g, m, v, on in zip(params, grads, self.m, self.v, active):
            if not on:
                continue
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.lr * (m / b1t) / (np.sqrt(v / b2t) + c.eps)


def fit(model: MlpModel, x: np.ndarray, y: np.ndarray, cfg: TrainConfig,
        frozen_layers: int = 0) -> tuple[MlpModel, list[float]]:
    """Mini-batch Adam on raw (x, y); returns a trained copy and per-epoch mean loss.

    The first ``frozen_layers`` layers keep their weights bit-for-bit.
    """
    if not 0 <= frozen_layers < len(model.layers):
        raise TrainingError("cannot freeze every layer")
    if len(x) == 0:
        raise TrainingError("empty training set")
    model = model.copy()
    model.frozen = tuple(i < frozen_layers for i in range(len(model.layers)))
    xn = model.input_norm.normalize(x)
    yn = model.output_norm.normalize(y)
    params = model.params()
    active = [not model.frozen[i // 2] for i in range(len(params))]
    opt = Adam(params, cfg)
    rng = np.random.default_rng(cfg.seed)
    trace = []
    n = len(xn)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(model, xn[idx], yn[idx])
            if not math.isfinite(loss):
                raise TrainingError("training diverged (non-finite loss)")
            total += loss * len(idx)
            if cfg.lr > 0:
                opt.step(params, grads, active)
        trace.append(total / n)
    return model, trace
