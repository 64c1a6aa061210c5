"""Beam-sweep measurements and the relay's measurement/communication switching."""

from __future__ import annotations

from dataclasses import dataclass, field
import csv
import io

import numpy as np

from .array import Angles
from .channel import SinrModel
from .scene import Scene

MEASUREMENT = "measurement"
COMMUNICATION = "communication"


class ModeError(RuntimeError):
    pass


@dataclass(frozen=True)
class MeasurementVector:
    beams: tuple[Angles, ...]
    sinr_db: np.ndarray
    p_signal_w: np.ndarray
    p_noise_interf_w: np.ndarray

    def __len__(self) -> int:
        return len(self.beams)

    def to_csv_rows(self, scene_id: str = "") -> list[list]:
        to_dbm = lambda w: 10.0 * np.log10(w) + 30.0
        return [[scene_id, i, f"{b.az_deg:.6f}", f"{b.el_deg:.6f}", f"{to_dbm(ps):.6f}",
                 f"{to_dbm(pin):.6f}", f"{g:.6f}"]
                for i, (b, ps, pin, g) in enumerate(zip(self.beams, self.p_signal_w,
                                                         self.p_noise_interf_w, self.sinr_db))]


SWEEP_CSV_HEADER = ["scene_id", "beam", "az_deg", "el_deg", "p_signal_dbm", "p_interf_noise_dbm", "sinr_db"]


def sweep_csv(vectors: list[tuple[str, MeasurementVector]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_CSV_HEADER)
    for sid, mv in vectors:
        w.writerows(mv.to_csv_rows(sid))
    return buf.getvalue()


@dataclass(frozen=True)
class RelayState:
    """Switching-control record: current mode and the configuration applied to the RF chain."""
    mode: str = MEASUREMENT
    applied: Angles | None = None

    def __post_init__(self):
        if self.mode not in (MEASUREMENT, COMMUNICATION):
            raise ModeError(f"unknown relay mode {self.mode!r}")


def mode_switch(state: RelayState, apply: Angles | None = None) -> RelayState:
    """Toggle between measurement and communication mode.

    Entering communication mode optionally applies a new beam; the applied
    configuration is kept when returning to measurement mode.
    """
    if state.mode == MEASUREMENT:
        return RelayState(COMMUNICATION, apply if apply is not None else state.applied)
    return RelayState(MEASUREMENT, state.applied)


def _noisy(p: np.ndarray, noise_db: float, rng: np.random.Generator | None) -> np.ndarray:
    if noise_db <= 0:
        return p
    if rng is None:
        raise ValueError("measurement noise needs an rng")
    return p * 10.0 ** (rng.normal(0.0, noise_db, size=p.shape) / 10.0)


def sweep_model(model: SinrModel, beams, noise_db: float = 0.0,
                rng: np.random.Generator | None = None,
                state: RelayState | None = None) -> MeasurementVector:
    """Sweep ``beams`` over a frozen-position model.

    Each power reading gets independent zero-mean Gaussian noise of
    ``noise_db`` standard deviation in the dB domain.
    """
    if state is not None and state.mode != MEASUREMENT:
        raise ModeError("relay is in communication mode; sweeps are disabled")
    beams = tuple(beams)
    if not beams:
        raise ValueError("empty beam list")
    az = np.array([b.az for b in beams])
    el = np.array([b.el for b in beams])
    ps = _noisy(np.atleast_1d(model.signal_power(az, el)), noise_db, rng)
    pin = _noisy(np.atleast_1d(model.interference_power(az, el)), noise_db, rng)
    with np.errstate(divide="ignore"):
        g = 10.0 * np.log10(ps / pin)
    return MeasurementVector(beams, g, ps, pin)


def sweep(scene: Scene, beams, noise_db: float = 0.0, rng: np.random.Generator | None = None,
          state: RelayState | None = None) -> MeasurementVector:
    """Measure signal and interference-plus-noise power per beam at the true positions."""
    return sweep_model(SinrModel(scene), beams, noise_db, rng, state)


@dataclass
class GroundTruth:
    """Stand-in for the physical testbed.

    Holds a hidden scene and charges one real measurement per swept beam.
    ``true_sinr_db`` is the uncharged scoring oracle used only to report
    results.
    """
    scene: Scene
    noise_db: float = 1.0
    seed: int = 0
    charges: int = 0
    _model: SinrModel | None = field(default=None, repr=False)
    _rng: np.random.Generator | None = field(default=None, repr=False)

    def __post_init__(self):
        self._model = SinrModel(self.scene)
        self._rng = np.random.default_rng(self.seed)

    def measure(self, beams, state: RelayState | None = None) -> MeasurementVector:
        mv = sweep_model(self._model, beams, self.noise_db, self._rng, state)
        self.charges += len(mv)
        return mv

    def measure_one(self, theta: Angles) -> float:
        return float(self.measure([theta]).sinr_db[0])

    def true_sinr_db(self, theta: Angles) -> float:
        return float(self._model.sinr_db(theta.az, theta.el))
