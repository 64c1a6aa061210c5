"""Quantized relay beam codebooks and the measurement subsets fed to the localizer."""

from __future__ import annotations

from dataclasses import dataclass
import csv
import io
import math

import numpy as np

from .array import Angles

DEFAULT_ELEVATIONS_DEG = (18.0, 0.0, -18.0)
# Rows are consumed in this order when a measurement subset outgrows one row.
SUBSET_ROW_ORDER_DEG = (0.0, 18.0, -18.0)


class CodebookError(ValueError):
    pass


@dataclass(frozen=True)
class Codebook:
    """Cartesian product of elevations (row-major) and ascending azimuths."""
    az_deg: tuple[float, ...]
    el_deg: tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.el_deg)

    @property
    def n_az(self) -> int:
        return len(self.az_deg)

    def __len__(self) -> int:
        return self.m * self.n_az

    @property
    def entries(self) -> list[Angles]:
        return [Angles.deg(a, e) for e in self.el_deg for a in self.az_deg]

    def index(self, row: int, col: int) -> int:
        return row * self.n_az + col

    def grid_deg(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (az, el) arrays in codebook order, degrees."""
        el, az = np.meshgrid(self.el_deg, self.az_deg, indexing="ij")
        return az.ravel(), el.ravel()

    def grid_rad(self) -> tuple[np.ndarray, np.ndarray]:
        az, el = self.grid_deg()
        return np.radians(az), np.radians(el)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "az_deg", "el_deg"])
        for i, (a, e) in enumerate(zip(*self.grid_deg())):
            w.writerow([i, f"{a:.6g}", f"{e:.6g}"])
        return buf.getvalue()


def build_codebook(az_min: float = -54.0, az_max: float = 54.0, az_step: float = 5.4,
                   elevations=DEFAULT_ELEVATIONS_DEG) -> Codebook:
    """Uniform azimuth grid (degrees) crossed with the given elevation list."""
    elevations = tuple(float(e) for e in elevations)
    if not elevations:
        raise CodebookError("empty elevation list")
    if az_step <= 0:
        raise CodebookError("azimuth step must be positive")
    if az_max < az_min:
        raise CodebookError("empty azimuth range")
    n = int(math.floor((az_max - az_min) / az_step + 1e-9)) + 1
    az = az_min + az_step * np.arange(n)
    az[np.abs(az) < 1e-9] = 0.0
    if len(set(elevations)) != len(elevations):
        raise CodebookError("duplicate elevations")
    return Codebook(tuple(float(round(a, 10)) for a in az), elevations)


def _row_picks(n_az: int, s: int) -> list[int]:
    if s == 1:
        return [(n_az - 1) // 2]
    return sorted({int(math.floor(i * (n_az - 1) / (s - 1) + 0.5)) for i in range(s)})


def beam_subset_indices(cb: Codebook, s: int) -> list[int]:
    """Codebook indices of the first ``s`` measurement beams.

    The 0 deg row fills first with uniformly spread azimuths (both ends
    included once s >= 2); further beams spill into the +18 deg and then the
    -18 deg rows with the same spreading rule.  Rows missing from the
    codebook are skipped; rows not named in the preferred order come last.
    """
    if not 1 <= s <= len(cb):
        raise CodebookError(f"subset size {s} outside [1, {len(cb)}]")
    rows = [cb.el_deg.index(e) for e in SUBSET_ROW_ORDER_DEG if e in cb.el_deg]
    rows += [r for r in range(cb.m) if r not in rows]
    out = []
    left = s
    for r in rows:
        take = min(left, cb.n_az)
        if take == 0:
            break
        out.extend(cb.index(r, c) for c in _row_picks(cb.n_az, take))
        left -= take
    return out


def beam_subset(cb: Codebook, s: int) -> list[Angles]:
    entries = cb.entries
    return [entries[i] for i in beam_subset_indices(cb, s)]
