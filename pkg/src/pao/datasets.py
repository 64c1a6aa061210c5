"""(SINR sweep, position) datasets: twin-generated, experimental-layout, and file I/O."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import csv
import json
from pathlib import Path

import numpy as np

from .channel import sweep_powers
from .codebook import Codebook, beam_subset_indices, build_codebook
from .scene import Scene


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    sinr_db: np.ndarray             # (n, S)
    positions: np.ndarray           # (n, 3(K+1)) ordered p_0, p_1, ..., p_K
    groups: np.ndarray | None = None  # (n,) location labels, if any
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sinr_db = np.asarray(self.sinr_db, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.sinr_db.ndim != 2 or self.positions.ndim != 2 or len(self.sinr_db) != len(self.positions):
            raise DatasetError("sinr and position tables must be 2-D with matching rows")
        if self.positions.shape[1] % 3:
            raise DatasetError("position columns must come in xyz triples")
        if self.groups is not None:
            self.groups = np.asarray(self.groups)
            if len(self.groups) != len(self.sinr_db):
                raise DatasetError("group labels must match the sample count")

    def __len__(self) -> int:
        return len(self.sinr_db)

    @property
    def s(self) -> int:
        return self.sinr_db.shape[1]

    @property
    def k(self) -> int:
        return self.positions.shape[1] // 3 - 1

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.sinr_db[idx], self.positions[idx],
                       None if self.groups is None else self.groups[idx], dict(self.meta))

    def subset_beams(self, s: int, cb: Codebook | None = None) -> "Dataset":
        """Columns of the first ``s`` measurement beams from a full-codebook dataset."""
        cb = cb or build_codebook()
        if self.s != len(cb):
            raise DatasetError(f"beam subsetting needs all {len(cb)} codebook columns, have {self.s}")
        idx = beam_subset_indices(cb, s)
        meta = dict(self.meta, S=s, beam_index=idx)
        return Dataset(self.sinr_db[:, idx], self.positions, self.groups, meta)

    def concat(self, other: "Dataset") -> "Dataset":
        g = None
        if self.groups is not None and other.groups is not None:
            g = np.concatenate([self.groups, other.groups])
        return Dataset(np.vstack([self.sinr_db, other.sinr_db]), np.vstack([self.positions, other.positions]),
                       g, dict(self.meta))

    # -- files ----------------------------------------------------------------

    def header(self) -> list[str]:
        cols = [f"sinr_db_{i}" for i in range(self.s)]
        for j in range(self.k + 1):
            cols += [f"x{j}", f"y{j}", f"z{j}"]
        if self.groups is not None:
            cols.append("location")
        return cols

    def save(self, path: str | Path) -> None:
        """CSV table plus a ``.json`` sidecar with the metadata."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for i in range(len(self)):
                row = [f"{v:.10g}" for v in self.sinr_db[i]] + [f"{v:.10g}" for v in self.positions[i]]
                if self.groups is not None:
                    row.append(str(self.groups[i]))
                w.writerow(row)
        path.with_suffix(".json").write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        path = Path(path)
        with path.open() as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise DatasetError(f"{path} is empty")
        head, body = rows[0], rows[1:]
        s = sum(1 for c in head if c.startswith("sinr_db_"))
        has_group = head[-1] == "location"
        npos = len(head) - s - int(has_group)
        arr = np.array([[float(v) for v in r[:s + npos]] for r in body]).reshape(len(body), s + npos)
        groups = np.array([int(r[-1]) for r in body]) if has_group else None
        side = path.with_suffix(".json")
        meta = json.loads(side.read_text()) if side.exists() else {}
        return cls(arr[:, :s], arr[:, s:], groups, meta)


def sample_positions(scene: Scene, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform STA and interferer placements over the scene's sampling rectangle."""
    (x0, x1), (y0, y1), z = scene.sample_region
    if not (x1 > x0 and y1 > y0):
        raise DatasetError("invalid sampling rectangle")
    m = scene.k + 1
    xy = rng.uniform([x0, y0], [x1, y1], size=(n, m, 2))
    pos = np.concatenate([xy, np.full((n, m, 1), z)], axis=2)
    return pos.reshape(n, 3 * m)


def sweep_table(scene: Scene, positions: np.ndarray, cb: Codebook, noise_db: float = 0.0,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """SINR (dB) of every codebook beam for each placement row."""
    p = positions.reshape(len(positions), -1, 3)
    az, el = cb.grid_rad()
    ps, pin = sweep_powers(scene, p[:, 0], p[:, 1:], az, el)
    if noise_db > 0:
        ps = ps * 10.0 ** (rng.normal(0.0, noise_db, size=ps.shape) / 10.0)
        pin = pin * 10.0 ** (rng.normal(0.0, noise_db, size=pin.shape) / 10.0)
    return 10.0 * np.log10(ps / pin)


def gen_dataset(scene: Scene, n: int, s: int | None = None, seed: int = 0,
                cb: Codebook | None = None, noise_db: float = 0.0) -> Dataset:
    """Twin dataset of ``n`` random placements swept over the measurement beams.

    With ``s=None`` every codebook beam is kept (columns in codebook order)
    so that :meth:`Dataset.subset_beams` can derive any smaller ``S``.
    """
    if n < 1:
        raise DatasetError("need at least one sample")
    cb = cb or build_codebook()
    rng = np.random.default_rng(seed)
    pos = sample_positions(scene, n, rng)
    table = sweep_table(scene, pos, cb, noise_db, np.random.default_rng([seed, 1]))
    meta = {"S": len(cb), "K": scene.k, "scene": scene.digest(), "seed": seed, "noise_db": noise_db,
            "beam_index": list(range(len(cb)))}
    ds = Dataset(table, pos, None, meta)
    return ds if s is None else ds.subset_beams(s, cb)


def experimental_layout(scene: Scene, n_per_row: int = 15, spacing: float = 0.1,
                        row_gap: float = 1.0) -> tuple[np.ndarray, list[str]]:
    """The 30 measurement spots: rows A and B along the long sides of a rectangle.

    The rectangle is centered on the sampling region; rows run along x.
    """
    (x0, x1), (y0, y1), z = scene.sample_region
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    xs = cx + spacing * (np.arange(n_per_row) - 0.5 * (n_per_row - 1))
    pts, labels = [], []
    for name, y in (("A", cy - 0.5 * row_gap), ("B", cy + 0.5 * row_gap)):
        for i, x in enumerate(xs, start=1):
            pts.append((x, y, z))
            labels.append(f"{name}{i}")
    return np.array(pts), labels


def gen_experimental(truth: Scene, seed: int = 0, n_sweeps: int = 20, noise_db: float = 1.0,
                     cb: Codebook | None = None) -> Dataset:
    """Stand-in for the measured campaign: repeated noisy sweeps at 30 fixed spots.

    The interferers stay at their scene positions; the STA visits each
    layout point and ``n_sweeps`` full-codebook sweeps are recorded there.
    """
    cb = cb or build_codebook()
    spots, labels = experimental_layout(truth)
    ints = np.concatenate([n.position for n in truth.interferers])
    pos = np.array([np.concatenate([p, ints]) for p in spots for _ in range(n_sweeps)])
    groups = np.repeat(np.arange(len(spots)), n_sweeps)
    table = sweep_table(truth, pos, cb, noise_db, np.random.default_rng([seed, 2]))
    meta = {"S": len(cb), "K": truth.k, "scene": truth.digest(), "seed": seed, "noise_db": noise_db,
            "beam_index": list(range(len(cb))), "locations": labels}
    return Dataset(table, pos, groups, meta)
