"""Image-method ray tracer for axis-aligned scenes, up to two reflections.

The core routine traces many endpoint pairs at once (``trace_batch``): for each
ordered sequence of at most two surfaces it mirrors the source, back-projects
the reflection points and validates them, returning one :class:`PathGroup`
per sequence with a boolean mask of the pairs for which that path exists.
:func:`trace_paths` is the single-pair view used by the rest of the API.
"""

from __future__ import annotations

from dataclasses import dataclass
import itertools

import numpy as np

from .array import Angles, link_angles
from .scene import Scene, Surface

_EPS = 1e-9
_BOX_SHRINK = 1e-7


@dataclass(frozen=True)
class PropPath:
    vertices: tuple[tuple[float, float, float], ...]
    surfaces: tuple[str, ...]
    gain: complex
    departure: Angles
    arrival: Angles

    @property
    def order(self) -> int:
        return len(self.vertices) - 2

    @property
    def length(self) -> float:
        v = np.asarray(self.vertices)
        return float(np.linalg.norm(np.diff(v, axis=0), axis=1).sum())


@dataclass
class PathGroup:
    """One surface sequence traced for ``n`` endpoint pairs.

    ``dep`` points from the source toward the first vertex after it, ``arr``
    from the destination back toward the last vertex before it (the direction
    the wave arrives from).
    """
    surfaces: tuple[int, ...]
    mask: np.ndarray       # (n,) bool
    length: np.ndarray     # (n,)
    gain: np.ndarray       # (n,) complex
    dep: np.ndarray        # (n, 3)
    arr: np.ndarray        # (n, 3)
    vertices: np.ndarray   # (n, order + 2, 3)


def _mirror(p: np.ndarray, s: Surface) -> np.ndarray:
    q = p.copy()
    q[:, s.axis] = 2.0 * s.coord - q[:, s.axis]
    return q


def _hit_plane(p: np.ndarray, q: np.ndarray, s: Surface) -> tuple[np.ndarray, np.ndarray]:
    """Intersection of segments p->q with the plane of ``s``; returns (point, t)."""
    den = q[:, s.axis] - p[:, s.axis]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (s.coord - p[:, s.axis]) / den
    t = np.where(np.abs(den) < 1e-15, np.nan, t)
    return p + t[:, None] * (q - p), t


def _on_rect(r: np.ndarray, s: Surface) -> np.ndarray:
    others = [a for a in range(3) if a != s.axis]
    ok = np.ones(len(r), dtype=bool)
    for j, a in enumerate(others):
        ok &= (r[:, a] >= s.lo[j] - _EPS) & (r[:, a] <= s.hi[j] + _EPS)
    return ok


def _front(p: np.ndarray, s: Surface) -> np.ndarray:
    return s.side * (p[:, s.axis] - s.coord) > _EPS


def segment_blocked(p: np.ndarray, q: np.ndarray, lo, hi) -> np.ndarray:
    """Slab test: does the open segment p->q cross the interior of box [lo, hi]?"""
    lo = np.asarray(lo, dtype=float) + _BOX_SHRINK
    hi = np.asarray(hi, dtype=float) - _BOX_SHRINK
    d = q - p
    t0 = np.zeros(len(p))
    t1 = np.ones(len(p))
    for a in range(3):
        small = np.abs(d[:, a]) < 1e-15
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo[a] - p[:, a]) / d[:, a]
            tb = (hi[a] - p[:, a]) / d[:, a]
        lo_t = np.where(small, -np.inf, np.minimum(ta, tb))
        hi_t = np.where(small, np.inf, np.maximum(ta, tb))
        inside = (p[:, a] > lo[a]) & (p[:, a] < hi[a])
        lo_t = np.where(small & ~inside, np.inf, lo_t)
        t0 = np.maximum(t0, lo_t)
        t1 = np.minimum(t1, hi_t)
    return t1 > t0 + 1e-12


def _visible(scene: Scene, pts: list[np.ndarray]) -> np.ndarray:
    ok = np.ones(len(pts[0]), dtype=bool)
    for box in scene.obstacles:
        for p, q in zip(pts[:-1], pts[1:]):
            ok &= ~segment_blocked(p, q, box.lo, box.hi)
    return ok


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=1, keepdims=True)
    return v / np.where(n < 1e-15, 1.0, n)


def trace_batch(scene: Scene, src, dst, max_order: int | None = None,
                direct: bool = True) -> list[PathGroup]:
    """Trace all specular paths of order <= ``max_order`` for each src/dst pair.

    ``src`` and ``dst`` broadcast against each other as (n, 3) arrays.
    ``direct=False`` drops the line-of-sight path (forced blockage).
    """
    max_order = scene.max_order if max_order is None else max_order
    if max_order not in (0, 1, 2):
        raise ValueError("max_order must be 0, 1 or 2")
    src = np.atleast_2d(np.asarray(src, dtype=float))
    dst = np.atleast_2d(np.asarray(dst, dtype=float))
    src, dst = np.broadcast_arrays(src, dst)
    src = src.copy()
    dst = dst.copy()
    lam = scene.wavelength
    surfs = scene.surfaces
    groups = []

    def finish(seq, mask, verts):
        seg = np.diff(verts, axis=1)
        length = np.linalg.norm(seg, axis=2).sum(axis=1)
        amp = lam / (4.0 * np.pi * np.where(length > 0, length, np.inf))
        for i in seq:
            amp = amp * surfs[i].rho
        gain = np.where(mask, amp * np.exp(-2j * np.pi * length / lam), 0.0)
        dep = _unit(verts[:, 1] - verts[:, 0])
        arr = _unit(verts[:, -2] - verts[:, -1])
        groups.append(PathGroup(tuple(seq), mask, length, gain, dep, arr, verts))

    if direct:
        mask = _visible(scene, [src, dst]) & (np.linalg.norm(dst - src, axis=1) > _EPS)
        finish((), mask, np.stack([src, dst], axis=1))

    if max_order >= 1:
        for i, s in enumerate(surfs):
            img = _mirror(src, s)
            r, t = _hit_plane(img, dst, s)
            with np.errstate(invalid="ignore"):
                mask = (_front(src, s) & _front(dst, s) & (t > 0) & (t < 1) & _on_rect(r, s))
            mask &= _visible(scene, [src, r, dst])
            finish((i,), mask, np.stack([src, r, dst], axis=1))

    if max_order >= 2:
        for i, j in itertools.permutations(range(len(surfs)), 2):
            s1, s2 = surfs[i], surfs[j]
            if s1.axis == s2.axis and s1.coord == s2.coord:
                continue
            im1 = _mirror(src, s1)
            im2 = _mirror(im1, s2)
            r2, t2 = _hit_plane(im2, dst, s2)
            r1, t1 = _hit_plane(im1, r2, s1)
            with np.errstate(invalid="ignore"):
                mask = (_front(src, s1) & _front(r2, s1) & _front(r1, s2) & _front(dst, s2)
                        & (t2 > 0) & (t2 < 1) & (t1 > 0) & (t1 < 1)
                        & _on_rect(r1, s1) & _on_rect(r2, s2))
            if not mask.any():
                continue
            mask &= _visible(scene, [src, r1, r2, dst])
            finish((i, j), mask, np.stack([src, r1, r2, dst], axis=1))
    return groups


def trace_points(scene: Scene, pa, pb, max_order: int | None = None, direct: bool = True) -> list[PropPath]:
    """Single-pair tracing between two points; returns the valid paths."""
    groups = trace_batch(scene, np.asarray(pa, dtype=float)[None], np.asarray(pb, dtype=float)[None],
                         max_order, direct)
    surfs = scene.surfaces
    out = []
    for g in groups:
        if not g.mask[0]:
            continue
        verts = g.vertices[0]
        out.append(PropPath(
            vertices=tuple(tuple(float(c) for c in v) for v in verts),
            surfaces=tuple(surfs[i].name for i in g.surfaces),
            gain=complex(g.gain[0]),
            departure=link_angles(verts[0], verts[1]),
            arrival=link_angles(verts[-1], verts[-2]),
        ))
    return out


def trace_paths(scene: Scene, a: str, b: str, max_order: int | None = None) -> list[PropPath]:
    """All specular paths from node ``a`` to node ``b`` (line of sight first)."""
    if a == b:
        raise ValueError("endpoints must differ")
    pa = scene.node(a).position
    pb = scene.node(b).position
    return trace_points(scene, pa, pb, max_order, direct=not scene.is_blocked(a, b))
