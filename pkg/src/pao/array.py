"""Uniform planar arrays, steering vectors and link geometry.

Two angle conventions live here:

* world angles ``(az, el)``: azimuth in the xy-plane from +x toward +y,
  elevation above the horizon (what :func:`link_angles` returns);
* array-local angles: ``az`` is measured around the boresight axis and ``el``
  is the polar angle away from boresight.  These are the angles the steering
  law consumes, so broadside is ``(0, 0)``.

Beam directions (codebook entries, optimizer variables) are expressed as
horizon-referenced offsets from the array boresight and go through
:func:`beam_weights`.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

C0 = 299_792_458.0
F0_DEFAULT = 60.48e9


class GeometryError(ValueError):
    pass


def _wrap(a: float) -> float:
    """Wrap to [-pi, pi] with -pi normalized to +pi."""
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a = math.pi
    return a


@dataclass(frozen=True)
class Angles:
    az: float
    el: float

    def __post_init__(self):
        if not (-math.pi - 1e-12 <= self.az <= math.pi + 1e-12):
            raise GeometryError(f"azimuth {self.az} outside [-pi, pi]")
        if not (-math.pi / 2 - 1e-12 <= self.el <= math.pi / 2 + 1e-12):
            raise GeometryError(f"elevation {self.el} outside [-pi/2, pi/2]")

    @classmethod
    def deg(cls, az: float, el: float) -> "Angles":
        return cls(math.radians(az), math.radians(el))

    @property
    def az_deg(self) -> float:
        return math.degrees(self.az)

    @property
    def el_deg(self) -> float:
        return math.degrees(self.el)

    def unit(self) -> np.ndarray:
        """World-frame unit vector for horizon-referenced angles."""
        ce = math.cos(self.el)
        return np.array([ce * math.cos(self.az), ce * math.sin(self.az), math.sin(self.el)])


@dataclass(frozen=True)
class UpaGeometry:
    nx: int
    ny: int
    dx: float
    dy: float
    boresight: tuple[float, float, float] = (1.0, 0.0, 0.0)
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise GeometryError("array needs at least one element per axis")
        if self.dx <= 0 or self.dy <= 0:
            raise GeometryError("element spacing must be positive")
        b = np.asarray(self.boresight, dtype=float)
        if abs(np.linalg.norm(b) - 1.0) > 1e-12:
            raise GeometryError("boresight must be a unit vector")

    @property
    def n(self) -> int:
        return self.nx * self.ny

    @classmethod
    def half_wavelength(cls, nx: int, ny: int, wavelength: float,
                        boresight=(1.0, 0.0, 0.0), position=(0.0, 0.0, 0.0)) -> "UpaGeometry":
        return cls(nx, ny, wavelength / 2, wavelength / 2,
                   tuple(float(v) for v in unit_vector(boresight)),
                   tuple(float(v) for v in position))

    def pointed(self, boresight, position=None) -> "UpaGeometry":
        """Copy with a new orientation (and optionally a new position)."""
        pos = self.position if position is None else tuple(float(v) for v in position)
        return UpaGeometry(self.nx, self.ny, self.dx, self.dy,
                           tuple(float(v) for v in unit_vector(boresight)), pos)

    def frame(self) -> np.ndarray:
        """Rows: forward (boresight), left, up; a right-handed orthonormal basis.

        The local steering axes are x = -up and y = left, so the ``ny``
        elements lie horizontally and ``nx`` vertically.
        """
        f = np.asarray(self.boresight, dtype=float)
        left = np.cross([0.0, 0.0, 1.0], f)
        nrm = np.linalg.norm(left)
        if nrm < 1e-9:
            # boresight along +-z: horizontal reference is arbitrary
            left = np.array([0.0, 1.0, 0.0])
        else:
            left = left / nrm
        up = np.cross(f, left)
        return np.vstack([f, left, up])


def unit_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise GeometryError("zero-length direction")
    return v / n


def wavelength_of(freq_hz: float) -> float:
    return C0 / freq_hz


def element_phase_coeffs(geom: UpaGeometry, wavelength: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-element multipliers of the two direction cosines, flattened x-fastest."""
    ix = np.tile(np.arange(geom.nx), geom.ny)
    iy = np.repeat(np.arange(geom.ny), geom.nx)
    k = 2.0 * np.pi / wavelength
    return k * geom.dx * ix, k * geom.dy * iy


def steering_vector(geom: UpaGeometry, angles: Angles, wavelength: float) -> np.ndarray:
    """Array response for array-local angles.

    Element ``n = ny_idx * nx + nx_idx`` gets phase
    ``2*pi/lambda * (dx*nx_idx*sin(el)*cos(az) + dy*ny_idx*sin(el)*sin(az))``.
    """
    if wavelength <= 0:
        raise GeometryError("wavelength must be positive")
    cx, cy = element_phase_coeffs(geom, wavelength)
    u = math.sin(angles.el) * math.cos(angles.az)
    v = math.sin(angles.el) * math.sin(angles.az)
    return np.exp(1j * (cx * u + cy * v))


def steering_from_cosines(geom: UpaGeometry, u: np.ndarray, v: np.ndarray,
                          wavelength: float) -> np.ndarray:
    """Vectorized steering law from local direction cosines; returns (m, N)."""
    cx, cy = element_phase_coeffs(geom, wavelength)
    u = np.asarray(u, dtype=float)[..., None]
    v = np.asarray(v, dtype=float)[..., None]
    return np.exp(1j * (u * cx + v * cy))


def local_cosines(geom: UpaGeometry, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Direction cosines of world unit vectors on the local steering axes."""
    fr = geom.frame()
    dirs = np.asarray(dirs, dtype=float)
    return -(dirs @ fr[2]), dirs @ fr[1]


def link_angles(pa, pb) -> Angles:
    """World angles of the direction from ``pa`` toward ``pb``."""
    d = np.asarray(pb, dtype=float) - np.asarray(pa, dtype=float)
    r = float(np.linalg.norm(d))
    if r < 1e-9:
        raise GeometryError("coincident points have no link direction")
    el = math.atan2(d[2], math.hypot(d[0], d[1]))
    az = _wrap(math.atan2(d[1], d[0]))
    return Angles(az, el)


def to_local_frame(angles_world: Angles, geom: UpaGeometry) -> Angles:
    """Express a world direction as (azimuth about boresight, polar angle).

    Directions behind the array fold onto their front mirror image, which a
    planar array cannot distinguish anyway (identical steering vector).
    """
    d = angles_world.unit()
    fr = geom.frame()
    fwd = float(d @ fr[0])
    u = float(-(d @ fr[2]))
    v = float(d @ fr[1])
    s = math.hypot(u, v)
    polar = math.atan2(s, abs(fwd))
    az = 0.0 if s < 1e-15 else _wrap(math.atan2(v, u))
    return Angles(az, polar)


def from_local_frame(angles_local: Angles, geom: UpaGeometry) -> Angles:
    """Inverse of :func:`to_local_frame` for front-hemisphere directions."""
    fr = geom.frame()
    sp = math.sin(angles_local.el)
    u = sp * math.cos(angles_local.az)
    v = sp * math.sin(angles_local.az)
    d = math.cos(angles_local.el) * fr[0] + v * fr[1] - u * fr[2]
    el = math.asin(max(-1.0, min(1.0, d[2])))
    return Angles(_wrap(math.atan2(d[1], d[0])), el)


def beam_direction(geom: UpaGeometry, beam: Angles) -> np.ndarray:
    """World unit vector of a boresight-relative beam (az right-left, el up-down)."""
    fr = geom.frame()
    ce = math.cos(beam.el)
    return ce * math.cos(beam.az) * fr[0] + ce * math.sin(beam.az) * fr[1] + math.sin(beam.el) * fr[2]


def beam_weights(geom: UpaGeometry, az, el, wavelength: float) -> np.ndarray:
    """Steering vectors for boresight-relative beams; ``az``/``el`` in radians.

    Accepts scalars or equal-shape arrays and returns shape ``(..., N)``.
    """
    az = np.asarray(az, dtype=float)
    el = np.asarray(el, dtype=float)
    return steering_from_cosines(geom, -np.sin(el), np.cos(el) * np.sin(az), wavelength)


@dataclass(frozen=True)
class RelayPhaseMatrix:
    matrix: np.ndarray
    amplification: float


def relay_phase_matrix(w_out: np.ndarray, w_in: np.ndarray, amplification: float = 1.0) -> RelayPhaseMatrix:
    """Rank-one relay configuration ``A * w_out * w_in^H``."""
    if amplification <= 0:
        raise GeometryError("amplification must be positive")
    m = amplification * np.outer(np.asarray(w_out), np.conj(np.asarray(w_in)))
    m.setflags(write=False)
    return RelayPhaseMatrix(m, float(amplification))
