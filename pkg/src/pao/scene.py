"""Indoor scene description and its JSON file format.

A scene is an axis-aligned room (six reflecting walls) plus optional
axis-aligned box obstacles, the five kinds of radio nodes (target STA,
interferers, relay receive and transmit arrays, AP) and the link budget
parameters.  Units are meters, watts and hertz throughout.

JSON layout (see ``data/office.json`` for a complete example)::

    {
      "name": "office",
      "room": {"min": [0,0,0], "max": [10,6.5,3], "rho": 0.6},
      "obstacles": [{"name": "desk", "min": [...], "max": [...], "rho": 0.3}],
      "nodes": {
        "sta": {"position": [x,y,z], "shape": [2,8], "boresight": null, "power_w": 0.1},
        "interferers": [{...}],
        "relay_rx": {...}, "relay_tx": {...}, "ap": {...}
      },
      "carrier_hz": 60.48e9, "bandwidth_hz": 1.2e9,
      "noise_figure_db": 10.0, "noise_power_w": null, "temperature_k": 290.0,
      "amplification": 1.0, "spacing_wavelengths": 0.5, "max_order": 2,
      "blocked_links": [["sta", "ap"]],
      "sample_region": {"x": [3.4, 6.5], "y": [1.0, 2.9], "z": 0.9}
    }

``rho`` is an amplitude reflection coefficient, either one number for every
face or a mapping from face name (``x-``, ``x+``, ``y-``, ``y+``, ``z-``,
``z+``) to value.  A ``null`` boresight points the node at its link partner
(transmitters at ``relay_rx``, ``relay_tx`` at ``ap`` and vice versa).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
import hashlib
import json
from pathlib import Path

import numpy as np

from .array import UpaGeometry, unit_vector, wavelength_of

K_BOLTZMANN = 1.380649e-23
FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
FIXED_NODES = ("relay_rx", "relay_tx", "ap")
_PARTNER = {"relay_rx": None, "relay_tx": "ap", "ap": "relay_tx"}


class SceneError(ValueError):
    pass


def _direction(v) -> tuple[float, float, float]:
    # keep stored unit vectors bit-exact so save/load round-trips
    a = np.asarray(v, dtype=float)
    if abs(float(np.linalg.norm(a)) - 1.0) > 1e-12:
        a = unit_vector(a)
    return tuple(float(x) for x in a)


def _face_rhos(value, default: float) -> tuple[float, ...]:
    if value is None:
        return (default,) * 6
    if isinstance(value, (int, float)):
        return (float(value),) * 6
    return tuple(float(value.get(f, default)) for f in FACES)


@dataclass(frozen=True)
class Box:
    name: str
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    rho: tuple[float, ...] = (0.3,) * 6

    def contains(self, p, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p > np.asarray(self.lo) - margin) and np.all(p < np.asarray(self.hi) + margin))


@dataclass(frozen=True)
class Surface:
    """Axis-aligned reflecting rectangle.

    ``side`` is +1 when the reflecting half-space is ``x[axis] > coord``.
    ``lo``/``hi`` bound the two remaining axes in increasing axis order.
    """
    name: str
    axis: int
    coord: float
    lo: tuple[float, float]
    hi: tuple[float, float]
    side: int
    rho: float


@dataclass(frozen=True)
class Node:
    name: str
    position: tuple[float, float, float]
    shape: tuple[int, int] = (2, 8)
    boresight: tuple[float, float, float] | None = None
    power_w: float = 0.1


@dataclass(frozen=True)
class Scene:
    room_lo: tuple[float, float, float]
    room_hi: tuple[float, float, float]
    sta: Node
    interferers: tuple[Node, ...]
    relay_rx: Node
    relay_tx: Node
    ap: Node
    wall_rho: tuple[float, ...] = (0.6,) * 6
    obstacles: tuple[Box, ...] = ()
    carrier_hz: float = 60.48e9
    bandwidth_hz: float = 1.2e9
    noise_figure_db: float = 10.0
    noise_power_override_w: float | None = None
    temperature_k: float = 290.0
    amplification: float = 1.0
    spacing_wavelengths: float = 0.5
    max_order: int = 2
    blocked_links: frozenset = field(default_factory=frozenset)
    sample_region: tuple[tuple[float, float], tuple[float, float], float] = ((3.4, 6.5), (1.0, 2.9), 0.9)
    name: str = "scene"

    def __post_init__(self):
        if not self.interferers:
            raise SceneError("scene needs at least one interferer")
        for node in self.nodes().values():
            if not self.inside(node.position):
                raise SceneError(f"node {node.name} at {node.position} is not strictly inside the room")
        for r in self.wall_rho + tuple(r for b in self.obstacles for r in b.rho):
            if not 0.0 <= r <= 1.0:
                raise SceneError(f"reflection coefficient {r} outside [0, 1]")
        powers = [self.sta.power_w] + [n.power_w for n in self.interferers]
        if min(powers) < 0:
            raise SceneError("transmit powers must be non-negative")
        if self.noise_power <= 0:
            raise SceneError("noise power must be positive")
        if self.max_order not in (0, 1, 2):
            raise SceneError("max_order must be 0, 1 or 2")

    # -- geometry -----------------------------------------------------------

    @property
    def k(self) -> int:
        return len(self.interferers)

    @property
    def wavelength(self) -> float:
        return wavelength_of(self.carrier_hz)

    @property
    def noise_power(self) -> float:
        if self.noise_power_override_w is not None:
            return float(self.noise_power_override_w)
        return K_BOLTZMANN * self.temperature_k * self.bandwidth_hz * 10 ** (self.noise_figure_db / 10)

    def inside(self, p, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p > np.asarray(self.room_lo) + margin) and np.all(p < np.asarray(self.room_hi) - margin))

    def clamp(self, p, margin: float = 0.01) -> np.ndarray:
        """Clamp points (..., 3) into the room shrunk by ``margin``."""
        lo = np.asarray(self.room_lo) + margin
        hi = np.asarray(self.room_hi) - margin
        return np.clip(np.asarray(p, dtype=float), lo, hi)

    def nodes(self) -> dict[str, Node]:
        out = {"sta": self.sta}
        for i, n in enumerate(self.interferers, start=1):
            out[f"int{i}"] = n
        out.update(relay_rx=self.relay_rx, relay_tx=self.relay_tx, ap=self.ap)
        return out

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes()[node_id]
        except KeyError:
            raise SceneError(f"unknown node {node_id!r}") from None

    def partner(self, node_id: str) -> str:
        if node_id in _PARTNER:
            p = _PARTNER[node_id]
            if p is None:
                raise SceneError("relay_rx needs an explicit boresight")
            return p
        return "relay_rx"

    def geometry(self, node_id: str) -> UpaGeometry:
        n = self.node(node_id)
        if n.boresight is not None:
            bore = n.boresight
        else:
            bore = np.asarray(self.node(self.partner(node_id)).position) - np.asarray(n.position)
        d = self.spacing_wavelengths * self.wavelength
        return UpaGeometry(n.shape[0], n.shape[1], d, d,
                           tuple(float(v) for v in unit_vector(bore)), n.position)

    def is_blocked(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.blocked_links

    @cached_property
    def surfaces(self) -> tuple[Surface, ...]:
        out = []
        lo, hi = self.room_lo, self.room_hi
        for axis in range(3):
            others = [a for a in range(3) if a != axis]
            rlo = (lo[others[0]], lo[others[1]])
            rhi = (hi[others[0]], hi[others[1]])
            out.append(Surface(f"wall{FACES[2 * axis]}", axis, lo[axis], rlo, rhi, +1, self.wall_rho[2 * axis]))
            out.append(Surface(f"wall{FACES[2 * axis + 1]}", axis, hi[axis], rlo, rhi, -1, self.wall_rho[2 * axis + 1]))
        for box in self.obstacles:
            for axis in range(3):
                others = [a for a in range(3) if a != axis]
                rlo = (box.lo[others[0]], box.lo[others[1]])
                rhi = (box.hi[others[0]], box.hi[others[1]])
                out.append(Surface(f"{box.name}{FACES[2 * axis]}", axis, box.lo[axis], rlo, rhi, -1, box.rho[2 * axis]))
                out.append(Surface(f"{box.name}{FACES[2 * axis + 1]}", axis, box.hi[axis], rlo, rhi, +1, box.rho[2 * axis + 1]))
        return tuple(out)

    # -- derived scenes -----------------------------------------------------

    def with_positions(self, p0, pks=None) -> "Scene":
        """Copy with the STA (and optionally the interferers) moved."""
        sta = replace(self.sta, position=tuple(float(v) for v in p0))
        ints = self.interferers
        if pks is not None:
            pks = np.asarray(pks, dtype=float).reshape(-1, 3)
            if len(pks) != len(ints):
                raise SceneError(f"expected {len(ints)} interferer positions, got {len(pks)}")
            ints = tuple(replace(n, position=tuple(float(v) for v in p)) for n, p in zip(ints, pks))
        return replace(self, sta=sta, interferers=ints)

    def with_powers(self, sta_w: float | None = None, interferer_w=None, noise_w: float | None = None) -> "Scene":
        sta = self.sta if sta_w is None else replace(self.sta, power_w=float(sta_w))
        ints = self.interferers
        if interferer_w is not None:
            ws = np.broadcast_to(np.asarray(interferer_w, dtype=float), (len(ints),))
            ints = tuple(replace(n, power_w=float(w)) for n, w in zip(ints, ws))
        return replace(self, sta=sta, interferers=ints,
                       noise_power_override_w=self.noise_power_override_w if noise_w is None else float(noise_w))

    def perturbed(self, rng: np.random.Generator, rho_jitter: float = 0.2) -> "Scene":
        """Independent multiplicative jitter of every reflection coefficient."""
        def jit(vals):
            f = rng.uniform(1 - rho_jitter, 1 + rho_jitter, size=len(vals))
            return tuple(float(v) for v in np.clip(np.asarray(vals) * f, 0.0, 1.0))
        walls = jit(self.wall_rho)
        obs = tuple(replace(b, rho=jit(b.rho)) for b in self.obstacles)
        return replace(self, wall_rho=walls, obstacles=obs, name=self.name + "-perturbed")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        def node(n: Node) -> dict:
            return {"position": list(n.position), "shape": list(n.shape),
                    "boresight": None if n.boresight is None else list(n.boresight),
                    "power_w": n.power_w}
        (xr, yr, z) = self.sample_region
        return {
            "name": self.name,
            "room": {"min": list(self.room_lo), "max": list(self.room_hi),
                     "rho": dict(zip(FACES, self.wall_rho))},
            "obstacles": [{"name": b.name, "min": list(b.lo), "max": list(b.hi),
                           "rho": dict(zip(FACES, b.rho))} for b in self.obstacles],
            "nodes": {"sta": node(self.sta), "interferers": [node(n) for n in self.interferers],
                      "relay_rx": node(self.relay_rx), "relay_tx": node(self.relay_tx), "ap": node(self.ap)},
            "carrier_hz": self.carrier_hz, "bandwidth_hz": self.bandwidth_hz,
            "noise_figure_db": self.noise_figure_db, "noise_power_w": self.noise_power_override_w,
            "temperature_k": self.temperature_k, "amplification": self.amplification,
            "spacing_wavelengths": self.spacing_wavelengths, "max_order": self.max_order,
            "blocked_links": sorted(sorted(p) for p in self.blocked_links),
            "sample_region": {"x": list(xr), "y": list(yr), "z": z},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        try:
            room = d["room"]
            nodes = d["nodes"]

            def node(name: str, r: dict) -> Node:
                b = r.get("boresight")
                return Node(name, tuple(float(v) for v in r["position"]),
                            tuple(int(v) for v in r.get("shape", (2, 8))),
                            None if b is None else _direction(b),
                            float(r.get("power_w", 0.1)))

            obstacles = tuple(
                Box(o.get("name", f"obs{i}"), tuple(map(float, o["min"])), tuple(map(float, o["max"])),
                    _face_rhos(o.get("rho"), 0.3))
                for i, o in enumerate(d.get("obstacles", [])))
            region = d.get("sample_region", {"x": [3.4, 6.5], "y": [1.0, 2.9], "z": 0.9})
            return cls(
                room_lo=tuple(map(float, room.get("min", (0, 0, 0)))),
                room_hi=tuple(map(float, room["max"])),
                wall_rho=_face_rhos(room.get("rho"), 0.6),
                obstacles=obstacles,
                sta=node("sta", nodes["sta"]),
                interferers=tuple(node(f"int{i}", r) for i, r in enumerate(nodes["interferers"], start=1)),
                relay_rx=node("relay_rx", nodes["relay_rx"]),
                relay_tx=node("relay_tx", nodes["relay_tx"]),
                ap=node("ap", nodes["ap"]),
                carrier_hz=float(d.get("carrier_hz", 60.48e9)),
                bandwidth_hz=float(d.get("bandwidth_hz", 1.2e9)),
                noise_figure_db=float(d.get("noise_figure_db", 10.0)),
                noise_power_override_w=d.get("noise_power_w"),
                temperature_k=float(d.get("temperature_k", 290.0)),
                amplification=float(d.get("amplification", 1.0)),
                spacing_wavelengths=float(d.get("spacing_wavelengths", 0.5)),
                max_order=int(d.get("max_order", 2)),
                blocked_links=frozenset(frozenset(p) for p in d.get("blocked_links", [])),
                sample_region=(tuple(map(float, region["x"])), tuple(map(float, region["y"])), float(region["z"])),
                name=d.get("name", "scene"),
            )
        except (KeyError, TypeError) as exc:
            raise SceneError(f"malformed scene description: {exc}") from exc

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_scene(path: str | Path | None = None) -> Scene:
    """Load a scene JSON file; ``None`` gives the bundled office scene."""
    if path is None:
        text = resources.files("pao.data").joinpath("office.json").read_text()
    else:
        text = Path(path).read_text()
    return Scene.from_dict(json.loads(text))


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=2) + "\n")


def default_scene() -> Scene:
    return load_scene(None)
