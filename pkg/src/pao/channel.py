"""MIMO channel synthesis and the twin's power/SINR predictors.

The signal path is STA -> relay_rx -(relay)-> relay_tx -> AP.  The relay
combines with the steering vector of a boresight-relative beam ``theta``;
interference reaches the AP only through the relay.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .array import (Angles, UpaGeometry, RelayPhaseMatrix, beam_weights, element_phase_coeffs, link_angles,
                    relay_phase_matrix, steering_from_cosines, steering_vector, to_local_frame)
from .raytrace import PropPath, trace_batch
from .scene import Scene


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelMatrix:
    entries: np.ndarray
    tx_node: str = ""
    rx_node: str = ""


def channel_matrix(scene: Scene, paths: list[PropPath], tx: UpaGeometry, rx: UpaGeometry,
                   tx_node: str = "", rx_node: str = "") -> ChannelMatrix:
    """Sum of rank-one path terms ``gain * a_rx(arrival) a_tx(departure)^H``."""
    lam = scene.wavelength
    h = np.zeros((rx.n, tx.n), dtype=complex)
    for p in paths:
        a_rx = steering_vector(rx, to_local_frame(p.arrival, rx), lam)
        a_tx = steering_vector(tx, to_local_frame(p.departure, tx), lam)
        h += p.gain * np.outer(a_rx, np.conj(a_tx))
    return ChannelMatrix(h, tx_node, rx_node)


def cascaded_channel(h: ChannelMatrix, phi: RelayPhaseMatrix, g: ChannelMatrix) -> ChannelMatrix:
    """End-to-end channel ``H Phi G`` through the relay."""
    H, P, G = h.entries, phi.matrix, g.entries
    if H.shape[1] != P.shape[0] or P.shape[1] != G.shape[0]:
        raise DimensionError(f"cannot cascade {H.shape} x {P.shape} x {G.shape}")
    return ChannelMatrix(H @ P @ G, g.tx_node, h.rx_node)


def rate(gamma: float) -> float:
    """Achievable rate log2(1 + gamma) in bit/s/Hz."""
    if gamma < 0:
        raise ValueError("SINR must be non-negative")
    return math.log2(1.0 + gamma)


def _frames(bores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Left and up axes for a batch of boresights (n, 3)."""
    left = np.cross(np.array([0.0, 0.0, 1.0]), bores)
    nrm = np.linalg.norm(left, axis=1, keepdims=True)
    left = np.where(nrm < 1e-9, np.array([0.0, 1.0, 0.0]), left / np.where(nrm < 1e-9, 1.0, nrm))
    up = np.cross(bores, left)
    return left, up


def _steer_dirs(geom: UpaGeometry, dirs: np.ndarray, lam: float, left=None, up=None) -> np.ndarray:
    """Steering vectors toward world unit vectors ``dirs`` (n, 3) -> (n, N)."""
    if left is None:
        fr = geom.frame()
        left, up = fr[1], fr[2]
        u = -(dirs @ up)
        v = dirs @ left
    else:
        u = -np.einsum("ij,ij->i", dirs, up)
        v = np.einsum("ij,ij->i", dirs, left)
    return steering_from_cosines(geom, u, v, lam)


def tx_effective_vectors(scene: Scene, node_id: str, positions) -> np.ndarray:
    """``G w_t`` for a transmitter placed at each of ``positions`` (n, 3).

    The transmitter array keeps the node's shape; a ``null`` boresight is
    re-pointed at the relay from every position, and the precoder always
    steers at the relay along the line of sight.
    """
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    node = scene.node(node_id)
    rx = scene.geometry("relay_rx")
    relay = np.asarray(scene.relay_rx.position)
    lam = scene.wavelength
    tx_tmpl = UpaGeometry(node.shape[0], node.shape[1],
                          scene.spacing_wavelengths * lam, scene.spacing_wavelengths * lam)
    los = relay[None, :] - pos
    los = los / np.linalg.norm(los, axis=1, keepdims=True)
    if node.boresight is None:
        bores = los
    else:
        bores = np.broadcast_to(np.asarray(node.boresight), pos.shape)
    left, up = _frames(bores)
    w_t = _steer_dirs(tx_tmpl, los, lam, left, up)
    out = np.zeros((len(pos), rx.n), dtype=complex)
    for grp in trace_batch(scene, pos, relay, direct=not scene.is_blocked(node_id, "relay_rx")):
        if not grp.mask.any():
            continue
        m = grp.mask
        a_tx = _steer_dirs(tx_tmpl, grp.dep[m], lam, left[m], up[m])
        a_rx = _steer_dirs(rx, grp.arr[m], lam)
        proj = np.einsum("ij,ij->i", np.conj(a_tx), w_t[m])
        out[m] += (grp.gain[m] * proj)[:, None] * a_rx
    return out


def relay_to_ap_gain(scene: Scene) -> complex:
    """Fixed scalar ``h = w_r^H H A w_o`` of the relay -> AP hop."""
    lam = scene.wavelength
    g_tx = scene.geometry("relay_tx")
    g_ap = scene.geometry("ap")
    p_tx = np.asarray(scene.relay_tx.position)
    p_ap = np.asarray(scene.ap.position)
    w_o = steering_vector(g_tx, to_local_frame(link_angles(p_tx, p_ap), g_tx), lam)
    w_r = steering_vector(g_ap, to_local_frame(link_angles(p_ap, p_tx), g_ap), lam)
    total = 0j
    for grp in trace_batch(scene, p_tx[None], p_ap[None], direct=not scene.is_blocked("relay_tx", "ap")):
        if not grp.mask[0]:
            continue
        a_ap = _steer_dirs(g_ap, grp.arr, lam)[0]
        a_tx = _steer_dirs(g_tx, grp.dep, lam)[0]
        total += grp.gain[0] * np.vdot(w_r, a_ap) * np.vdot(a_tx, w_o)
    return complex(scene.amplification * total)


@dataclass(frozen=True)
class EffectiveTerms:
    h: complex
    g: np.ndarray          # (N_i,)
    g_k: np.ndarray        # (K, N_i)


def effective_terms(scene: Scene) -> EffectiveTerms:
    """Scalar relay->AP gain and the per-transmitter effective vectors at the relay."""
    g = tx_effective_vectors(scene, "sta", [scene.sta.position])[0]
    gk = np.array([tx_effective_vectors(scene, f"int{k}", [n.position])[0]
                   for k, n in enumerate(scene.interferers, start=1)])
    return EffectiveTerms(relay_to_ap_gain(scene), g, gk)


class SinrModel:
    """Twin evaluator with positions frozen: powers and SINR as functions of the beam.

    Beam angles are boresight-relative (radians) and may be arrays.
    """

    def __init__(self, scene: Scene, terms: EffectiveTerms | None = None):
        self.scene = scene
        self.terms = effective_terms(scene) if terms is None else terms
        self.geom = scene.geometry("relay_rx")
        self.lam = scene.wavelength
        self.p_sta = scene.sta.power_w
        self.p_int = np.array([n.power_w for n in scene.interferers])
        self.noise = scene.noise_power
        self._h2 = abs(self.terms.h) ** 2
        self._cx, self._cy = element_phase_coeffs(self.geom, self.lam)

    @classmethod
    def at(cls, scene: Scene, p0=None, pks=None, clamp: bool = True) -> "SinrModel":
        """Model of ``scene`` with the transmitters moved to (p0, pks)."""
        if p0 is not None:
            p0 = scene.clamp(p0) if clamp else np.asarray(p0, dtype=float)
        if pks is not None:
            pks = scene.clamp(np.asarray(pks, dtype=float).reshape(-1, 3)) if clamp else pks
        if p0 is not None:
            scene = scene.with_positions(p0, pks)
        return cls(scene)

    def _weights(self, az, el) -> np.ndarray:
        # same law as array.beam_weights, with the element coefficients cached
        az = np.asarray(az, dtype=float)
        el = np.asarray(el, dtype=float)
        u = (-np.sin(el))[..., None]
        v = (np.cos(el) * np.sin(az))[..., None]
        return np.exp(1j * (u * self._cx + v * self._cy))

    def _proj2(self, vecs: np.ndarray, az, el) -> np.ndarray:
        w = self._weights(az, el)
        return np.abs(np.tensordot(np.conj(w), vecs, axes=([-1], [-1]))) ** 2

    def signal_power(self, az, el) -> np.ndarray:
        return self._h2 * self._proj2(self.terms.g, az, el) * self.p_sta

    def interference_power(self, az, el) -> np.ndarray:
        p = self._proj2(self.terms.g_k, az, el)
        return self._h2 * (p * self.p_int).sum(axis=-1) + self.noise

    def sinr(self, az, el) -> np.ndarray:
        return self.signal_power(az, el) / self.interference_power(az, el)

    def sinr_db(self, az, el) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.sinr(az, el))

    def __call__(self, theta: Angles) -> float:
        w = np.exp(1j * (-math.sin(theta.el) * self._cx + math.cos(theta.el) * math.sin(theta.az) * self._cy))
        ps = abs(np.vdot(w, self.terms.g)) ** 2 * self.p_sta
        pi = float(np.abs(self.terms.g_k @ np.conj(w)) ** 2 @ self.p_int)
        with np.errstate(divide="ignore"):
            return float(10.0 * np.log10(ps / (pi + self.noise / self._h2)))


def signal_power_f(scene: Scene, p0, theta: Angles) -> float:
    """Predicted received STA power at the AP (W) with the STA at ``p0``."""
    return float(SinrModel.at(scene, p0).signal_power(theta.az, theta.el))


def interference_power_f_prime(scene: Scene, pks, theta: Angles) -> float:
    """Predicted interference-plus-noise power at the AP (W), interferers at ``pks``."""
    pks = scene.clamp(np.asarray(pks, dtype=float).reshape(-1, 3))
    model = SinrModel(scene.with_positions(scene.sta.position, pks))
    return float(model.interference_power(theta.az, theta.el))


def sinr(scene: Scene, theta: Angles) -> float:
    """Linear SINR at the AP for the scene's true transmitter positions."""
    return float(SinrModel(scene).sinr(theta.az, theta.el))


def sweep_powers(scene: Scene, p0s, pks, az, el) -> tuple[np.ndarray, np.ndarray]:
    """Signal and interference-plus-noise powers for many placements at once.

    ``p0s``: (n, 3); ``pks``: (n, K, 3); ``az``/``el``: (m,) beams.
    Returns two (n, m) arrays in watts.
    """
    p0s = np.atleast_2d(np.asarray(p0s, dtype=float))
    pks = np.asarray(pks, dtype=float).reshape(len(p0s), scene.k, 3)
    h2 = abs(relay_to_ap_gain(scene)) ** 2
    geom = scene.geometry("relay_rx")
    w = beam_weights(geom, np.asarray(az), np.asarray(el), scene.wavelength)   # (m, N)
    g = tx_effective_vectors(scene, "sta", p0s)
    ps = h2 * scene.sta.power_w * np.abs(g @ np.conj(w).T) ** 2
    pin = np.full_like(ps, scene.noise_power)
    for k, node in enumerate(scene.interferers):
        gk = tx_effective_vectors(scene, f"int{k + 1}", pks[:, k])
        pin += h2 * node.power_w * np.abs(gk @ np.conj(w).T) ** 2
    return ps, pin


__all__ = [
    "ChannelMatrix", "DimensionError", "EffectiveTerms", "SinrModel", "cascaded_channel",
    "channel_matrix", "effective_terms", "interference_power_f_prime", "rate",
    "relay_phase_matrix", "relay_to_ap_gain", "signal_power_f", "sinr", "sweep_powers",
    "tx_effective_vectors",
]
