import math

import numpy as np
import pytest

from pao.array import Angles, beam_weights, link_angles, relay_phase_matrix, steering_vector, to_local_frame
from pao.channel import (ChannelMatrix, DimensionError, SinrModel, cascaded_channel, channel_matrix,
                         interference_power_f_prime, rate, signal_power_f, sinr, sweep_powers,
                         tx_effective_vectors)
from pao.raytrace import trace_paths


def pointing(scene, node, target):
    g = scene.geometry(node)
    a = link_angles(scene.node(node).position, scene.node(target).position)
    return steering_vector(g, to_local_frame(a, g), scene.wavelength)


def matrix_sinr(scene, theta: Angles) -> tuple[float, float]:
    """Signal and interference-plus-noise power from explicit MIMO matrices."""
    lam = scene.wavelength
    g_rx = scene.geometry("relay_rx")
    w_in = beam_weights(g_rx, theta.az, theta.el, lam)
    w_o = pointing(scene, "relay_tx", "ap")
    w_r = pointing(scene, "ap", "relay_tx")
    phi = relay_phase_matrix(w_o, w_in, scene.amplification)
    H = channel_matrix(scene, trace_paths(scene, "relay_tx", "ap"), scene.geometry("relay_tx"), scene.geometry("ap"))

    def power(node):
        G = channel_matrix(scene, trace_paths(scene, node, "relay_rx"), scene.geometry(node), g_rx)
        w_t = pointing(scene, node, "relay_rx")
        c = cascaded_channel(H, phi, G).entries
        return abs(np.vdot(w_r, c @ w_t)) ** 2 * scene.node(node).power_w

    interf = sum(power(f"int{k}") for k in range(1, scene.k + 1))
    return power("sta"), interf + scene.noise_power


BEAMS = [Angles.deg(0, 0), Angles.deg(-27, 18), Angles.deg(40.5, -18), Angles.deg(12, 7)]


class TestAgainstMatrices:
    @pytest.mark.parametrize("theta", BEAMS)
    def test_powers_match_full_cascade(self, office, theta):
        ps, pin = matrix_sinr(office, theta)
        m = SinrModel(office)
        assert float(m.signal_power(theta.az, theta.el)) == pytest.approx(ps, rel=1e-9)
        assert float(m.interference_power(theta.az, theta.el)) == pytest.approx(pin, rel=1e-9)

    def test_effective_vector(self, office):
        G = channel_matrix(office, trace_paths(office, "sta", "relay_rx"), office.geometry("sta"),
                           office.geometry("relay_rx"))
        want = G.entries @ pointing(office, "sta", "relay_rx")
        got = tx_effective_vectors(office, "sta", [office.sta.position])[0]
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-18)

    def test_channel_dims(self, office):
        H = channel_matrix(office, trace_paths(office, "sta", "relay_rx"), office.geometry("sta"),
                           office.geometry("relay_rx"))
        assert H.entries.shape == (16, 16)

    def test_cascade_dimension_error(self):
        with pytest.raises(DimensionError):
            cascaded_channel(ChannelMatrix(np.zeros((4, 3))), relay_phase_matrix(np.ones(4), np.ones(4)),
                             ChannelMatrix(np.zeros((4, 2))))


class TestSinrModel:
    def test_scalar_path_matches_vector(self, office):
        m = SinrModel(office)
        rng = np.random.default_rng(0)
        for az, el in rng.uniform(-1.5, 1.5, (50, 2)):
            assert m(Angles(az, el)) == pytest.approx(float(m.sinr_db(az, el)), abs=1e-9)

    def test_sweep_powers_batch(self, office):
        rng = np.random.default_rng(1)
        p0 = rng.uniform([3.5, 1.1, 0.9], [6.4, 2.8, 0.9], (4, 3))
        pk = rng.uniform([3.5, 1.1, 0.9], [6.4, 2.8, 0.9], (4, 1, 3))
        az = np.radians([-30.0, 0.0, 20.0])
        el = np.radians([0.0, 18.0, -18.0])
        ps, pin = sweep_powers(office, p0, pk, az, el)
        for i in range(4):
            m = SinrModel.at(office, p0[i], pk[i], clamp=False)
            np.testing.assert_allclose(ps[i], m.signal_power(az, el), rtol=1e-10)
            np.testing.assert_allclose(pin[i], m.interference_power(az, el), rtol=1e-10)

    def test_zero_sta_power(self, office):
        m = SinrModel(office.with_powers(sta_w=0.0))
        assert float(m.sinr(0.1, 0.1)) == 0.0
        assert m(Angles(0.1, 0.1)) == -math.inf

    def test_no_interference_is_snr(self, office):
        quiet = office.with_powers(interferer_w=0.0)
        m = SinrModel(quiet)
        assert float(m.interference_power(0.2, -0.1)) == pytest.approx(quiet.noise_power)

    def test_power_scaling(self, office):
        t = Angles.deg(10, 0)
        p1 = signal_power_f(office, office.sta.position, t)
        p2 = signal_power_f(office.with_powers(sta_w=0.2), office.sta.position, t)
        assert p2 == pytest.approx(2 * p1, rel=1e-12)

    def test_f_prime_moves_interferers(self, office):
        t = Angles.deg(10, 0)
        base = interference_power_f_prime(office, office.interferers[0].position, t)
        assert base == pytest.approx(float(SinrModel(office).interference_power(t.az, t.el)))
        moved = interference_power_f_prime(office, (5.5, 2.2, 0.9), t)
        assert moved != pytest.approx(base)

    def test_linear_sinr(self, office):
        t = Angles.deg(-5, 3)
        ps, pin = matrix_sinr(office, t)
        assert sinr(office, t) == pytest.approx(ps / pin, rel=1e-9)


class TestRate:
    def test_values(self):
        assert rate(0.0) == 0.0
        assert rate(1.0) == 1.0
        assert rate(3.0) == 2.0

    def test_negative(self):
        with pytest.raises(ValueError):
            rate(-0.1)
