import math

import numpy as np
import pytest

from isacsim import (
    Angle3D,
    CaptureRecord,
    Cir,
    PathComponent,
    calibrate,
    generate_pn,
    load_capture,
    save_capture,
    slide_correlate,
    sounder_roundtrip,
    transmit_through,
)


def chan(delays_amps, chip_rate=None):
    paths = tuple(PathComponent(delay=d, amp=a, aoa=Angle3D(0, 0), aod=Angle3D(0, 0))
                  for d, a in delays_amps)
    return Cir(paths)


class TestGeneratePn:
    def test_m3_period_7(self):
        pn = generate_pn(3, (3, 1))
        assert pn.length == 7

    def test_balance_property(self):
        for m in (3, 5, 8, 11):
            pn = generate_pn(m)
            assert int(np.sum(pn.chips == 1)) - int(np.sum(pn.chips == -1)) == 1

    def test_autocorrelation_peak(self):
        pn = generate_pn(5)
        r0 = float(np.sum(pn.chips * pn.chips))
        assert r0 == 2 ** 5 - 1

    def test_autocorrelation_two_valued(self):
        # brute-force correlation at every nonzero lag equals -1
        for m in (3, 4, 7, 10):
            pn = generate_pn(m)
            for lag in range(1, pn.length):
                r = float(np.sum(pn.chips * np.roll(pn.chips, lag)))
                assert r == pytest.approx(-1.0, abs=1e-9)

    def test_non_primitive_taps_detected(self):
        with pytest.raises(ValueError):
            generate_pn(4, (4, 2))  # x^4 + x^2 + 1 = (x^2+x+1)^2, period 6

    def test_bad_taps_rejected(self):
        with pytest.raises(ValueError):
            generate_pn(4, (3, 1))  # top tap must equal the register length


class TestTransmitThrough:
    def test_identity_channel_reproduces_pn(self):
        pn = generate_pn(6, chip_rate=100e6)
        cap = transmit_through(chan([(0.0, 1.0)]), pn, snr_db=None, seed=None)
        np.testing.assert_allclose(cap.samples, pn.chips.astype(complex), atol=1e-15)

    def test_integer_chip_delay_is_cyclic_shift(self):
        pn = generate_pn(6, chip_rate=100e6)
        k = 9
        cap = transmit_through(chan([(k / 100e6, 1.0)]), pn, snr_db=None, seed=None)
        np.testing.assert_allclose(cap.samples, np.roll(pn.chips, k).astype(complex),
                                   atol=1e-12)

    def test_two_path_matches_direct_convolution(self):
        pn = generate_pn(7, chip_rate=50e6)
        k1, k2 = 3, 40
        a1, a2 = 0.8 + 0.1j, -0.3 + 0.6j
        cap = transmit_through(chan([(k1 / 50e6, a1), (k2 / 50e6, a2)]), pn,
                               snr_db=None, seed=None)
        oracle = a1 * np.roll(pn.chips, k1) + a2 * np.roll(pn.chips, k2)
        np.testing.assert_allclose(cap.samples, oracle, atol=1e-9)

    def test_delay_beyond_period_rejected(self):
        pn = generate_pn(5, chip_rate=100e6)  # period 310 ns
        with pytest.raises(ValueError):
            transmit_through(chan([(400e-9, 1.0)]), pn, snr_db=None, seed=None)

    def test_noise_is_seed_deterministic(self):
        pn = generate_pn(6, chip_rate=100e6)
        c = chan([(11e-9, 1.0)])
        a = transmit_through(c, pn, snr_db=20.0, seed=99)
        b = transmit_through(c, pn, snr_db=20.0, seed=99)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_snr_calibration(self):
        pn = generate_pn(10, chip_rate=100e6)
        c = chan([(0.0, 1.0)])
        clean = transmit_through(c, pn, snr_db=None, seed=None)
        noisy = transmit_through(c, pn, snr_db=10.0, seed=3)
        noise_p = float(np.mean(np.abs(noisy.samples - clean.samples) ** 2))
        sig_p = float(np.mean(np.abs(clean.samples) ** 2))
        assert 10 * math.log10(sig_p / noise_p) == pytest.approx(10.0, abs=0.5)


class TestSlideCorrelate:
    def test_noiseless_single_path_peak(self):
        pn = generate_pn(8, chip_rate=100e6)
        k, a = 37, 0.6 - 0.4j
        cap = transmit_through(chan([(k / 100e6, a)]), pn, snr_db=None, seed=None)
        est = slide_correlate(cap, pn)
        assert np.argmax(np.abs(est)) == k
        n = pn.length
        assert abs(est[k] - a) <= abs(a) / n + 1e-12
        sidelobes = np.delete(np.abs(est), k)
        assert np.all(sidelobes <= abs(a) / n + 1e-12)

    def test_zero_capture_zero_estimate(self):
        pn = generate_pn(6, chip_rate=100e6)
        cap = CaptureRecord(np.zeros(pn.length, dtype=complex), 100e6, None, None,
                            pn_m=6, pn_taps=pn.taps, chip_rate=100e6)
        est = slide_correlate(cap, pn)
        np.testing.assert_allclose(est, 0.0, atol=1e-15)

    def test_three_paths_30db_snr(self):
        # delays (>= 2 chips apart) recovered exactly, amplitudes within
        # 0.5 dB, across 100 seeds
        pn = generate_pn(11, chip_rate=600e6)
        chips = [100, 500, 1400]
        amps = [1.0, 0.7 + 0.2j, -0.5 + 0.5j]
        c = chan([(k / 600e6, a) for k, a in zip(chips, amps)])
        failures = 0
        for seed in range(100):
            cap = transmit_through(c, pn, snr_db=30.0, seed=seed)
            est = slide_correlate(cap, pn)
            mag = np.abs(est)
            for k, a in zip(chips, amps):
                local = np.argmax(mag[k - 1:k + 2]) + k - 1
                err_db = abs(20 * math.log10(mag[local] / abs(a)))
                if local != k or err_db > 0.5:
                    failures += 1
        assert failures == 0

    def test_length_mismatch_rejected(self):
        pn = generate_pn(6, chip_rate=100e6)
        cap = CaptureRecord(np.zeros(10, dtype=complex), 100e6, None, None,
                            pn_m=6, pn_taps=pn.taps, chip_rate=100e6)
        with pytest.raises(ValueError):
            slide_correlate(cap, pn)


class TestCalibrate:
    def test_ideal_impulse_passthrough(self):
        rng = np.random.default_rng(5)
        raw = rng.normal(size=64) + 1j * rng.normal(size=64)
        b2b = np.zeros(64, dtype=complex)
        b2b[0] = 1.0
        out = calibrate(raw, b2b)
        np.testing.assert_allclose(out.response, raw, atol=1e-12)
        assert not out.flagged_bins.any()

    def test_bandpass_ripple_removed(self):
        # known +-1 dB in-band ripple on the system response is divided
        # out to well under 0.1 dB
        n = 256
        k = np.fft.fftfreq(n)
        ripple_db = 1.0 * np.cos(2 * math.pi * 3 * k)
        sys_spec = 10 ** (ripple_db / 20.0) * np.exp(1j * 0.3 * np.sin(2 * math.pi * 2 * k))
        sys_ir = np.fft.ifft(sys_spec)
        true = np.zeros(n, dtype=complex)
        true[[10, 90]] = [1.0, 0.4j]
        raw = np.fft.ifft(np.fft.fft(true) * sys_spec)
        out = calibrate(raw, sys_ir)
        for idx, val in [(10, 1.0), (90, 0.4)]:
            err_db = abs(20 * math.log10(abs(out.response[idx]) / val))
            assert err_db < 0.1

    def test_spectral_nulls_flagged(self):
        n = 128
        sys_spec = np.ones(n, dtype=complex)
        sys_spec[40:44] = 1e-6  # deep nulls
        b2b = np.fft.ifft(sys_spec)
        raw = np.zeros(n, dtype=complex)
        raw[0] = 1.0
        out = calibrate(raw, b2b, floor_db=-40.0)
        assert out.flagged_bins.sum() == 4

    def test_all_zero_b2b_rejected(self):
        with pytest.raises(ValueError):
            calibrate(np.ones(8, dtype=complex), np.zeros(8, dtype=complex))


class TestRoundTrip:
    def test_five_path_recovery_at_30db(self):
        # the full cascade on a random 5-path channel, fractional delays,
        # >= 2 chip separation, one PN period: path count exact, delays
        # within one chip, powers within 0.5 dB
        pn = generate_pn(11, chip_rate=600e6)
        chip = 1.0 / 600e6
        rng = np.random.default_rng(1234)
        delays = np.sort(rng.choice(np.arange(20, 2000, 4), size=5, replace=False)) * chip
        delays = delays + rng.uniform(0, 1, 5) * chip  # fractional offsets
        amps = 10 ** (rng.uniform(-10, 0, 5) / 20.0) * np.exp(1j * rng.uniform(0, 6.28, 5))
        c = chan(list(zip(delays, amps)))
        result = sounder_roundtrip(c, pn, snr_db=30.0, seed=7, threshold_db=18.0)
        assert len(result.recovered) == 5
        for (d_est, a_est), d_true, a_true in zip(result.recovered, delays, amps):
            assert abs(d_est - d_true) <= chip
            err_db = abs(20 * math.log10(abs(a_est) / abs(a_true)))
            assert err_db <= 0.5

    def test_processing_gain(self):
        # post-correlation SNR gain matches 10 log10(2^m - 1)
        m = 9
        pn = generate_pn(m, chip_rate=100e6)
        snr_in_db = 10.0
        c = chan([(0.0, 1.0)])
        gains = []
        for seed in range(20):
            cap = transmit_through(c, pn, snr_db=snr_in_db, seed=seed)
            est = slide_correlate(cap, pn)
            noise = np.delete(est, 0)
            snr_out = abs(est[0]) ** 2 / float(np.mean(np.abs(noise) ** 2))
            gains.append(10 * math.log10(snr_out) - snr_in_db)
        expected = 10 * math.log10(2 ** m - 1)
        assert np.mean(gains) == pytest.approx(expected, abs=1.0)


class TestCaptureSerialization:
    def test_binary_sidecar_round_trip(self, tmp_path):
        pn = generate_pn(6, chip_rate=100e6)
        cap = transmit_through(chan([(30e-9, 0.5 - 0.2j)]), pn, snr_db=25.0, seed=11)
        path = tmp_path / "capture.bin"
        save_capture(cap, path)
        back = load_capture(path)
        assert back.sample_rate == cap.sample_rate
        assert back.snr_db == cap.snr_db
        assert back.seed == cap.seed
        assert back.pn_m == 6
        assert back.pn_taps == pn.taps
        # float32 quantization only
        np.testing.assert_allclose(back.samples, cap.samples, atol=1e-6)
        raw = np.fromfile(path, dtype="<f4")
        assert len(raw) == 2 * len(cap.samples)
