"""PN sounder: sequence generation, channel emulation, CFO estimation, matched filtering."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavmmw.errors import EstimationError, InvalidTapsError
from uavmmw.sounder import (DEFAULT_TAPS, CirEstimate, SounderConfig, Waveform, apply_channel,
                            correct_cfo, estimate_cfo, extract_cir, matched_filter, parse_cir_text,
                            periodic_autocorrelation, pn_sequence, read_iq, synthesize_tx, write_iq)

FS = 25e6


@pytest.fixture(scope="module")
def seq12():
    return pn_sequence(12)


def brute_autocorr(chips):
    n = len(chips)
    s = [int(c) for c in chips]
    return [sum(s[i] * s[(i + k) % n] for i in range(n)) for k in range(n)]


# -- sequence ------------------------------------------------------------------------

def test_degree3_matches_hand_stepped_register():
    # register b1 b2 b3 = 111; output b3; feedback b3 ^ b2 into b1
    # 111 -> out 1, fb 0 -> 011 -> out 1, fb 0 -> 001 -> out 1, fb 1 -> 100
    # 100 -> out 0, fb 0 -> 010 -> out 0, fb 1 -> 101 -> out 1, fb 1 -> 110 -> out 0
    seq = pn_sequence(3, {3, 2})
    assert seq.chips.tolist() == [-1, -1, -1, 1, 1, -1, 1]


def test_degree12_default_length_and_balance(seq12):
    assert len(seq12) == 4095
    assert seq12.taps == (12, 6, 4, 1)
    assert np.count_nonzero(seq12.chips == -1) == 2048
    assert np.count_nonzero(seq12.chips == 1) == 2047


@pytest.mark.parametrize("degree", range(2, 21))
def test_every_default_degree_is_maximal(degree):
    seq = pn_sequence(degree)
    n = 2**degree - 1
    assert len(seq) == n
    assert abs(int(seq.chips.sum())) == 1
    assert set(np.unique(seq.chips)) <= {-1, 1}


@pytest.mark.parametrize("degree", range(2, 9))
def test_two_valued_autocorrelation_brute_force(degree):
    seq = pn_sequence(degree)
    n = len(seq)
    assert brute_autocorr(seq.chips) == [n] + [-1] * (n - 1)


def test_periodic_autocorrelation_values(seq12):
    assert periodic_autocorrelation(seq12, 0) == 4095
    assert periodic_autocorrelation(seq12, 1) == -1
    assert periodic_autocorrelation(seq12, 4095) == 4095
    assert periodic_autocorrelation(seq12, -3) == -1


def test_periodic_extension_indexing():
    seq = pn_sequence(3)
    assert seq.periodic(np.array([7, 8, -1])).tolist() == [seq.chips[0], seq.chips[1], seq.chips[6]]


@pytest.mark.parametrize("taps", [{4, 2}, {6, 3}, {8, 4}])
def test_non_primitive_taps_rejected(taps):
    degree = max(taps)
    with pytest.raises(InvalidTapsError):
        pn_sequence(degree, taps)


def test_taps_out_of_range_rejected():
    with pytest.raises(InvalidTapsError):
        pn_sequence(4, {5, 1})
    with pytest.raises(ValueError):
        pn_sequence(21)


def test_default_taps_cover_supported_degrees():
    assert sorted(DEFAULT_TAPS) == list(range(2, 21))
    assert all(max(t) == d for d, t in DEFAULT_TAPS.items())


# -- transmit and channel ----------------------------------------------------------------

def test_synthesize_tx_length_and_amplitude(seq12):
    tx = synthesize_tx(seq12)
    assert len(tx) == 32760
    assert tx.period == 4095
    assert np.all(tx.samples.imag == 0)
    half = synthesize_tx(seq12, SounderConfig(tx_amplitude=0.5))
    assert np.max(np.abs(half.samples)) == 0.5


def test_synthesize_tx_repeats_periods():
    seq = pn_sequence(3)
    tx = synthesize_tx(seq, SounderConfig(periods=2))
    assert len(tx) == 14
    assert np.array_equal(tx.samples[:7], tx.samples[7:])


def test_config_and_waveform_validation():
    with pytest.raises(ValueError):
        SounderConfig(periods=1)
    with pytest.raises(ValueError):
        SounderConfig(sample_rate=0)
    with pytest.raises(ValueError):
        Waveform(np.array([]), FS)
    with pytest.raises(ValueError):
        Waveform(np.array([1.0, np.nan]), FS)


def test_identity_channel_is_identity(seq12):
    tx = synthesize_tx(seq12)
    rx = apply_channel(tx, [(0, 1.0)])
    assert np.array_equal(rx.samples, tx.samples)


def test_cfo_rotates_each_sample(seq12):
    tx = synthesize_tx(seq12)
    f0 = 12345.0
    rx = apply_channel(tx, [(0, 1.0)], cfo=f0)
    n = np.arange(len(tx))
    np.testing.assert_allclose(rx.samples, tx.samples * np.exp(2j * np.pi * f0 * n / FS), atol=1e-12)


def test_two_path_superposition_by_hand():
    seq = pn_sequence(3)
    tx = synthesize_tx(seq, SounderConfig(periods=2))
    g2 = 0.5 * cmath.exp(1j * math.pi / 3)
    rx = apply_channel(tx, [(0, 1.0), (3, g2)])
    x = [float(v) for v in tx.samples.real]
    for n in range(6):
        expected = x[n] + g2 * x[(n - 3) % 14]
        assert rx.samples[n] == pytest.approx(expected, abs=1e-12)


def test_channel_accepts_traced_components(seq12):
    class P:
        def __init__(self, a, th, tau):
            self.amplitude, self.phase, self.delay = a, th, tau
    tx = synthesize_tx(seq12)
    # 0.12 us at 25 MHz is 3 samples exactly
    rx = apply_channel(tx, [P(1.0, 0.0, 1e-6), P(0.5, 1.0, 1.12e-6)], relative_delays=True)
    ref = apply_channel(tx, [(0, 1.0), (3, 0.5 * cmath.exp(1j))])
    np.testing.assert_allclose(rx.samples, ref.samples, atol=1e-12)


def test_channel_rejects_bad_inputs(seq12):
    tx = synthesize_tx(seq12)
    with pytest.raises(ValueError):
        apply_channel(tx, [(0, 1.0)], cfo=FS / 4)
    with pytest.raises(ValueError):
        apply_channel(tx, [(4095, 1.0)])
    with pytest.raises(ValueError):
        apply_channel(tx, [(-1, 1.0)])


def test_noise_power_matches_snr(seq12):
    tx = synthesize_tx(seq12)
    rx = apply_channel(tx, [(0, 1.0)], snr_db=10.0, rng=3)
    noise = rx.samples - tx.samples
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(0.1, rel=0.05)


# -- CFO -------------------------------------------------------------------------------

@pytest.mark.parametrize("cfo", [0.0, 10e3, -10e3, 250e3])
def test_cfo_estimate_within_bin(seq12, cfo):
    tx = synthesize_tx(seq12)
    rx = apply_channel(tx, [(0, 1.0)], cfo=cfo)
    f_hat = estimate_cfo(rx)
    assert abs(f_hat - cfo) <= FS / (2 * len(rx))
    assert f_hat == 0 or math.copysign(1, f_hat) == math.copysign(1, cfo)


def test_cfo_refinement_does_not_hurt(seq12):
    rx = apply_channel(synthesize_tx(seq12), [(0, 1.0)], cfo=10e3)
    assert abs(estimate_cfo(rx, refine=True) - 10e3) <= abs(estimate_cfo(rx) - 10e3) + 1.0


def test_cfo_flat_spectrum_fails():
    # a single tone squared is again a single tone; a chirp spreads evenly
    n = np.arange(4096)
    chirp = Waveform(np.exp(1j * np.pi * n**2 / 4096 / 2), FS)
    with pytest.raises(EstimationError):
        estimate_cfo(chirp)


def test_correct_cfo_inverts_offset(seq12):
    tx = synthesize_tx(seq12)
    rx = apply_channel(tx, [(0, 1.0)], cfo=7e3)
    np.testing.assert_allclose(correct_cfo(rx, 7e3).samples, tx.samples, atol=1e-9)
    np.testing.assert_array_equal(correct_cfo(tx, 0.0).samples, tx.samples)
    twice = correct_cfo(correct_cfo(rx, 3.5e3), 3.5e3)
    np.testing.assert_allclose(twice.samples, correct_cfo(rx, 7e3).samples, atol=1e-9)


# -- matched filter and CIR -----------------------------------------------------------

def brute_circular_xcorr(y, s):
    n = len(s)
    return np.array([sum(y[(m + k) % n] * s[m] for m in range(n)) for k in range(n)])


def test_matched_filter_single_path(seq12):
    rx = apply_channel(synthesize_tx(seq12), [(5, 1.0)])
    r = np.abs(matched_filter(rx, seq12).samples)
    assert r[5] == pytest.approx(4095)
    np.testing.assert_allclose(np.delete(r, 5), 1.0, atol=1e-9)


def test_matched_filter_scaled_path(seq12):
    rx = apply_channel(synthesize_tx(seq12), [(7, 0.5)])
    r = np.abs(matched_filter(rx, seq12).samples)
    assert int(np.argmax(r)) == 7
    assert r[7] == pytest.approx(0.5 * 4095)


def test_matched_filter_against_direct_correlation():
    seq = pn_sequence(5)
    taps = [(0, 1.0), (5, 0.5j)]
    rx = apply_channel(synthesize_tx(seq, SounderConfig(periods=3)), taps)
    r = matched_filter(rx, seq).samples
    one_period = rx.samples[len(seq):2 * len(seq)]
    np.testing.assert_allclose(r, brute_circular_xcorr(one_period, seq.chips), atol=1e-9)
    # superposition of shifted autocorrelation templates
    R = np.array(brute_autocorr(seq.chips), dtype=float)
    np.testing.assert_allclose(r, np.roll(R, 0) + 0.5j * np.roll(R, 5), atol=1e-9)


def test_matched_filter_needs_two_periods(seq12):
    with pytest.raises(ValueError):
        matched_filter(Waveform(np.ones(4095 + 10), FS), seq12)


@settings(max_examples=20, deadline=None)
@given(a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       seed=st.integers(0, 2**31))
def test_matched_filter_is_linear(a, b, seed):
    seq = pn_sequence(6)
    rng = np.random.default_rng(seed)
    x = Waveform(rng.standard_normal(3 * 63) + 1j * rng.standard_normal(3 * 63), FS)
    y = Waveform(rng.standard_normal(3 * 63) + 1j * rng.standard_normal(3 * 63), FS)
    lhs = matched_filter(Waveform(a * x.samples + b * y.samples, FS), seq).samples
    rhs = a * matched_filter(x, seq).samples + b * matched_filter(y, seq).samples
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(a) + abs(b)) * 63 * 10)


def test_processing_gain(seq12):
    r = np.abs(matched_filter(apply_channel(synthesize_tx(seq12), [(0, 1.0)]), seq12).samples)
    assert r[0] / np.mean(r[1:]) >= 4095 / 2


def test_extract_single_path(seq12):
    g = 0.8 * cmath.exp(0.3j)
    r = matched_filter(apply_channel(synthesize_tx(seq12), [(11, g)]), seq12)
    est = extract_cir(r, 4095)
    assert est.delays.tolist() == [11]
    assert abs(est.gains[0] - g) <= 1 / 4095
    assert est.reference_index == 11
    assert est.relative_delays.tolist() == [0]


def test_extract_two_equal_paths(seq12):
    r = matched_filter(apply_channel(synthesize_tx(seq12), [(20, 1.0), (30, 1.0j)]), seq12)
    est = extract_cir(r, 4095, cut_db=30)
    assert sorted(est.delays.tolist()) == [20, 30]


def test_extract_pure_noise_reports_no_detection(seq12):
    rng = np.random.default_rng(0)
    noise = Waveform(rng.standard_normal(8 * 4095) + 1j * rng.standard_normal(8 * 4095), FS)
    est = extract_cir(matched_filter(noise, seq12), 4095)
    assert est.no_detection
    assert est.paths == () and est.reference_index is None


def test_extract_respects_exclusion_and_limit(seq12):
    taps = [(0, 1.0), (1, 0.9), (40, 0.5), (80, 0.4)]
    r = matched_filter(apply_channel(synthesize_tx(seq12), taps), seq12)
    est = extract_cir(r, 4095, cut_db=20, max_paths=2)
    assert est.delays.tolist() == [0, 40]


@settings(max_examples=15, deadline=None)
@given(delays=st.lists(st.integers(0, 200), min_size=1, max_size=4, unique=True),
       mags=st.lists(st.floats(0.3, 1.0), min_size=4, max_size=4),
       phases=st.lists(st.floats(-math.pi, math.pi), min_size=4, max_size=4),
       cfo=st.floats(-FS / 8 * 0.99, FS / 8 * 0.99),
       seed=st.integers(0, 1000))
def test_loopback_property(delays, mags, phases, cfo, seed):
    delays = sorted(delays)
    if any(b - a <= 1 for a, b in zip(delays, delays[1:])):
        return
    seq = pn_sequence(12)
    truth = [(d, m * cmath.exp(1j * p)) for d, m, p in zip(delays, mags, phases)]
    rx = apply_channel(synthesize_tx(seq), truth, cfo=cfo, snr_db=20.0, rng=seed)
    f_hat = estimate_cfo(rx)
    assert abs(f_hat - cfo) <= FS / (2 * len(rx))
    est = extract_cir(matched_filter(correct_cfo(rx, f_hat), seq), len(seq), cut_db=20)
    got = dict(est.paths)
    assert sorted(got) == delays
    for d, g in truth:
        assert abs(abs(got[d]) - abs(g)) <= 0.1 * abs(g)


# -- file formats --------------------------------------------------------------------

def test_iq_roundtrip(tmp_path, seq12):
    wf = apply_channel(synthesize_tx(seq12), [(0, 0.5 + 0.25j)])
    path = tmp_path / "cap.iq"
    write_iq(path, wf, f_c=28e9)
    assert path.stat().st_size == 8 * len(wf)
    assert (tmp_path / "cap.iq.hdr").read_text() == "fs=25000000 fc=28000000000 len=32760\n"
    back, fc = read_iq(path)
    assert fc == 28e9 and back.sample_rate == FS
    np.testing.assert_allclose(back.samples, wf.samples.astype(np.complex64))
    raw = np.frombuffer(path.read_bytes()[:8], dtype="<f4")
    assert raw.tolist() == [wf.samples[0].real, wf.samples[0].imag]


def test_cir_text_roundtrip():
    est = CirEstimate(((3, 0.5 - 0.25j), (0, 1 + 0j)), 0, 4095)
    text = est.to_text()
    assert text.splitlines()[0] == "delay_samples,gain_real,gain_imag"
    assert text.splitlines()[1] == "0,1,0"
    assert parse_cir_text(text) == [(0, 1 + 0j), (3, 0.5 - 0.25j)]
    with pytest.raises(ValueError, match="line 2"):
        parse_cir_text("0,1,0\n1,2\n")
