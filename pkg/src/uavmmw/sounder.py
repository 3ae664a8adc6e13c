"""Software model of a PN-correlation channel sounder.

The transmitter repeats a +/-1 maximal-length sequence one chip per sample.
The receiver squares the capture to strip the BPSK modulation, reads the
carrier offset from the strongest line of the squared spectrum (it sits at
twice the offset), derotates, averages whole periods and circularly
correlates against the sequence.  The correlation is the sum of delayed,
scaled copies of the sequence's two-valued periodic autocorrelation, i.e.
the channel impulse response at one-sample resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EstimationError, InvalidTapsError

NOISE_FLOOR_MARGIN_DB = 10.0

# Fibonacci LFSR taps (polynomial exponents) giving maximal length per degree.
DEFAULT_TAPS = {
    2: (2, 1), 3: (3, 2), 4: (4, 3), 5: (5, 3), 6: (6, 5), 7: (7, 6),
    8: (8, 6, 5, 4), 9: (9, 5), 10: (10, 7), 11: (11, 9), 12: (12, 6, 4, 1),
    13: (13, 4, 3, 1), 14: (14, 5, 3, 1), 15: (15, 14), 16: (16, 15, 13, 4),
    17: (17, 14), 18: (18, 11), 19: (19, 6, 2, 1), 20: (20, 17),
}


@dataclass(frozen=True)
class PnSequence:
    degree: int
    taps: tuple[int, ...]
    chips: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.chips)

    def periodic(self, n):
        """Periodic extension ``s~[n]`` for integer index array ``n``."""
        return self.chips[np.mod(n, len(self.chips))]


@dataclass(frozen=True)
class SounderConfig:
    sample_rate: float = 25e6
    chips_per_sample: int = 1
    periods: int = 8
    tx_amplitude: float = 1.0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.periods < 2:
            raise ValueError("at least two periods are needed (one is discarded)")
        if self.chips_per_sample != 1:
            raise ValueError("only one chip per sample is supported")


@dataclass(frozen=True)
class Waveform:
    """Complex baseband samples at ``sample_rate``; ``period`` is set for PN bursts."""

    samples: np.ndarray
    sample_rate: float
    period: int | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform samples must be finite")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class CirEstimate:
    """Detected taps as ``(delay_samples, complex_gain)`` pairs, strongest first."""

    paths: tuple[tuple[int, complex], ...]
    reference_index: int | None
    processing_gain: int
    no_detection: bool = False

    @property
    def delays(self):
        return np.array([d for d, _ in self.paths], dtype=int)

    @property
    def gains(self):
        return np.array([g for _, g in self.paths], dtype=complex)

    @property
    def relative_delays(self):
        """Delays relative to the strongest tap, wrapped to [0, N)."""
        if self.reference_index is None:
            return np.zeros(0, dtype=int)
        return np.mod(self.delays - self.reference_index, self.processing_gain)

    def to_text(self) -> str:
        rows = ["delay_samples,gain_real,gain_imag"]
        rows += [f"{d},{g.real:.6g},{g.imag:.6g}" for d, g in sorted(self.paths)]
        return "\n".join(rows) + "\n"


# -- sequence ----------------------------------------------------------------

def pn_sequence(degree: int = 12, taps=None) -> PnSequence:
    """Maximal-length +/-1 sequence from a Fibonacci LFSR.

    The register holds bits ``b1..bm`` (all ones initially).  Each step outputs
    ``bm``, shifts toward ``bm`` and feeds ``XOR(b_t for t in taps)`` into
    ``b1``.  Output bits map 0 -> +1 and 1 -> -1.  Taps that do not return the
    register to its seed after exactly ``2**degree - 1`` steps are rejected.
    """
    if not 2 <= degree <= 20:
        raise ValueError("degree must be in [2, 20]")
    taps = tuple(sorted(set(DEFAULT_TAPS[degree] if taps is None else taps), reverse=True))
    if not taps or any(not 1 <= t <= degree for t in taps):
        raise InvalidTapsError(f"taps {taps} out of range for degree {degree}")
    n = (1 << degree) - 1
    seed = n
    state = seed
    mask = 0
    for t in taps:
        mask |= 1 << (t - 1)
    top = degree - 1
    bits = np.empty(n, dtype=np.int8)
    for i in range(n):
        bits[i] = (state >> top) & 1
        fb = (state & mask).bit_count() & 1
        state = ((state << 1) & n) | fb
        if state == seed and i < n - 1:
            raise InvalidTapsError(f"taps {taps} give period {i + 1} < {n}")
    if state != seed:
        raise InvalidTapsError(f"taps {taps} do not give a maximal-length sequence")
    return PnSequence(degree, taps, (1 - 2 * bits).astype(np.int8))


def periodic_autocorrelation(seq: PnSequence, lag: int) -> int:
    s = seq.chips.astype(np.int64)
    return int(np.dot(s, np.roll(s, -(lag % len(s)))))


# -- transmit and channel ----------------------------------------------------------

def synthesize_tx(seq: PnSequence, cfg: SounderConfig = SounderConfig()) -> Waveform:
    samples = np.tile(seq.chips.astype(float), cfg.periods) * cfg.tx_amplitude
    return Waveform(samples.astype(complex), cfg.sample_rate, period=len(seq))


def _taps_from(channel, f_s):
    """Normalize a channel description to (integer delays, complex gains)."""
    if isinstance(channel, CirEstimate):
        return channel.delays, channel.gains
    paths = getattr(channel, "paths", channel)
    delays, gains = [], []
    for p in paths:
        if hasattr(p, "delay"):
            # delays quantized to the nearest sample
            delays.append(int(round(p.delay * f_s)))
            gains.append(p.amplitude * complex(math.cos(p.phase), math.sin(p.phase)))
        else:
            d, g = p
            delays.append(int(d))
            gains.append(complex(g))
    return np.array(delays, dtype=int), np.array(gains, dtype=complex)


def apply_channel(tx: Waveform, channel, cfo: float = 0.0, snr_db: float = math.inf,
                  rng=None, relative_delays: bool = False) -> Waveform:
    """Pass ``tx`` through a multipath channel with carrier offset and AWGN.

    ``channel`` is a :class:`uavmmw.metrics.Cir` (or any iterable of objects
    with ``amplitude``/``phase``/``delay`` in seconds), a :class:`CirEstimate`,
    or an iterable of ``(delay_samples, complex_gain)``.  Delays are applied
    circularly, which for a whole number of PN periods equals the periodic
    extension of the sequence.  ``relative_delays=True`` shifts all delays so
    the first arrival lands at sample 0.  ``snr_db`` is the per-sample ratio
    of the noiseless output power to the complex noise variance.
    """
    f_s = tx.sample_rate
    if not abs(cfo) < f_s / 4:
        raise ValueError("|cfo| must be below f_s/4 to stay unambiguous after squaring")
    delays, gains = _taps_from(channel, f_s)
    if relative_delays and len(delays):
        delays = delays - delays.min()
    period = tx.period or len(tx)
    if np.any(delays < 0) or np.any(delays >= period):
        raise ValueError("path delays must lie within one sequence period")
    x = tx.samples
    y = np.zeros_like(x)
    for d, g in zip(delays, gains):
        y += g * np.roll(x, d)
    n = np.arange(len(x))
    if cfo:
        y = y * np.exp(2j * math.pi * cfo * n / f_s)
    if math.isfinite(snr_db):
        rng = np.random.default_rng(rng)
        power = np.mean(np.abs(y) ** 2)
        sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0) / 2.0)
        y = y + sigma * (rng.standard_normal(len(y)) + 1j * rng.standard_normal(len(y)))
    return Waveform(y, f_s, tx.period)


# -- receiver ----------------------------------------------------------------------

def estimate_cfo(rx: Waveform, refine: bool = False, min_peak_db: float = 3.0) -> float:
    """Carrier offset from the peak of the squared signal's spectrum.

    The estimate is half the peak bin frequency, so its resolution is
    ``f_s / (2 * len(rx))``.  ``refine=True`` adds parabolic interpolation
    of the peak bin magnitude.
    """
    y2 = rx.samples**2
    spec = np.abs(np.fft.fft(y2))
    k = int(np.argmax(spec))
    median = float(np.median(spec))
    if median > 0 and 20.0 * math.log10(spec[k] / median) < min_peak_db or spec[k] == 0:
        raise EstimationError("no dominant line in the squared spectrum")
    n = len(spec)
    shift = 0.0
    if refine:
        a, b, c = spec[(k - 1) % n], spec[k], spec[(k + 1) % n]
        den = a - 2.0 * b + c
        if den != 0:
            shift = 0.5 * (a - c) / den
    freq = np.fft.fftfreq(n, d=1.0 / rx.sample_rate)[k] + shift * rx.sample_rate / n
    return float(freq / 2.0)


def correct_cfo(rx: Waveform, f_hat: float) -> Waveform:
    n = np.arange(len(rx))
    return Waveform(rx.samples * np.exp(-2j * math.pi * f_hat * n / rx.sample_rate),
                    rx.sample_rate, rx.period)


def matched_filter(rx: Waveform, seq: PnSequence) -> Waveform:
    """Period-averaged circular correlation with the sequence, one period long.

    The first period is discarded and the remaining complete periods are
    averaged before correlating, so ``r(n) = sum_p a_p e^{j theta_p} R(n - tau_p)``
    for a noiseless periodic input.
    """
    n = len(seq)
    periods = len(rx) // n
    if periods < 2:
        raise ValueError("matched filter needs at least two sequence periods")
    avg = rx.samples[n:periods * n].reshape(periods - 1, n).mean(axis=0)
    s = seq.chips.astype(float)
    r = np.fft.ifft(np.fft.fft(avg) * np.conj(np.fft.fft(s)))
    return Waveform(r, rx.sample_rate, n)


def extract_cir(r: Waveform, seq_len: int, cut_db: float = 20.0, max_paths: int = 16) -> CirEstimate:
    """Pick correlation peaks as CIR taps.

    Candidates are circular local maxima of ``|r|`` above both the noise
    floor and ``cut_db`` below the strongest sample; they
    are accepted strongest-first, skipping any within one sample of an
    accepted tap.  Gains are ``r(peak) / seq_len``.

    The noise floor is the median of ``|r|`` raised by 10 dB on the
    ``10 log10 |r|`` scale, i.e. ten times the median magnitude.  A floor of
    only 3.16x the median is crossed by a few samples of any pure-noise
    correlation of this length (Rayleigh tail), so it could never report
    no detection.
    """
    if cut_db <= 0:
        raise ValueError("cut_db must be positive")
    mag = np.abs(r.samples)
    floor = float(np.median(mag)) * 10.0 ** (NOISE_FLOOR_MARGIN_DB / 10.0)
    peak = float(mag.max())
    if peak <= floor:
        return CirEstimate((), None, seq_len, no_detection=True)
    threshold = max(floor, peak * 10.0 ** (-cut_db / 20.0))
    local = (mag >= np.roll(mag, 1)) & (mag >= np.roll(mag, -1)) & (mag >= threshold)
    cand = np.nonzero(local)[0]
    cand = cand[np.argsort(-mag[cand], kind="stable")]
    chosen = []
    n = len(mag)
    for idx in cand:
        if len(chosen) >= max_paths:
            break
        if any(min((idx - c) % n, (c - idx) % n) <= 1 for c in chosen):
            continue
        chosen.append(int(idx))
    paths = tuple((i, complex(r.samples[i] / seq_len)) for i in chosen)
    return CirEstimate(paths, chosen[0], seq_len)


# -- record / replay -----------------------------------------------------------

def _header_path(path):
    path = Path(path)
    return path.with_name(path.name + ".hdr")


def write_iq(path, wf: Waveform, f_c: float = 0.0):
    """Write interleaved little-endian float32 I/Q plus a ``<file>.hdr`` sidecar."""
    path = Path(path)
    iq = np.empty(2 * len(wf), dtype="<f4")
    iq[0::2] = wf.samples.real
    iq[1::2] = wf.samples.imag
    path.write_bytes(iq.tobytes())
    _header_path(path).write_text(f"fs={wf.sample_rate:.17g} fc={f_c:.17g} len={len(wf)}\n")


def read_iq(path):
    """Read a capture written by :func:`write_iq`; returns ``(waveform, f_c)``."""
    path = Path(path)
    fields = dict(item.split("=", 1) for item in _header_path(path).read_text().split())
    fs, fc, n = float(fields["fs"]), float(fields["fc"]), int(fields["len"])
    iq = np.frombuffer(path.read_bytes(), dtype="<f4")
    if len(iq) != 2 * n:
        raise ValueError(f"{path}: expected {n} samples, found {len(iq) // 2}")
    return Waveform(iq[0::2].astype(float) + 1j * iq[1::2].astype(float), fs), fc


def parse_cir_text(text: str):
    """Parse ``delay_samples,gain_real,gain_imag`` rows (header optional)."""
    taps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith("delay_samples"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected delay_samples,gain_real,gain_imag")
        taps.append((int(parts[0]), complex(float(parts[1]), float(parts[2]))))
    return taps
