"""PN channel sounder end to end: transmit, impair, estimate CFO, correlate, pick paths.

Run with ``python3 demos/sounder_loopback.py``.
"""

import cmath
import math

from uavmmw.sounder import (SounderConfig, apply_channel, correct_cfo, estimate_cfo, extract_cir,
                            matched_filter, pn_sequence, synthesize_tx)

seq = pn_sequence(12)
cfg = SounderConfig(sample_rate=25e6, periods=8)
tx = synthesize_tx(seq, cfg)
print(f"m-sequence of {len(seq)} chips, {cfg.periods} periods at {cfg.sample_rate / 1e6:g} MS/s")

# Three taps at 0, 120 and 400 ns with arbitrary phases.
channel = [(0, 1.0), (3, 0.5 * cmath.exp(1j * 1.1)), (10, 0.25 * cmath.exp(-2j))]
rx = apply_channel(tx, channel, cfo=10e3, snr_db=20.0, rng=3)

f_hat = estimate_cfo(rx)
print(f"carrier offset estimate {f_hat:.1f} Hz (true 10000 Hz)")

est = extract_cir(matched_filter(correct_cfo(rx, f_hat), seq), len(seq), cut_db=20.0)
print(f"processing gain {est.processing_gain} ({10 * math.log10(est.processing_gain):.1f} dB)")
for (d, g), (_, true) in zip(est.paths, channel):
    print(f"delay {d:3d} samples: |h| {abs(g):.3f} (true {abs(true):.3f})")
