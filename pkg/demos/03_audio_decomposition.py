"""
Sinusoidal decomposition of audio frames
========================================

Each 1000-sample frame is fitted with 20 sine waves, one at a time, by
per-sample gradient steps on amplitude, frequency and phase.  The amplitude
estimates are poor, so the resynthesis that ignores them and averages the unit
waves is also written.  Pass a 16-bit WAV path to analyse your own audio;
otherwise a synthetic signal of three drifting tones is used.

Expect low correlations: with step size 1 the frequency and phase updates
wander far from the tones, so the waves mostly describe noise.  The frame
losses show how much the dependent gradients help.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np

from trigfit.audioio import AudioSignal, compute_time_normalization, load_wav_left, write_wav
from trigfit.sinefit import FitConfig, Mode, decompose, fits_to_dict, resynthesize, write_trace_csv

out_dir = Path("demo_out") / "audio"
out_dir.mkdir(parents=True, exist_ok=True)

if len(sys.argv) > 1:
    signal = load_wav_left(sys.argv[1])
else:
    n = 100_000
    t = np.arange(n) / 44100
    drift = np.linspace(0, 1, n)
    samples = (0.3 * np.sin(2 * np.pi * (220 + 40 * drift) * t)
               + 0.2 * np.sin(2 * np.pi * 330 * t + 2 * drift)
               + 0.1 * np.sin(2 * np.pi * 550 * t))
    signal = AudioSignal(44100, samples)
n_frames = min(100, len(signal) // 1000)
print(f"{len(signal)} samples at {signal.sample_rate} Hz; analysing {n_frames} frames")

for mode in Mode:
    cfg = FitConfig(mode=mode)
    start = time.perf_counter()
    fits = decompose(signal, cfg, n_frames=n_frames)
    seconds = time.perf_counter() - start
    losses = np.array([f.frame_loss for f in fits if not f.diverged])
    print(f"\n{mode.value}: {seconds:.2f} s, {sum(f.diverged for f in fits)} diverged frames")
    print(f"  median frame loss {np.median(losses):.3e}")
    print(f"  first frame, first wave: a={fits[0].params[0].amplitude:.4f} "
          f"f={fits[0].params[0].frequency:.4f} p={fits[0].params[0].phase:.4f}")

    full, clamped = resynthesize(fits, cfg)
    unit, _ = resynthesize(fits, cfg.without_amplitudes())
    target = signal.samples[:len(full)]
    print(f"  full resynthesis: {clamped} clamped samples, "
          f"correlation {np.corrcoef(full.samples, target)[0, 1]:.3f}")
    print(f"  unit-amplitude mean: correlation {np.corrcoef(unit.samples, target)[0, 1]:.3f}")

    write_wav(unit, out_dir / f"resynth_{mode.value}.wav")
    write_trace_csv(fits, out_dir / f"trace_{mode.value}.csv")
    norm = compute_time_normalization(n_frames * 1000)
    data = fits_to_dict(fits, cfg, norm, 1000, signal.sample_rate)
    (out_dir / f"fits_{mode.value}.json").write_text(json.dumps(data))

print(f"\noutputs in {out_dir}")
