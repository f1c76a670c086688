"""Frame-wise decomposition of a signal into a sum of sinusoids.

Each frame is modelled as ``sum_k a_k * sin(2*pi*(f_k*t + p_k))`` over its
normalized times ``t``.  Waves are fitted one after another by per-sample
gradient steps; the running superposition ``h`` of the waves already fitted
enters every later wave's residual, so wave ``k`` is trained against what
waves ``0..k-1`` left unexplained.

Two gradient families are available.  In ``independent`` mode each parameter
is trained as if the other two sat at their neutral values (a=1, f=1, p=0)::

    Ga = step * (h + a*sin(2 pi x) - y) * sin(2 pi x)
    Gf = step * (h + sin(2 pi f x) - y) * 2 pi x cos(2 pi f x)
    Gp = step * (h + sin(2 pi x + 2 pi p) - y) * 2 pi cos(2 pi x + 2 pi p)

In ``dependent`` mode amplitude sees the current frequency and phase sees
both::

    Ga = step * (h + a*sin(2 pi f x) - y) * sin(2 pi f x)
    Gf = (as above)
    Gp = step * (h + a*sin(2 pi f x + 2 pi p) - y) * 2 pi a cos(2 pi f x + 2 pi p)

By default all three gradients of a sample are computed from the parameter
values at the start of that sample and then applied together
(``update_order="simultaneous"``).  ``"sequential"`` applies each update
before computing the next gradient; the two orders only differ in dependent
mode.

The inner loop is compiled with numba (``backend="numba"``).  A pure Python
backend runs the same source; both are deterministic, but they need not agree
bit for bit because the compiler may fuse ``sin``/``cos`` pairs.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .audioio import (
    DEFAULT_RATE_DIVISOR, AudioSignal, Frame, TimeNormalization,
    compute_time_normalization, segment_frames,
)
from .errors import DivergenceError

__all__ = [
    "Mode", "WaveParams", "FitConfig", "FrameFit",
    "gradients_independent", "gradients_dependent",
    "train_wave", "fit_frame", "superpose", "frame_loss",
    "decompose", "resynthesize", "fits_to_dict", "fits_from_dict", "write_trace_csv",
]

TWO_PI = 2.0 * math.pi


class Mode(str, Enum):
    INDEPENDENT = "independent"
    DEPENDENT = "dependent"


@dataclass(frozen=True)
class WaveParams:
    amplitude: float
    frequency: float
    phase: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.amplitude, self.frequency, self.phase)


@dataclass(frozen=True)
class FitConfig:
    n_waves: int = 20
    passes: int = 10
    step: float = 1.0
    mode: Mode = Mode.INDEPENDENT
    init: WaveParams = WaveParams(1.0, 1.0, 0.0)
    include_amplitude_in_resynthesis: bool = True
    divide_by_n_waves: bool = False
    update_order: str = "simultaneous"
    backend: str = "numba"

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.n_waves < 1:
            raise ValueError(f"n_waves must be >= 1, got {self.n_waves}")
        if self.passes < 1:
            raise ValueError(f"passes must be >= 1, got {self.passes}")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.update_order not in ("simultaneous", "sequential"):
            raise ValueError(f"unknown update_order {self.update_order!r}")
        if self.backend not in ("numba", "python"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def without_amplitudes(self) -> FitConfig:
        """Resynthesis with unit amplitudes, averaged over the waves."""
        return replace(self, include_amplitude_in_resynthesis=False, divide_by_n_waves=True)


@dataclass
class FrameFit:
    start_index: int
    times: np.ndarray = field(repr=False)
    params: tuple[WaveParams, ...]
    final_h: np.ndarray = field(repr=False)
    frame_loss: float
    targets: np.ndarray | None = field(default=None, repr=False)
    diverged: bool = False
    error: str | None = None
    trace: list[np.ndarray] | None = field(default=None, repr=False)


# -- per-sample gradients -------------------------------------------------------

def _ga_independent(a, h, x, y, step):
    s = math.sin(TWO_PI * x)
    return step * (h + a * s - y) * s


def _gf(f, h, x, y, step):
    arg = TWO_PI * f * x
    return step * (h + math.sin(arg) - y) * (TWO_PI * x * math.cos(arg))


def _gp_independent(p, h, x, y, step):
    arg = TWO_PI * x + TWO_PI * p
    return step * (h + math.sin(arg) - y) * (TWO_PI * math.cos(arg))


def _ga_dependent(a, f, h, x, y, step):
    s = math.sin(TWO_PI * f * x)
    return step * (h + a * s - y) * s


def _gp_dependent(a, f, p, h, x, y, step):
    arg = TWO_PI * f * x + TWO_PI * p
    return step * (h + a * math.sin(arg) - y) * (TWO_PI * a * math.cos(arg))


def gradients_independent(w: WaveParams, h: float, x: float, y: float, step: float = 1.0):
    """(Ga, Gf, Gp) with the other parameters held at a=1, f=1, p=0."""
    a, f, p = w.as_tuple()
    return (_ga_independent(a, h, x, y, step), _gf(f, h, x, y, step), _gp_independent(p, h, x, y, step))


def gradients_dependent(w: WaveParams, h: float, x: float, y: float, step: float = 1.0):
    """(Ga, Gf, Gp) where amplitude uses the current frequency and phase uses both."""
    a, f, p = w.as_tuple()
    return (_ga_dependent(a, f, h, x, y, step), _gf(f, h, x, y, step), _gp_dependent(a, f, p, h, x, y, step))


def _make_kernel(ga_ind, gf, gp_ind, ga_dep, gp_dep):
    def kernel(times, targets, h, a, f, p, passes, step, dependent, sequential, trace):
        n = len(times)
        record = trace.shape[0] > 0
        row = 0
        for j in range(passes):
            for i in range(n):
                x = times[i]
                y = targets[i]
                hi = h[i]
                if dependent:
                    g_a = ga_dep(a, f, hi, x, y, step)
                else:
                    g_a = ga_ind(a, hi, x, y, step)
                if sequential:
                    a = a - g_a
                g_f = gf(f, hi, x, y, step)
                if sequential:
                    f = f - g_f
                if dependent:
                    g_p = gp_dep(a, f, p, hi, x, y, step)
                else:
                    g_p = gp_ind(p, hi, x, y, step)
                if sequential:
                    p = p - g_p
                else:
                    a = a - g_a
                    f = f - g_f
                    p = p - g_p
                if record:
                    trace[row, 0] = a
                    trace[row, 1] = f
                    trace[row, 2] = p
                    row += 1
                if not (math.isfinite(a) and math.isfinite(f) and math.isfinite(p)):
                    return a, f, p, j, i
        return a, f, p, -1, -1

    return kernel


_GRADS = (_ga_independent, _gf, _gp_independent, _ga_dependent, _gp_dependent)
_KERNELS = {"python": _make_kernel(*_GRADS)}


def _kernel(backend: str):
    if backend not in _KERNELS:
        import numba

        jitted = [numba.njit(cache=True)(g) for g in _GRADS]
        _KERNELS[backend] = numba.njit(nogil=True)(_make_kernel(*jitted))
    return _KERNELS[backend]


# -- fitting --------------------------------------------------------------------

def train_wave(times, targets, h, init: WaveParams, cfg: FitConfig, wave_index: int = 0,
               record_trace: bool = False):
    """Run ``cfg.passes`` sweeps for one wave against the buffer ``h``.

    Returns the fitted :class:`WaveParams` and, when ``record_trace``, an
    array of shape ``(passes * len(times), 3)`` holding (a, f, p) after every
    sample.  Raises :class:`DivergenceError` on a non-finite parameter.
    """
    times = np.ascontiguousarray(times, dtype=float)
    targets = np.ascontiguousarray(targets, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    trace = np.zeros((cfg.passes * times.size if record_trace else 0, 3))
    a, f, p, bad_pass, bad_sample = _kernel(cfg.backend)(
        times, targets, h, float(init.amplitude), float(init.frequency), float(init.phase),
        cfg.passes, float(cfg.step), cfg.mode is Mode.DEPENDENT,
        cfg.update_order == "sequential", trace,
    )
    params = WaveParams(float(a), float(f), float(p))
    if bad_pass >= 0:
        raise DivergenceError(wave_index, int(bad_pass), int(bad_sample), params)
    return params, (trace if record_trace else None)


def _wave(w: WaveParams, times, include_amplitude=True):
    scale = w.amplitude if include_amplitude else 1.0
    return scale * np.sin(TWO_PI * (w.frequency * times + w.phase))


def fit_frame(frame: Frame, cfg: FitConfig = FitConfig(), record_trace: bool = False) -> FrameFit:
    """Fit ``cfg.n_waves`` sinusoids to one frame, one wave at a time."""
    times = np.asarray(frame.times, dtype=float)
    targets = np.asarray(frame.targets, dtype=float)
    if times.size < 1:
        raise ValueError("frame is empty")
    h = np.zeros(times.size)
    params = []
    traces = [] if record_trace else None
    for k in range(cfg.n_waves):
        w, trace = train_wave(times, targets, h, cfg.init, cfg, k, record_trace)
        params.append(w)
        if record_trace:
            traces.append(trace)
        h += _wave(w, times)
    loss = float(np.sum((h - targets) ** 2))
    return FrameFit(frame.start_index, times, tuple(params), h, loss, targets, trace=traces)


def superpose(params: Sequence[WaveParams], times, include_amplitude: bool = True,
              divide_by_n: bool = False) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    y = np.zeros(times.shape)
    for w in params:
        y += _wave(w, times, include_amplitude)
    if divide_by_n and len(params):
        y /= len(params)
    return y


def frame_loss(params: Sequence[WaveParams], frame: Frame, include_amplitude: bool = True,
               divide_by_n: bool = False) -> float:
    """Squared-error sum of the superposition against the frame targets."""
    pred = superpose(params, frame.times, include_amplitude, divide_by_n)
    return float(np.sum((pred - np.asarray(frame.targets, dtype=float)) ** 2))


def _fit_or_flag(frame: Frame, cfg: FitConfig) -> FrameFit:
    try:
        return fit_frame(frame, cfg)
    except DivergenceError as exc:
        targets = np.asarray(frame.targets, dtype=float)
        return FrameFit(
            frame.start_index, np.asarray(frame.times, dtype=float), (),
            np.zeros(targets.size), float(np.sum(targets ** 2)), targets,
            diverged=True, error=str(exc),
        )


def decompose(
    signal: AudioSignal,
    cfg: FitConfig = FitConfig(),
    n_frames: int = 800,
    frame_len: int = 1000,
    rate_divisor: float = DEFAULT_RATE_DIVISOR,
    per_frame: bool = False,
    threads: int | None = None,
) -> list[FrameFit]:
    """Fit every frame of the analysed prefix.

    A frame whose training diverges is returned with ``diverged=True``, no
    parameters and a silent ``final_h``; the other frames are unaffected.
    Frames run on ``threads`` workers (default: CPU count); the result does
    not depend on the thread count.
    """
    norm = compute_time_normalization(n_frames * frame_len, rate_divisor)
    frames = segment_frames(signal, norm, n_frames, frame_len, per_frame)
    threads = threads or os.cpu_count() or 1
    if cfg.backend == "numba":
        _kernel("numba")  # compile once before fanning out
    if threads == 1:
        return [_fit_or_flag(fr, cfg) for fr in frames]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda fr: _fit_or_flag(fr, cfg), frames))


def resynthesize(fits: Sequence[FrameFit], cfg: FitConfig = FitConfig(),
                 sample_rate: int = 44100) -> tuple[AudioSignal, int]:
    """Concatenate each frame's superposition; diverged frames become silence.

    The result is clamped to [-1, 1]; returns the signal and the number of
    clamped samples.
    """
    if not fits:
        raise ValueError("no frame fits to resynthesize")
    parts = []
    for fit in fits:
        if fit.diverged:
            parts.append(np.zeros(len(fit.times)))
        else:
            parts.append(superpose(fit.params, fit.times, cfg.include_amplitude_in_resynthesis,
                                   cfg.divide_by_n_waves))
    y = np.concatenate(parts)
    n_clamped = int(np.count_nonzero(np.abs(y) > 1.0))
    return AudioSignal(sample_rate, np.clip(y, -1.0, 1.0)), n_clamped


# -- serialization ----------------------------------------------------------------

def _finite_or_none(v):
    return v if math.isfinite(v) else None


def fits_to_dict(fits: Sequence[FrameFit], cfg: FitConfig, norm: TimeNormalization,
                 frame_len: int, sample_rate: int, per_frame: bool = False) -> dict:
    return {
        "sample_rate": sample_rate,
        "frame_len": frame_len,
        "n_frames": len(fits),
        "normalization": {
            "rate_divisor": norm.rate_divisor, "mean": norm.mean, "std": norm.std,
            "per_frame": per_frame,
        },
        "config": {
            "n_waves": cfg.n_waves, "passes": cfg.passes, "step": cfg.step,
            "mode": cfg.mode.value, "init": list(cfg.init.as_tuple()),
            "update_order": cfg.update_order, "backend": cfg.backend,
        },
        "amplitude_scaling": "pcm16 / 32768",
        "frames": [
            {
                "start_index": fit.start_index,
                "params": [[_finite_or_none(v) for v in w.as_tuple()] for w in fit.params],
                "frame_loss": _finite_or_none(fit.frame_loss),
                "diverged": fit.diverged,
                "error": fit.error,
            }
            for fit in fits
        ],
    }


def fits_from_dict(data: dict) -> tuple[list[FrameFit], FitConfig, int]:
    """Inverse of :func:`fits_to_dict`; times are rebuilt from the stored normalization.

    Returns (fits, config, sample_rate).  Targets are not stored, so
    ``FrameFit.targets`` is ``None``.
    """
    frame_len = int(data["frame_len"])
    nd = data["normalization"]
    norm = TimeNormalization(float(nd["rate_divisor"]), float(nd["mean"]), float(nd["std"]))
    c = data["config"]
    cfg = FitConfig(
        n_waves=int(c["n_waves"]), passes=int(c["passes"]), step=float(c["step"]),
        mode=Mode(c["mode"]), init=WaveParams(*map(float, c["init"])),
        update_order=c.get("update_order", "simultaneous"), backend=c.get("backend", "numba"),
    )
    fits = []
    for fr in data["frames"]:
        start = int(fr["start_index"])
        idx = np.arange(start, start + frame_len)
        if nd.get("per_frame"):
            raw = idx / norm.rate_divisor
            times = (raw - raw.mean()) / raw.std()
        else:
            times = norm.apply(idx)
        diverged = bool(fr.get("diverged", False))
        params = () if diverged else tuple(WaveParams(*map(float, p)) for p in fr["params"])
        loss = fr.get("frame_loss")
        fits.append(FrameFit(
            start, times, params, superpose(params, times),
            math.nan if loss is None else float(loss),
            diverged=diverged, error=fr.get("error"),
        ))
    return fits, cfg, int(data["sample_rate"])


def write_trace_csv(fits: Sequence[FrameFit], path) -> None:
    """Per-sample original vs predicted amplitudes (full and amplitude-free resynthesis)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "time", "original", "predicted", "predicted_unit_amplitude_mean"])
        for fit in fits:
            if fit.diverged:
                full = unit = np.zeros(len(fit.times))
            else:
                full = superpose(fit.params, fit.times)
                unit = superpose(fit.params, fit.times, include_amplitude=False, divide_by_n=True)
            original = fit.targets if fit.targets is not None else np.full(len(fit.times), math.nan)
            for i in range(len(fit.times)):
                w.writerow([
                    fit.start_index + i, format(fit.times[i], ".17g"), format(original[i], ".17g"),
                    format(full[i], ".17g"), format(unit[i], ".17g"),
                ])
