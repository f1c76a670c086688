import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trigfit.audioio import AudioSignal, Frame, compute_time_normalization
from trigfit.errors import DivergenceError
from trigfit.sinefit import (
    FitConfig, Mode, WaveParams, decompose, fit_frame, fits_from_dict, fits_to_dict,
    frame_loss, gradients_dependent, gradients_independent, resynthesize, superpose,
    train_wave, write_trace_csv,
)

from oracles import (
    GOLDEN_TARGETS, GOLDEN_TIMES, GOLDEN_TRACE, loss_a_dep, loss_a_ind, loss_f, loss_p_dep,
    loss_p_ind, straight_line_trace, worst_fd_error,
)

CASES = [
    (gradients_independent, 0, loss_a_ind, 0),
    (gradients_independent, 1, loss_f, 1),
    (gradients_independent, 2, loss_p_ind, 2),
    (gradients_dependent, 0, loss_a_dep, 0),
    (gradients_dependent, 1, loss_f, 1),
    (gradients_dependent, 2, loss_p_dep, 2),
]


@pytest.mark.parametrize("grad,out,loss,slot", CASES)
def test_gradients_match_finite_differences(grad, out, loss, slot):
    assert worst_fd_error(grad, out, loss, slot) <= 1e-6


@given(st.floats(0.1, 3), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_step_scales_gradients(step, h, x, y):
    w = WaveParams(0.7, 1.3, 0.2)
    for grad in (gradients_independent, gradients_dependent):
        unit = grad(w, h, x, y)
        scaled = grad(w, h, x, y, step)
        for u, s in zip(unit, scaled):
            assert s == pytest.approx(step * u, rel=1e-12, abs=1e-300)


def test_gradient_examples():
    w = WaveParams(0.3, 1.7, 0.4)
    assert gradients_independent(w, 0.5, 0.0, 0.2)[0] == 0.0
    assert gradients_independent(WaveParams(1, 1, 0), 0.0, 0.0, 0.0)[2] == 0.0
    assert gradients_dependent(WaveParams(0.0, 1.3, 0.4), 0.5, 0.3, 0.2)[2] == 0.0


def test_dependent_amplitude_reduces_at_unit_frequency():
    for a, h, x, y in np.random.default_rng(5).uniform(-2, 2, size=(20, 4)):
        dep = gradients_dependent(WaveParams(a, 1.0, 0.9), h, x, y)
        ind = gradients_independent(WaveParams(a, 1.0, 0.9), h, x, y)
        assert dep[0] == pytest.approx(ind[0], rel=1e-12, abs=1e-15)
        assert dep[1] == ind[1]


# -- the per-sample update loop -------------------------------------------------

def test_golden_times_come_from_normalization():
    t = compute_time_normalization(4).apply(np.arange(4))
    assert t.tolist() == GOLDEN_TIMES


def test_straight_line_reference_reproduces_frozen_values():
    assert straight_line_trace(GOLDEN_TIMES, GOLDEN_TARGETS, 1.0, 1.0, 0.0) == GOLDEN_TRACE


@pytest.mark.parametrize("backend", ["python", "numba"])
@pytest.mark.parametrize("order", ["simultaneous", "sequential"])
def test_golden_trace(backend, order):
    frame = Frame(0, np.array(GOLDEN_TIMES), np.array(GOLDEN_TARGETS))
    cfg = FitConfig(n_waves=1, passes=1, backend=backend, update_order=order)
    fit = fit_frame(frame, cfg, record_trace=True)
    assert [tuple(r) for r in fit.trace[0].tolist()] == GOLDEN_TRACE
    assert fit.params[0].as_tuple() == GOLDEN_TRACE[-1]


def test_sequential_differs_in_dependent_mode():
    frame = Frame(0, np.array(GOLDEN_TIMES), np.array(GOLDEN_TARGETS))
    base = dict(n_waves=1, passes=1, mode=Mode.DEPENDENT, backend="python")
    sim = fit_frame(frame, FitConfig(**base)).params[0]
    seq = fit_frame(frame, FitConfig(**base, update_order="sequential")).params[0]
    assert sim != seq

    # hand-run the first sample of the sequential order
    a, f, p = 1.0, 1.0, 0.0
    x, y = GOLDEN_TIMES[0], GOLDEN_TARGETS[0]
    a -= gradients_dependent(WaveParams(a, f, p), 0.0, x, y)[0]
    f -= gradients_dependent(WaveParams(a, f, p), 0.0, x, y)[1]
    p -= gradients_dependent(WaveParams(a, f, p), 0.0, x, y)[2]
    tr = fit_frame(Frame(0, np.array([x]), np.array([y])),
                   FitConfig(**base, update_order="sequential")).params[0]
    assert tr.as_tuple() == (a, f, p)


def test_silence_drives_amplitude_down():
    norm = compute_time_normalization(1000)
    frame = Frame(0, norm.apply(np.arange(1000)), np.zeros(1000))
    fit = fit_frame(frame, FitConfig(n_waves=1, backend="python"))
    assert abs(fit.params[0].amplitude) < 1.0


@pytest.fixture(scope="module")
def sine_frame():
    times = compute_time_normalization(1000).apply(np.arange(1000))
    return Frame(0, times, np.sin(2 * math.pi * times))


def test_synthetic_sine_recovery(sine_frame):
    fit = fit_frame(sine_frame, FitConfig(n_waves=1))
    zero = frame_loss((), sine_frame)
    assert fit.frame_loss <= 0.1 * zero
    sig, _ = resynthesize([fit], FitConfig(n_waves=1))
    assert np.corrcoef(sig.samples, sine_frame.targets)[0, 1] >= 0.9


def test_frame_fit_shape_and_h_consistency(sine_frame):
    cfg = FitConfig(n_waves=5, passes=3)
    fit = fit_frame(Frame(0, sine_frame.times, 0.4 * sine_frame.targets + 0.1), cfg)
    assert len(fit.params) == 5
    assert fit.final_h.shape == (1000,)
    np.testing.assert_allclose(fit.final_h, superpose(fit.params, fit.times), rtol=0, atol=1e-9)
    assert fit.frame_loss == pytest.approx(
        frame_loss(fit.params, Frame(0, fit.times, fit.targets)), rel=1e-9)


def test_fit_frame_is_deterministic(sine_frame):
    frame = Frame(0, sine_frame.times[:200], 0.3 * sine_frame.targets[:200])
    cfg = FitConfig(n_waves=4, passes=2, mode=Mode.DEPENDENT)
    first = fit_frame(frame, cfg)
    second = fit_frame(frame, cfg)
    assert first.params == second.params
    assert np.array_equal(first.final_h, second.final_h)


def test_backends_agree_closely():
    rng = np.random.default_rng(11)
    times = np.sort(rng.uniform(-1, 1, 100))
    targets = 0.3 * rng.standard_normal(100)
    for mode in Mode:
        py = fit_frame(Frame(0, times, targets), FitConfig(n_waves=3, passes=2, mode=mode, backend="python"))
        nb = fit_frame(Frame(0, times, targets), FitConfig(n_waves=3, passes=2, mode=mode, backend="numba"))
        np.testing.assert_allclose(
            [w.as_tuple() for w in py.params], [w.as_tuple() for w in nb.params], rtol=1e-9, atol=1e-12)


def test_divergence_reports_location():
    times = np.linspace(-1.7, 1.7, 50)
    targets = np.full(50, 1e200)
    with pytest.raises(DivergenceError) as info:
        train_wave(times, targets, np.zeros(50), WaveParams(1, 1, 0), FitConfig(step=1e150), wave_index=3)
    err = info.value
    assert err.wave == 3
    assert err.pass_index == 0
    assert 0 <= err.sample < 50
    assert isinstance(err, ArithmeticError)


def test_config_validation():
    for bad in (dict(n_waves=0), dict(passes=0), dict(step=0.0), dict(update_order="x"), dict(backend="c")):
        with pytest.raises(ValueError):
            FitConfig(**bad)
    assert FitConfig(mode="dependent").mode is Mode.DEPENDENT
    cfg = FitConfig().without_amplitudes()
    assert not cfg.include_amplitude_in_resynthesis and cfg.divide_by_n_waves


# -- superposition and loss -----------------------------------------------------

def test_superpose_examples():
    t = np.linspace(-2, 2, 9)
    assert np.array_equal(superpose((), t), np.zeros(9))
    np.testing.assert_allclose(superpose((WaveParams(2, 0, 0.25),), t), 2.0, rtol=1e-15)
    w = WaveParams(3.0, 1.3, 0.1)
    np.testing.assert_allclose(
        superpose((w,) * 20, t, include_amplitude=False, divide_by_n=True),
        np.sin(2 * math.pi * (1.3 * t + 0.1)), rtol=0, atol=1e-14)
    np.testing.assert_allclose(superpose((w,), t), 3 * np.sin(2 * math.pi * (1.3 * t + 0.1)))


def test_frame_loss_properties():
    n = 1000
    t = np.arange(n) / 100
    frame = Frame(0, t, np.sin(2 * math.pi * t))
    assert frame_loss((WaveParams(1, 1, 0),), frame) == pytest.approx(0, abs=1e-20)
    assert frame_loss((), frame) == pytest.approx(n / 2, rel=1e-9)
    waves = [WaveParams(0.5, 0.3, 0.1), WaveParams(-0.2, 2.0, 0.7), WaveParams(0.9, 1.1, -0.3)]
    assert frame_loss(waves, frame) == pytest.approx(frame_loss(waves[::-1], frame), rel=1e-12)


# -- whole-signal decomposition -------------------------------------------------

def drifting_signal(n, seed=0):
    t = np.arange(n) / 44100
    drift = np.linspace(0, 1, n)
    return AudioSignal(44100, 0.3 * np.sin(2 * np.pi * (220 + 30 * drift) * t)
                       + 0.2 * np.sin(2 * np.pi * 440 * t + drift)
                       + 0.1 * np.sin(2 * np.pi * (660 - 50 * drift) * t))


def test_decompose_silence():
    fits = decompose(AudioSignal(44100, np.zeros(2000)), FitConfig(n_waves=2, passes=2), 2, 1000)
    assert len(fits) == 2
    for fit in fits:
        assert not fit.diverged
        assert abs(fit.params[0].amplitude) < 1.0
    sig, _ = resynthesize(fits, FitConfig().without_amplitudes())
    assert len(sig) == 2000


def test_decompose_thread_count_invariant():
    sig = drifting_signal(6000)
    cfg = FitConfig(n_waves=4, passes=2)
    one = decompose(sig, cfg, 6, 1000, threads=1)
    many = decompose(sig, cfg, 6, 1000, threads=3)
    assert [f.params for f in one] == [f.params for f in many]
    assert [f.start_index for f in many] == [0, 1000, 2000, 3000, 4000, 5000]


def test_decompose_flags_divergent_frames():
    sig = AudioSignal(44100, np.concatenate([np.zeros(100), np.full(100, 0.9)]))
    fits = decompose(sig, FitConfig(n_waves=1, passes=1, step=1e305), 2, 100, threads=1)
    assert fits[1].diverged and fits[1].error
    out, _ = resynthesize(fits)
    assert np.array_equal(out.samples[100:], np.zeros(100))


def test_resynthesize_clamps_and_counts():
    t = np.linspace(-1, 1, 10)
    fit = fit_frame(Frame(0, t, np.zeros(10)), FitConfig(n_waves=1, passes=1, backend="python"))
    fit.params = (WaveParams(5.0, 0.0, 0.25),)
    sig, n = resynthesize([fit])
    assert n == 10
    assert np.all(sig.samples == 1.0)
    with pytest.raises(ValueError):
        resynthesize([])


def test_fits_json_round_trip(tmp_path):
    sig = drifting_signal(3000)
    cfg = FitConfig(n_waves=3, passes=2, mode=Mode.DEPENDENT)
    fits = decompose(sig, cfg, 3, 1000, threads=1)
    norm = compute_time_normalization(3000)
    data = json.loads(json.dumps(fits_to_dict(fits, cfg, norm, 1000, 44100)))
    back, cfg2, rate = fits_from_dict(data)
    assert rate == 44100 and cfg2 == cfg
    for a, b in zip(fits, back):
        assert a.params == b.params
        np.testing.assert_allclose(a.times, b.times, rtol=0, atol=1e-12)
        np.testing.assert_allclose(a.final_h, b.final_h, rtol=0, atol=1e-9)

    path = tmp_path / "trace.csv"
    write_trace_csv(fits, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,time,original,predicted,predicted_unit_amplitude_mean"
    assert len(lines) == 3001
