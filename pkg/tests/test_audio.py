"""Mel analysis, shifting, blending per the convex law, and inversion."""

from __future__ import annotations

import numpy as np
import pytest

from avpf_forge.audio import (
    AsbParams,
    StftParams,
    audio_self_blend,
    blend_mel,
    mel_analyze,
    mel_filterbank,
    mel_invert,
    plan_mel_shift,
    shift_mel,
    stft,
)
from avpf_forge.errors import RangeError, ValidationError
from avpf_forge.media import AudioTrack
from avpf_forge.windows import BlendSchedule

from conftest import make_clip

SR = 16000
PARAMS = StftParams()


def tone(freq_hz: float, duration_s: float = 1.0, amplitude: float = 0.5) -> AudioTrack:
    t = np.arange(int(SR * duration_s)) / SR
    return AudioTrack(samples=amplitude * np.sin(2 * np.pi * freq_hz * t), sample_rate=SR)


def three_tone_signal(duration_s: float = 1.5) -> AudioTrack:
    """Speech-band fixture: 400/600/800 Hz partials, hop-aligned at 100 steps/s."""
    t = np.arange(int(SR * duration_s)) / SR
    x = sum(0.25 * np.sin(2 * np.pi * f * t + 0.1 * k) for k, f in enumerate((400.0, 600.0, 800.0)))
    x = x / np.max(np.abs(x)) * 0.8
    return AudioTrack(samples=x, sample_rate=SR)


def htk_filter_response(freq_hz: float, mel_bins: int, fmin: float, fmax: float) -> np.ndarray:
    """Independent filter response at one frequency from the HTK formula."""
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    edges = to_hz(np.linspace(to_mel(fmin), to_mel(fmax), mel_bins + 2))
    response = np.zeros(mel_bins)
    for i in range(mel_bins):
        lo, center, hi = edges[i], edges[i + 1], edges[i + 2]
        if lo <= freq_hz <= center and center > lo:
            response[i] = (freq_hz - lo) / (center - lo)
        elif center < freq_hz <= hi and hi > center:
            response[i] = (hi - freq_hz) / (hi - center)
    return response


def logmel_l1(reference: np.ndarray, test: np.ndarray, top_db: float = 80.0) -> float:
    """Mean |log difference| with the standard 80 dB dynamic-range clamp."""
    floor = reference.max() * 10.0 ** (-top_db / 20.0)
    return float(
        np.mean(
            np.abs(
                np.log(np.maximum(reference, floor)) - np.log(np.maximum(test, floor))
            )
        )
    )


class TestMelAnalyze:
    def test_tone_concentrates_in_expected_bin(self):
        mel = mel_analyze(tone(440.0), PARAMS)
        expected_bin = int(np.argmax(htk_filter_response(440.0, 80, 0.0, SR / 2)))
        argmax = np.argmax(mel.mags, axis=0)
        interior = argmax[2:-2]
        assert np.all(np.abs(interior - expected_bin) <= 1)
        # stable across frames
        assert np.unique(interior).size <= 2

    def test_silence_gives_zero(self):
        silent = AudioTrack(samples=np.zeros(SR), sample_rate=SR)
        mel = mel_analyze(silent, PARAMS)
        assert np.all(mel.mags == 0.0)

    def test_total_energy_matches_recomputed_weighting(self):
        rng = np.random.default_rng(0)
        noise = AudioTrack(samples=np.clip(0.3 * rng.standard_normal(SR), -1, 1), sample_rate=SR)
        mel = mel_analyze(noise, PARAMS)
        spec = np.abs(stft(noise.samples, PARAMS))
        fb = np.stack(
            [htk_filter_response(f, 80, 0.0, SR / 2) for f in np.linspace(0, SR / 2, 257)]
        ).T
        expected = (fb @ spec).sum()
        assert abs(mel.mags.sum() - expected) / expected < 1e-5

    def test_too_short_audio_rejected(self):
        short = AudioTrack(samples=np.zeros(PARAMS.win - 1), sample_rate=SR)
        with pytest.raises(RangeError):
            mel_analyze(short, PARAMS)

    def test_step_count(self):
        mel = mel_analyze(tone(300.0, 1.0), PARAMS)
        assert mel.n_steps == 1 + SR // PARAMS.hop
        assert mel.steps_per_second == 100.0


class TestShiftMel:
    def test_seconds_to_columns(self):
        mel = mel_analyze(tone(440.0), PARAMS)
        shifted = shift_mel(mel, 0.04)  # 4 columns at 100 steps/s
        assert np.array_equal(shifted.mags[:, :-4], mel.mags[:, 4:])
        assert np.array_equal(shifted.mags[:, -1], mel.mags[:, -1])

    def test_subresolution_shift_rejected(self):
        mel = mel_analyze(tone(440.0), PARAMS)
        with pytest.raises(RangeError):
            shift_mel(mel, 0.004)

    def test_reflect_round_trip_interior(self):
        mel = mel_analyze(three_tone_signal(0.5), PARAMS)
        k = 3
        there = shift_mel(mel, k / 100.0, boundary_policy="reflect")
        back = shift_mel(there, -k / 100.0, boundary_policy="reflect")
        assert np.array_equal(back.mags[:, k:-k], mel.mags[:, k:-k])


class TestBlendMel:
    def test_beta_zero_identity(self):
        mel = mel_analyze(tone(440.0), PARAMS)
        shifted = shift_mel(mel, 0.03)
        schedule = BlendSchedule(values=np.zeros(mel.n_steps), peak=1.0)
        assert np.array_equal(blend_mel(mel, shifted, schedule).mags, mel.mags)

    def test_beta_one_replacement(self):
        mel = mel_analyze(tone(440.0), PARAMS)
        shifted = shift_mel(mel, 0.03)
        schedule = BlendSchedule(values=np.ones(mel.n_steps), peak=1.0)
        assert np.array_equal(blend_mel(mel, shifted, schedule).mags, shifted.mags)

    def test_single_column_hand_value(self):
        # s = 2.0, s' = 6.0, beta = 0.25 -> 3.0
        base = mel_analyze(tone(440.0, 0.1), PARAMS)
        a = base.mags.copy()
        b = base.mags.copy()
        a[:, 0] = 2.0
        b[:, 0] = 6.0
        from dataclasses import replace

        mel_a = replace(base, mags=a)
        mel_b = replace(base, mags=b)
        values = np.zeros(base.n_steps)
        values[0] = 0.25
        schedule = BlendSchedule(values=values, peak=1.0)
        out = blend_mel(mel_a, mel_b, schedule)
        assert np.allclose(out.mags[:, 0], 3.0, atol=1e-12)
        assert np.array_equal(out.mags[:, 1:], a[:, 1:])

    def test_length_mismatch_rejected(self):
        mel = mel_analyze(tone(440.0), PARAMS)
        shifted = shift_mel(mel, 0.03)
        schedule = BlendSchedule(values=np.zeros(mel.n_steps - 1), peak=1.0)
        with pytest.raises(ValidationError):
            blend_mel(mel, shifted, schedule)


class TestMelInvert:
    def test_tone_round_trip_snr(self):
        track = tone(440.0)
        mel = mel_analyze(track, PARAMS)
        rebuilt = mel_invert(mel, iterations=32)
        s_in = np.abs(stft(track.samples, PARAMS))
        s_out = np.abs(stft(rebuilt.samples[: track.samples.size], PARAMS))
        s_out = s_out[:, : s_in.shape[1]]
        bin_idx = int(round(440.0 * PARAMS.n_fft / SR))
        num = np.sum(s_in[bin_idx] ** 2)
        den = np.sum((s_in[bin_idx, : s_out.shape[1]] - s_out[bin_idx]) ** 2)
        assert 10 * np.log10(num / den) >= 20.0

    def test_zero_mel_gives_silence(self):
        mel = mel_analyze(tone(440.0, 0.2), PARAMS)
        from dataclasses import replace

        zero = replace(mel, mags=np.zeros_like(mel.mags))
        out = mel_invert(zero, iterations=4)
        assert np.all(out.samples == 0.0)

    def test_deterministic(self):
        mel = mel_analyze(three_tone_signal(0.4), PARAMS)
        a = mel_invert(mel, iterations=8)
        b = mel_invert(mel, iterations=8)
        assert np.array_equal(a.samples, b.samples)

    def test_output_length_within_one_hop(self):
        track = tone(440.0, 0.73)
        mel = mel_analyze(track, PARAMS)
        out = mel_invert(mel, iterations=2)
        assert abs(out.samples.size - track.samples.size) < PARAMS.hop

    def test_iterations_validated(self):
        mel = mel_analyze(tone(440.0, 0.2), PARAMS)
        with pytest.raises(ValidationError):
            mel_invert(mel, iterations=0)


class TestRoundTripFidelity:
    def test_three_tone_log_mel_floor(self):
        track = three_tone_signal()
        mel = mel_analyze(track, PARAMS)
        rebuilt = mel_invert(mel, iterations=32)
        mel_back = mel_analyze(
            AudioTrack(samples=rebuilt.samples[: track.samples.size], sample_rate=SR), PARAMS
        )
        n = min(mel.n_steps, mel_back.n_steps)
        assert logmel_l1(mel.mags[:, :n], mel_back.mags[:, :n]) <= 0.1


class TestAudioSelfBlend:
    def test_video_untouched_and_manifest_in_range(self):
        clip = make_clip(n_frames=40, height=8, width=8, seed=10)
        out, record = audio_self_blend(
            clip,
            AsbParams(),
            window_count=1,
            window_len_s=(0.3, 0.8),
            ramp_fraction=0.2,
            peak=1.0,
            rng=np.random.default_rng(5),
        )
        assert out.frames is clip.frames
        assert 0.02 <= abs(record.shift_seconds) <= 0.05
        assert out.audio.samples.size == clip.audio.samples.size
        assert not np.array_equal(out.audio.samples, clip.audio.samples)

    def test_shift_draw_always_in_range(self):
        params = AsbParams()
        for seed in range(200):
            shift = plan_mel_shift(params, np.random.default_rng(seed))
            assert 0.02 <= abs(shift) <= 0.05
            steps = shift * params.stft.steps_per_second
            assert abs(steps - round(steps)) < 1e-9

    def test_zero_window_config_rejected(self):
        from avpf_forge.config import WindowParams

        with pytest.raises(ValidationError):
            WindowParams(window_count=0).validate()

    def test_subresolution_range_rejected(self):
        with pytest.raises(ValidationError):
            AsbParams(shift_s_range=(0.001, 0.004)).validate()
