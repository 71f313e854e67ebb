"""Audio self-blending on the Mel-spectrogram and inversion back to audio.

The waveform is analyzed into a magnitude Mel-spectrogram, a column-
shifted copy is blended in per time step, and the result is inverted
back to a waveform:

    out[:, t] = mel[:, t] * (1 - b[t]) + shifted[:, t] * b[t]

Analysis is a center-padded magnitude STFT projected through a
triangular Mel filterbank (HTK frequency spacing, unit-peak filters).
Inversion estimates a linear spectrogram from the Mel bins (clipped
least-squares refined by multiplicative non-negative updates) and
reconstructs phase with momentum-accelerated Griffin-Lim iterations from
a zero-phase start, so the whole path is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import get_window

from avpf_forge.errors import RangeError, ValidationError
from avpf_forge.manifest import AsbRecord
from avpf_forge.media import AudioTrack, Clip
from avpf_forge.visual import resolve_indices
from avpf_forge.windows import BlendSchedule, sample_windows, schedule_for_windows

_MEL_REFINE_STEPS = 30
_GL_MOMENTUM = 0.99


@dataclass(frozen=True)
class StftParams:
    """Analysis frame layout. Defaults: 25 ms window, 10 ms hop at 16 kHz.

    The default hop gives an integer 100 Mel steps per second, an exact
    multiple of the conventional 25 fps frame rate, so frame-rate windows
    map onto Mel-step windows by integer scaling.
    """

    n_fft: int = 512
    hop: int = 160
    win: int = 400
    window_fn: str = "hann"
    sample_rate: int = 16000

    def __post_init__(self) -> None:
        if not (0 < self.hop <= self.win <= self.n_fft):
            raise ValidationError(
                f"need 0 < hop <= win <= n_fft, got hop={self.hop} win={self.win} n_fft={self.n_fft}"
            )
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive")

    @property
    def steps_per_second(self) -> float:
        return self.sample_rate / self.hop

    def padded_window(self) -> np.ndarray:
        taper = get_window(self.window_fn, self.win, fftbins=True).astype(np.float64)
        out = np.zeros(self.n_fft)
        lpad = (self.n_fft - self.win) // 2
        out[lpad : lpad + self.win] = taper
        return out


@dataclass(frozen=True)
class MelSpectrogram:
    """Non-negative magnitudes, shape (mel_bins, n_steps)."""

    mags: np.ndarray
    params: StftParams
    mel_bins: int
    fmin: float
    fmax: float

    def __post_init__(self) -> None:
        mags = np.asarray(self.mags, dtype=np.float64).copy()
        if mags.ndim != 2 or mags.shape[0] != self.mel_bins:
            raise ValidationError(f"mags must have shape (mel_bins, T), got {mags.shape}")
        if not np.all(np.isfinite(mags)):
            raise ValidationError("mel magnitudes contain NaN or Inf")
        if mags.min() < 0:
            raise ValidationError("mel magnitudes must be non-negative")
        mags.setflags(write=False)
        object.__setattr__(self, "mags", mags)

    @property
    def n_steps(self) -> int:
        return self.mags.shape[1]

    @property
    def steps_per_second(self) -> float:
        return self.params.steps_per_second


def hz_to_mel(freq_hz):
    """HTK Mel scale: 2595 log10(1 + f / 700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(params: StftParams, mel_bins: int, fmin: float, fmax: float) -> np.ndarray:
    """Triangular unit-peak filters on HTK-spaced centers, shape (M, n_fft//2+1)."""
    if not (0 <= fmin < fmax <= params.sample_rate / 2):
        raise ValidationError(f"need 0 <= fmin < fmax <= Nyquist, got [{fmin}, {fmax}]")
    if mel_bins < 1:
        raise ValidationError("mel_bins must be >= 1")
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), mel_bins + 2))
    bin_freqs = np.linspace(0.0, params.sample_rate / 2, params.n_fft // 2 + 1)
    fb = np.zeros((mel_bins, bin_freqs.size))
    for i in range(mel_bins):
        lo, center, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        rising = (bin_freqs - lo) / max(center - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - center, 1e-12)
        fb[i] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def stft(samples: np.ndarray, params: StftParams) -> np.ndarray:
    """Center-padded (reflect) complex STFT, shape (n_fft//2+1, 1 + n//hop)."""
    samples = np.asarray(samples, dtype=np.float64)
    pad = params.n_fft // 2
    padded = np.pad(samples, pad, mode="reflect")
    n_frames = 1 + samples.size // params.hop
    idx = np.arange(params.n_fft)[None, :] + params.hop * np.arange(n_frames)[:, None]
    return np.fft.rfft(padded[idx] * params.padded_window(), axis=1).T


def istft(spec: np.ndarray, params: StftParams, length: int) -> np.ndarray:
    """Least-squares inverse of :func:`stft` (weighted overlap-add)."""
    window = params.padded_window()
    n_frames = spec.shape[1]
    total = params.n_fft + (n_frames - 1) * params.hop
    acc = np.zeros(total)
    norm = np.zeros(total)
    frames = np.fft.irfft(spec.T, n=params.n_fft, axis=1)
    for t in range(n_frames):
        start = t * params.hop
        acc[start : start + params.n_fft] += frames[t] * window
        norm[start : start + params.n_fft] += window * window
    pad = params.n_fft // 2
    acc = acc[pad : pad + length]
    norm = norm[pad : pad + length]
    covered = norm > 1e-10
    acc[covered] /= norm[covered]
    return acc


def mel_analyze(
    audio: AudioTrack,
    params: StftParams,
    mel_bins: int = 80,
    fmin: float = 0.0,
    fmax: float | None = None,
) -> MelSpectrogram:
    """Magnitude Mel-spectrogram of a waveform."""
    if audio.samples.size < params.win:
        raise RangeError(
            f"audio of {audio.samples.size} samples is shorter than one window ({params.win})"
        )
    if audio.sample_rate != params.sample_rate:
        raise ValidationError(
            f"audio sample rate {audio.sample_rate} != analysis rate {params.sample_rate}"
        )
    if fmax is None:
        fmax = params.sample_rate / 2
    fb = mel_filterbank(params, mel_bins, fmin, fmax)
    mags = fb @ np.abs(stft(audio.samples, params))
    return MelSpectrogram(mags=mags, params=params, mel_bins=mel_bins, fmin=fmin, fmax=fmax)


def shift_mel(
    mel: MelSpectrogram, shift_s: float, boundary_policy: str = "clamp"
) -> MelSpectrogram:
    """Shift columns by round(shift_s * steps_per_second) steps.

    A shift that rounds to zero steps is rejected: the configured range
    must exceed one Mel step.
    """
    if boundary_policy not in ("clamp", "reflect"):
        raise ValidationError("boundary_policy must be 'clamp' or 'reflect'")
    steps = int(round(shift_s * mel.steps_per_second))
    if steps == 0:
        raise RangeError(
            f"shift of {shift_s}s rounds to zero Mel steps at "
            f"{mel.steps_per_second:.1f} steps/s"
        )
    if abs(steps) >= mel.n_steps:
        raise RangeError(f"|shift| = {abs(steps)} steps must be < {mel.n_steps}")
    idx = resolve_indices(mel.n_steps, steps, boundary_policy)
    return replace(mel, mags=mel.mags[:, idx])


def blend_mel(
    mel: MelSpectrogram, shifted: MelSpectrogram, schedule: BlendSchedule
) -> MelSpectrogram:
    """Columnwise convex combination of the original and shifted spectrograms."""
    if shifted.mags.shape != mel.mags.shape:
        raise ValidationError("shifted spectrogram shape differs from original")
    if schedule.values.shape[0] != mel.n_steps:
        raise ValidationError(
            f"schedule length {schedule.values.shape[0]} != Mel steps {mel.n_steps}"
        )
    beta = schedule.values[None, :]
    out = mel.mags * (1.0 - beta) + shifted.mags * beta
    return replace(mel, mags=out)


def _mel_to_linear(mel: MelSpectrogram) -> np.ndarray:
    """Non-negative linear-magnitude estimate from Mel magnitudes.

    Clipped pseudo-inverse start, then multiplicative updates that drive
    the Mel-domain residual toward zero while keeping non-negativity.
    """
    fb = mel_filterbank(mel.params, mel.mel_bins, mel.fmin, mel.fmax)
    linear = np.maximum(0.0, np.linalg.pinv(fb) @ mel.mags)
    col_sums = np.maximum(fb.sum(axis=0)[:, None], 1e-12)
    for _ in range(_MEL_REFINE_STEPS):
        ratio = mel.mags / np.maximum(fb @ linear, 1e-12)
        linear *= (fb.T @ ratio) / col_sums
    return linear


def mel_invert(
    mel: MelSpectrogram,
    iterations: int = 32,
    rng: np.random.Generator | None = None,
    init: str = "zeros",
) -> AudioTrack:
    """Invert a Mel-spectrogram to a waveform.

    Runs ``iterations`` Griffin-Lim projections with momentum from a
    zero-phase start (``init="random"`` draws phases from ``rng``
    instead). Output length is (n_steps - 1) * hop, within one hop of the
    analyzed signal; samples are clipped to [-1, 1]. With the default
    init the result is a pure function of the spectrogram.
    """
    if iterations < 1:
        raise ValidationError("iterations must be >= 1")
    if init not in ("zeros", "random"):
        raise ValidationError("init must be 'zeros' or 'random'")
    if init == "random" and rng is None:
        raise ValidationError("random init requires an rng")
    target = _mel_to_linear(mel)
    length = (mel.n_steps - 1) * mel.params.hop
    if init == "zeros":
        angles = np.ones_like(target, dtype=np.complex128)
    else:
        angles = np.exp(2j * np.pi * rng.random(target.shape))
    momentum = _GL_MOMENTUM / (1.0 + _GL_MOMENTUM)
    rebuilt = np.zeros_like(target, dtype=np.complex128)
    for _ in range(iterations):
        previous = rebuilt
        estimate = istft(target * angles, mel.params, length)
        rebuilt = stft(estimate, mel.params)
        angles = rebuilt - momentum * previous
        mags = np.abs(angles)
        mags[mags < 1e-16] = 1e-16
        angles = angles / mags
    samples = np.clip(istft(target * angles, mel.params, length), -1.0, 1.0)
    return AudioTrack(samples=samples, sample_rate=mel.params.sample_rate)


@dataclass(frozen=True)
class AsbParams:
    """Audio self-blend configuration."""

    shift_s_range: tuple[float, float] = (0.02, 0.05)
    stft: StftParams = field(default_factory=StftParams)
    mel_bins: int = 80
    gl_iterations: int = 32

    def validate(self) -> None:
        lo, hi = self.shift_s_range
        if not (0 < lo <= hi):
            raise ValidationError("shift_s_range must satisfy 0 < lo <= hi")
        if round(lo * self.stft.steps_per_second) < 1:
            raise ValidationError(
                f"shift_s_range lower bound {lo}s rounds below one Mel step "
                f"at {self.stft.steps_per_second:.1f} steps/s"
            )
        if self.mel_bins < 1:
            raise ValidationError("mel_bins must be >= 1")
        if self.gl_iterations < 1:
            raise ValidationError("gl_iterations must be >= 1")


def plan_mel_shift(params: AsbParams, rng: np.random.Generator) -> float:
    """Draw a signed shift realizable as a whole number of Mel steps."""
    params.validate()
    rate = params.stft.steps_per_second
    lo = math.ceil(params.shift_s_range[0] * rate - 1e-9)
    hi = math.floor(params.shift_s_range[1] * rate + 1e-9)
    hi = max(hi, lo)
    steps = int(rng.integers(lo, hi + 1))
    sign = 1 if int(rng.integers(0, 2)) == 1 else -1
    return sign * steps / rate


def fix_length(samples: np.ndarray, length: int) -> np.ndarray:
    """Trim or zero-pad to an exact sample count."""
    if samples.size >= length:
        return samples[:length]
    return np.pad(samples, (0, length - samples.size))


def audio_self_blend(
    clip: Clip,
    params: AsbParams,
    window_count: int,
    window_len_s: tuple[float, float],
    ramp_fraction: float,
    peak: float,
    rng: np.random.Generator,
) -> tuple[Clip, AsbRecord]:
    """Apply one audio self-blend; video frames pass through untouched."""
    params.validate()
    mel = mel_analyze(clip.audio, params.stft, params.mel_bins)
    window_set = sample_windows(
        mel.n_steps,
        mel.steps_per_second,
        window_len_s[0],
        window_len_s[1],
        window_count,
        rng,
    )
    schedule = schedule_for_windows(window_set, ramp_fraction, peak)
    shift_s = plan_mel_shift(params, rng)
    blended = blend_mel(mel, shift_mel(mel, shift_s), schedule)
    rebuilt = mel_invert(blended, iterations=params.gl_iterations)
    samples = fix_length(rebuilt.samples, clip.audio.samples.size)
    out = clip.with_audio(AudioTrack(samples=samples, sample_rate=clip.audio.sample_rate))
    record = AsbRecord(
        shift_seconds=shift_s,
        windows=window_set.windows,
        beta_peak=tuple(peak for _ in window_set.windows),
    )
    return out, record
