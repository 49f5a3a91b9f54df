"""Frame-level acoustic features: MFCC, RMS, F0, spectral shape, ZCR.

Framing follows the common librosa conventions (centered frames with
reflection padding, periodic Hann window, Slaney mel scale) so results can
be compared against that toolchain.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct

from .audio_io import AudioClip
from .errors import ClipTooShort, InvalidConfig, NoVoicedFrames


@dataclass(frozen=True)
class DspConfig:
    frame_length: int = 2048
    hop_length: int = 512
    n_mels: int = 128
    n_mfcc: int = 20
    fmin: float = 0.0
    fmax: Optional[float] = None  # None means sample_rate / 2
    rolloff_fraction: float = 0.85
    f0_min: float = 65.0
    f0_max: float = 500.0
    yin_threshold: float = 0.1
    db_floor: float = 1e-10
    db_top: float = 80.0

    def resolved_fmax(self, sample_rate: int) -> float:
        return sample_rate / 2.0 if self.fmax is None else float(self.fmax)

    def validate(self, sample_rate: int) -> None:
        n = self.frame_length
        if n < 2 or n & (n - 1):
            raise InvalidConfig(f"frame_length must be a power of two, got {n}")
        if not 0 < self.hop_length <= n:
            raise InvalidConfig(f"hop_length must be in (0, frame_length], got {self.hop_length}")
        fmax = self.resolved_fmax(sample_rate)
        if not 0 <= self.fmin < fmax:
            raise InvalidConfig(f"need 0 <= fmin < fmax, got fmin={self.fmin}, fmax={fmax}")
        if fmax > sample_rate / 2.0:
            raise InvalidConfig(f"fmax={fmax} exceeds Nyquist ({sample_rate / 2.0})")
        if not 1 <= self.n_mfcc <= self.n_mels:
            raise InvalidConfig("need 1 <= n_mfcc <= n_mels")
        if not 0 < self.f0_min < self.f0_max:
            raise InvalidConfig("need 0 < f0_min < f0_max")
        if not 0.0 < self.rolloff_fraction <= 1.0:
            raise InvalidConfig("rolloff_fraction must be in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FrameFeatures:
    mfcc: np.ndarray  # (n_frames, n_mfcc)
    rms: np.ndarray
    f0: np.ndarray  # voiced frames only, may be empty
    centroid: np.ndarray
    bandwidth: np.ndarray
    flatness: np.ndarray
    rolloff: np.ndarray
    zcr: np.ndarray
    sample_rate: int = 0
    source_id: str = ""

    @property
    def n_frames(self) -> int:
        return self.rms.shape[0]


# ---------------------------------------------------------------- framing


def frame_signal(samples: np.ndarray, frame_length: int, hop_length: int) -> np.ndarray:
    """Centered, reflection-padded frames of shape (1 + len // hop, frame_length)."""
    x = np.asarray(samples, dtype=np.float64)
    pad = frame_length // 2
    padded = np.pad(x, pad, mode="reflect")
    return sliding_window_view(padded, frame_length)[::hop_length]


def hann_periodic(n: int) -> np.ndarray:
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


def fft_frequencies(sample_rate: int, frame_length: int) -> np.ndarray:
    return np.arange(frame_length // 2 + 1) * (sample_rate / frame_length)


def _stft(clip: AudioClip, cfg: DspConfig) -> np.ndarray:
    frames = frame_signal(clip.samples, cfg.frame_length, cfg.hop_length)
    return np.fft.rfft(frames * hann_periodic(cfg.frame_length), axis=1)


def stft_power(clip: AudioClip, cfg: DspConfig = DspConfig()) -> np.ndarray:
    """Squared-magnitude one-sided spectrum, one row per frame."""
    spec = _stft(clip, cfg)
    return spec.real**2 + spec.imag**2


# ---------------------------------------------------------------- mel scale

_F_SP = 200.0 / 3.0
_MIN_LOG_HZ = 1000.0
_MIN_LOG_MEL = _MIN_LOG_HZ / _F_SP
_LOGSTEP = math.log(6.4) / 27.0


def hz_to_mel(hz):
    hz = np.asarray(hz, dtype=np.float64)
    linear = hz / _F_SP
    with np.errstate(divide="ignore"):
        log = _MIN_LOG_MEL + np.log(np.maximum(hz, _MIN_LOG_HZ) / _MIN_LOG_HZ) / _LOGSTEP
    return np.where(hz >= _MIN_LOG_HZ, log, linear)


def mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    linear = _F_SP * mel
    log = _MIN_LOG_HZ * np.exp(_LOGSTEP * (mel - _MIN_LOG_MEL))
    return np.where(mel >= _MIN_LOG_MEL, log, linear)


def mel_band_edges(cfg: DspConfig, sample_rate: int) -> np.ndarray:
    """The n_mels + 2 filter corner frequencies in Hz."""
    fmax = cfg.resolved_fmax(sample_rate)
    mels = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(fmax), cfg.n_mels + 2)
    return mel_to_hz(mels)


def mel_filterbank(cfg: DspConfig, sample_rate: int) -> np.ndarray:
    """Slaney-normalized triangular filters, shape (n_mels, frame_length // 2 + 1)."""
    cfg.validate(sample_rate)
    freqs = fft_frequencies(sample_rate, cfg.frame_length)
    edges = mel_band_edges(cfg, sample_rate)
    widths = np.diff(edges)
    ramps = edges[:, None] - freqs[None, :]
    lower = -ramps[:-2] / widths[:-1, None]
    upper = ramps[2:] / widths[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    return weights


def power_to_db(power: np.ndarray, cfg: DspConfig) -> np.ndarray:
    db = 10.0 * np.log10(np.maximum(power, cfg.db_floor))
    if cfg.db_top is not None:
        db = np.maximum(db, db.max() - cfg.db_top)
    return db


def mfcc(clip: AudioClip, cfg: DspConfig = DspConfig()) -> np.ndarray:
    """MFCC matrix with one row per frame and ``cfg.n_mfcc`` columns."""
    cfg.validate(clip.sample_rate)
    if len(clip) <= cfg.frame_length:
        raise ClipTooShort(f"{clip.source_id or 'clip'}: {len(clip)} samples, need > {cfg.frame_length}")
    mel_power = stft_power(clip, cfg) @ mel_filterbank(cfg, clip.sample_rate).T
    db = power_to_db(mel_power, cfg)
    return dct(db, type=2, norm="ortho", axis=1)[:, : cfg.n_mfcc]


# ---------------------------------------------------------------- time domain


def rms_per_frame(clip: AudioClip, cfg: DspConfig = DspConfig()) -> np.ndarray:
    frames = frame_signal(clip.samples, cfg.frame_length, cfg.hop_length)
    return np.sqrt(np.mean(frames**2, axis=1))


def zcr_per_frame(clip: AudioClip, cfg: DspConfig = DspConfig()) -> np.ndarray:
    """Fraction of adjacent sample pairs with differing sign; zero counts as positive."""
    frames = frame_signal(clip.samples, cfg.frame_length, cfg.hop_length)
    nonneg = frames >= 0
    return np.mean(nonneg[:, 1:] != nonneg[:, :-1], axis=1)


# ---------------------------------------------------------------- spectral shape


def spectral_descriptors(clip: AudioClip, cfg: DspConfig = DspConfig()):
    """Per-frame (centroid, bandwidth, flatness, rolloff).

    Centroid, bandwidth and rolloff are computed on the magnitude spectrum,
    flatness on the power spectrum. Frames with no energy give zeros.
    """
    mag = np.abs(_stft(clip, cfg))
    freqs = fft_frequencies(clip.sample_rate, cfg.frame_length)
    total = mag.sum(axis=1)
    silent = total == 0
    safe_total = np.where(silent, 1.0, total)

    centroid = (mag @ freqs) / safe_total
    spread = (mag * (freqs[None, :] - centroid[:, None]) ** 2).sum(axis=1) / safe_total
    bandwidth = np.sqrt(spread)

    power = np.maximum(mag**2, cfg.db_floor)
    flatness = np.exp(np.mean(np.log(power), axis=1)) / np.mean(power, axis=1)

    cumulative = np.cumsum(mag, axis=1)
    reached = cumulative >= cfg.rolloff_fraction * cumulative[:, -1:]
    rolloff = freqs[np.argmax(reached, axis=1)]

    for v in (centroid, bandwidth, flatness, rolloff):
        v[silent] = 0.0
    return centroid, bandwidth, flatness, rolloff


# ---------------------------------------------------------------- pitch


def yin_lag_range(cfg: DspConfig, sample_rate: int) -> tuple[int, int]:
    tau_min = max(1, int(math.floor(sample_rate / cfg.f0_max)))
    tau_max = int(math.ceil(sample_rate / cfg.f0_min))
    if tau_max >= cfg.frame_length:
        raise InvalidConfig(
            f"f0_min={cfg.f0_min} Hz needs a longer frame than {cfg.frame_length} samples at {sample_rate} Hz"
        )
    return tau_min, tau_max


def difference_function(frames: np.ndarray, tau_max: int) -> np.ndarray:
    """YIN squared-difference d(tau) for tau = 0..tau_max, one row per frame.

    Integration window is frame_length - tau_max so every lag sees the
    same number of terms.
    """
    n = frames.shape[1]
    w = n - tau_max
    nfft = 1 << int(math.ceil(math.log2(n + w)))
    head = np.fft.rfft(frames[:, :w], nfft, axis=1)
    full = np.fft.rfft(frames, nfft, axis=1)
    cross = np.fft.irfft(np.conj(head) * full, nfft, axis=1)[:, : tau_max + 1]

    sq = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames**2, axis=1)], axis=1)
    lags = np.arange(tau_max + 1)
    energy_lagged = sq[:, lags + w] - sq[:, lags]
    energy_head = sq[:, w : w + 1]
    return np.maximum(energy_head + energy_lagged - 2.0 * cross, 0.0)


def cumulative_mean_normalized(d: np.ndarray) -> np.ndarray:
    out = np.ones_like(d)
    running = np.cumsum(d[:, 1:], axis=1)
    lags = np.arange(1, d.shape[1])
    ok = running > 0
    out[:, 1:] = np.where(ok, d[:, 1:] * lags / np.where(ok, running, 1.0), 1.0)
    return out


def _pick_lag(cmnd: np.ndarray, tau_min: int, tau_max: int, threshold: float) -> Optional[float]:
    below = np.flatnonzero(cmnd[tau_min : tau_max + 1] < threshold)
    if below.size == 0:
        return None
    tau = tau_min + int(below[0])
    while tau + 1 <= tau_max and cmnd[tau + 1] < cmnd[tau]:
        tau += 1
    shift = 0.0
    if 1 <= tau - 1 and tau + 1 <= tau_max:
        a, b, c = cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]
        denom = a - 2.0 * b + c
        if denom > 0:
            shift = float(np.clip(0.5 * (a - c) / denom, -1.0, 1.0))
    return tau + shift


def estimate_f0(clip: AudioClip, cfg: DspConfig = DspConfig()) -> np.ndarray:
    """YIN pitch track, voiced frames only. Raises NoVoicedFrames if none."""
    tau_min, tau_max = yin_lag_range(cfg, clip.sample_rate)
    frames = frame_signal(clip.samples, cfg.frame_length, cfg.hop_length)
    cmnd = cumulative_mean_normalized(difference_function(frames, tau_max))
    estimates = []
    for row in cmnd:
        lag = _pick_lag(row, tau_min, tau_max, cfg.yin_threshold)
        if lag is not None:
            estimates.append(clip.sample_rate / lag)
    if not estimates:
        raise NoVoicedFrames(f"{clip.source_id or 'clip'}: no frame fell below the YIN threshold")
    return np.asarray(estimates)


# ---------------------------------------------------------------- all together


def extract_frame_features(clip: AudioClip, cfg: DspConfig = DspConfig()) -> FrameFeatures:
    """All eight per-frame features; an unvoiced clip yields an empty f0 vector."""
    coeffs = mfcc(clip, cfg)
    try:
        f0 = estimate_f0(clip, cfg)
    except NoVoicedFrames:
        f0 = np.empty(0)
    centroid, bandwidth, flatness, rolloff = spectral_descriptors(clip, cfg)
    return FrameFeatures(
        mfcc=coeffs,
        rms=rms_per_frame(clip, cfg),
        f0=f0,
        centroid=centroid,
        bandwidth=bandwidth,
        flatness=flatness,
        rolloff=rolloff,
        zcr=zcr_per_frame(clip, cfg),
        sample_rate=clip.sample_rate,
        source_id=clip.source_id,
    )
