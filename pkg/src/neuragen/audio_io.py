"""Minimal RIFF/WAVE decoder for 16-bit PCM speech recordings."""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedFile, UnsupportedFormat

PCM_DIVISOR = 32768.0
WAVE_FORMAT_PCM = 1
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono float samples in [-1, 1] at the file's native rate."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        if samples.size == 0:
            raise ValueError("AudioClip requires at least one sample")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.abs(samples) <= 1.0):
            raise ValueError("samples must lie in [-1.0, 1.0]")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, AudioClip):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.source_id == other.source_id
            and np.array_equal(self.samples, other.samples)
        )


def pcm_to_float(raw):
    """Map 16-bit signed PCM to float amplitude (scalar or array)."""
    if np.ndim(raw):
        return np.asarray(raw, dtype=np.float64) / PCM_DIVISOR
    return float(raw) / PCM_DIVISOR


def float_to_pcm(x):
    """Inverse of :func:`pcm_to_float`; rounds and saturates to int16."""
    scaled = np.rint(np.asarray(x, dtype=np.float64) * PCM_DIVISOR)
    out = np.clip(scaled, -32768, 32767).astype(np.int16)
    return out if np.ndim(x) else int(out)


def _parse_chunks(data: bytes):
    if len(data) < 12:
        raise MalformedFile("file too short for a RIFF header")
    riff, _riff_size, wave_id = struct.unpack("<4sI4s", data[:12])
    if riff != b"RIFF" or wave_id != b"WAVE":
        raise MalformedFile("missing RIFF/WAVE signature")
    pos = 12
    chunks = {}
    while pos + 8 <= len(data):
        cid, size = struct.unpack("<4sI", data[pos : pos + 8])
        body_start = pos + 8
        body_end = body_start + size
        if body_end > len(data):
            raise MalformedFile(f"chunk {cid!r} declares {size} bytes but file is truncated")
        chunks.setdefault(cid, data[body_start:body_end])
        pos = body_end + (size & 1)  # chunks are word aligned
    return chunks


def decode_wav_bytes(data: bytes, source_id: str = "") -> AudioClip:
    chunks = _parse_chunks(data)
    fmt = chunks.get(b"fmt ")
    if fmt is None:
        raise MalformedFile("missing 'fmt ' chunk")
    if len(fmt) < 16:
        raise MalformedFile("'fmt ' chunk shorter than 16 bytes")
    audio_format, channels, sample_rate, _byte_rate, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if audio_format == WAVE_FORMAT_EXTENSIBLE and len(fmt) >= 26:
        audio_format = struct.unpack("<H", fmt[24:26])[0]
    if audio_format != WAVE_FORMAT_PCM:
        raise UnsupportedFormat(f"audio format {audio_format} is not PCM")
    if bits != 16:
        raise UnsupportedFormat(f"{bits}-bit samples are not supported (need 16)")
    if channels < 1 or sample_rate < 1:
        raise MalformedFile("invalid channel count or sample rate")
    if block_align != channels * 2:
        raise MalformedFile(f"block align {block_align} inconsistent with {channels} channels")
    payload = chunks.get(b"data")
    if payload is None:
        raise MalformedFile("missing 'data' chunk")
    n_frames = len(payload) // block_align
    if n_frames == 0:
        raise MalformedFile("'data' chunk holds no complete sample frames")
    raw = np.frombuffer(payload[: n_frames * block_align], dtype="<i2").reshape(n_frames, channels)
    mono = raw.astype(np.float64).mean(axis=1)
    return AudioClip(mono / PCM_DIVISOR, int(sample_rate), source_id)


def read_wav(path) -> AudioClip:
    """Decode a 16-bit PCM WAV file; multi-channel input is averaged to mono."""
    path = Path(path)
    return decode_wav_bytes(path.read_bytes(), source_id=path.stem)


def write_wav(path, samples, sample_rate: int) -> None:
    """Write mono or (n, channels) float samples as 16-bit PCM."""
    pcm = float_to_pcm(np.asarray(samples, dtype=np.float64))
    channels = 1 if pcm.ndim == 1 else pcm.shape[1]
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.astype("<i2").tobytes())
