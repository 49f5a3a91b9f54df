"""Synthetic labelled "vowel" corpus for self-contained runs.

Each clip is a harmonic series whose amplitudes follow a few formant
resonances, plus white noise. Male and female clips differ in F0 band and
in a mild upward formant shift for female voices.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import write_wav

F0_BANDS = {"M": (85.0, 155.0), "F": (165.0, 255.0)}
FEMALE_FORMANT_SHIFT = 1.17
# (F1, F2, F3) in Hz for a handful of adult male vowels
VOWELS = {
    "a": (730.0, 1090.0, 2440.0),
    "i": (270.0, 2290.0, 3010.0),
    "u": (300.0, 870.0, 2240.0),
    "e": (530.0, 1840.0, 2480.0),
    "o": (570.0, 840.0, 2410.0),
}
FORMANT_BANDWIDTHS = (90.0, 110.0, 170.0)
LABELS_FILE = "labels.csv"


@dataclass(frozen=True)
class SynthSpec:
    name: str
    gender: str  # "M" or "F"
    f0: float
    vowel: str
    snr_db: float
    peak: float


def vowel_tone(f0: float, formants, sample_rate: int, duration: float, rng: np.random.Generator) -> np.ndarray:
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    n_harm = int((0.45 * sample_rate) // f0)
    k = np.arange(1, n_harm + 1)
    freqs = k * f0
    gain = np.zeros(n_harm)
    for fc, bw in zip(formants, FORMANT_BANDWIDTHS):
        gain += 1.0 / (1.0 + ((freqs - fc) / bw) ** 2)
    gain = (gain + 0.02) / k  # glottal tilt
    phases = rng.uniform(0, 2 * np.pi, n_harm)
    x = np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]).T @ gain
    fade = min(n // 10, int(0.02 * sample_rate))
    if fade:
        ramp = np.linspace(0.0, 1.0, fade)
        x[:fade] *= ramp
        x[-fade:] *= ramp[::-1]
    return x


def render(spec: SynthSpec, sample_rate: int, duration: float, rng: np.random.Generator) -> np.ndarray:
    formants = np.asarray(VOWELS[spec.vowel])
    if spec.gender == "F":
        formants = formants * FEMALE_FORMANT_SHIFT
    x = vowel_tone(spec.f0, formants, sample_rate, duration, rng)
    x /= np.sqrt(np.mean(x**2))
    noise = rng.normal(0.0, 10 ** (-spec.snr_db / 20.0), x.size)
    y = x + noise
    return y * (spec.peak / np.max(np.abs(y)))


def generate_corpus(out_dir, per_class: int, seed: int, sample_rate: int = 16000, duration: float = 1.0) -> list:
    """Write ``2 * per_class`` WAVs plus ``labels.csv`` (file, gender, f0_hz)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = []
    for ci, gender in enumerate(("M", "F")):
        lo, hi = F0_BANDS[gender]
        for i in range(per_class):
            rng = np.random.default_rng(np.random.SeedSequence([seed, ci, i]))
            spec = SynthSpec(
                name=f"{gender}_{i:04d}.wav",
                gender=gender,
                f0=float(rng.uniform(lo, hi)),
                vowel=str(rng.choice(sorted(VOWELS))),
                snr_db=float(rng.uniform(15.0, 30.0)),
                peak=float(rng.uniform(0.3, 0.9)),
            )
            write_wav(out / spec.name, render(spec, sample_rate, duration, rng), sample_rate)
            specs.append(spec)
    with open(out / LABELS_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["file", "gender", "f0_hz"])
        for s in specs:
            w.writerow([s.name, s.gender, repr(s.f0)])
    return specs
