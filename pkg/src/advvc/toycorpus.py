"""Synthetic multi-speaker corpus so the whole pipeline runs without external data.

Every speaker draws utterances from one shared phoneme-sequence sampler. A phoneme is a
formant pattern (voiced) or a noise band (unvoiced); a speaker is a deterministic spectral
coloration: fundamental frequency, a formant-scale factor, a spectral tilt and a fixed
resonance that carries no phonetic information (a stand-in for voice-quality cues).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpusio import UtteranceRecord, write_manifest, write_wav

VOWELS = {
    "aa": (730, 1090, 2440),
    "iy": (270, 2290, 3010),
    "uw": (300, 870, 2240),
    "eh": (530, 1840, 2480),
    "ow": (570, 840, 2410),
    "ae": (660, 1720, 2410),
    "er": (490, 1350, 1690),
    "ah": (520, 1190, 2390),
}
FRICATIVES = {
    "s": (5500, 1200),
    "sh": (3200, 900),
}
PHONEMES = tuple(VOWELS) + tuple(FRICATIVES)


@dataclass(frozen=True)
class ToySpeaker:
    name: str
    f0: float
    formant_scale: float
    tilt_db_per_octave: float
    resonance_hz: float = 0.0     # phoneme-independent spectral peak; 0 disables it


def toy_speakers(n: int) -> list[ToySpeaker]:
    """Speakers alternate low/high register; larger n interpolates between the extremes."""
    out = []
    for i in range(n):
        frac = 0.0 if n == 1 else i / (n - 1)
        if n == 2:
            frac = float(i)
        out.append(ToySpeaker(
            name=f"spk{i}",
            f0=110.0 + 110.0 * frac,
            formant_scale=1.0 + 0.2 * frac,
            tilt_db_per_octave=-7.0 + 4.0 * frac,
            resonance_hz=3000.0 + 1500.0 * frac,
        ))
    return out


def sample_phonemes(rng: np.random.Generator, min_len: int = 4, max_len: int = 7) -> list[str]:
    n = int(rng.integers(min_len, max_len + 1))
    seq = []
    for _ in range(n):
        choices = [p for p in PHONEMES if not seq or p != seq[-1]]
        seq.append(choices[int(rng.integers(len(choices)))])
    return seq


def _resonance(freqs: np.ndarray, spk: ToySpeaker) -> np.ndarray:
    if spk.resonance_hz <= 0:
        return np.ones_like(freqs)
    return 1.0 + 2.0 * np.exp(-0.5 * ((freqs - spk.resonance_hz) / 200.0) ** 2)


def _envelope(freqs: np.ndarray, phoneme: str, spk: ToySpeaker) -> np.ndarray:
    formants = np.asarray(VOWELS[phoneme]) * spk.formant_scale
    env = np.zeros_like(freqs)
    for k, f in enumerate(formants):
        bw = 80.0 + 40.0 * k
        env += (0.8 ** k) * np.exp(-0.5 * ((freqs - f) / bw) ** 2)
    octaves = np.log2(np.maximum(freqs, 50.0) / 100.0)
    return (env + 0.02) * _resonance(freqs, spk) * 10.0 ** (spk.tilt_db_per_octave * octaves / 20.0)


def synthesize_utterance(phonemes: list[str], spk: ToySpeaker, rng: np.random.Generator,
                         sample_rate: int = 16000, hop: int = 160) -> np.ndarray:
    durations = [int(rng.integers(5, 10)) * hop for _ in phonemes]
    n = sum(durations)
    t = np.arange(n) / sample_rate
    f0 = spk.f0 * (1.0 + 0.03 * np.sin(2 * np.pi * (3.0 + rng.random()) * t + rng.random() * 6.28))
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate

    # per-segment weights, cross-faded over 10 ms
    seg = np.zeros((len(phonemes), n))
    start = 0
    for i, d in enumerate(durations):
        seg[i, start:start + d] = 1.0
        start += d
    fade = np.hanning(hop + 1)
    fade /= fade.sum()
    seg = np.stack([np.convolve(s, fade, mode="same") for s in seg])

    out = np.zeros(n)
    n_harm = int((sample_rate / 2 - 200) // spk.f0)
    harm_freqs = spk.f0 * np.arange(1, n_harm + 1)
    for i, p in enumerate(phonemes):
        if p in VOWELS:
            amps = _envelope(harm_freqs, p, spk)
            voiced = np.zeros(n)
            for k, a in enumerate(amps, start=1):
                voiced += a * np.sin(k * phase)
            out += seg[i] * voiced
        else:
            center, bw = FRICATIVES[p]
            noise = rng.standard_normal(n)
            spec = np.fft.rfft(noise)
            freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
            shape = np.exp(-0.5 * ((freqs - center * spk.formant_scale) / bw) ** 2) * _resonance(freqs, spk)
            out += seg[i] * 0.3 * np.fft.irfft(spec * shape, n=n)
    out += 1e-3 * rng.standard_normal(n)
    return 0.5 * out / (np.max(np.abs(out)) + 1e-9)


def generate_toy_corpus(out_dir, n_speakers: int = 2, utts_per_speaker: int = 20, test_per_speaker: int = 10,
                        seed: int = 0, sample_rate: int = 16000, prefix: str = "") -> dict[str, Path]:
    """Write WAVs plus ``train.tsv`` and ``test.tsv`` manifests under ``out_dir``.

    Training utterances are non-parallel (each speaker gets its own phoneme sequences);
    test utterances share content across speakers and are named ``<speaker>_test_<k>``.
    """
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    speakers = toy_speakers(n_speakers)
    if prefix:
        speakers = [ToySpeaker(prefix + s.name, s.f0, s.formant_scale, s.tilt_db_per_octave, s.resonance_hz) for s in speakers]
    splits: dict[str, list[UtteranceRecord]] = {"train": [], "test": []}
    for si, spk in enumerate(speakers):
        for split, count in (("train", utts_per_speaker), ("test", test_per_speaker)):
            rng = np.random.default_rng([seed, si, 0 if split == "train" else 1])
            for u in range(count):
                if split == "test":
                    # test content is parallel across speakers so MCD has a natural reference
                    phonemes = sample_phonemes(np.random.default_rng([seed, 1000, u]))
                else:
                    phonemes = sample_phonemes(rng)
                wav = synthesize_utterance(phonemes, spk, rng, sample_rate)
                utt = f"{spk.name}_{split}_{u:03d}"
                path = out_dir / "wav" / f"{utt}.wav"
                write_wav(path, wav, sample_rate)
                splits[split].append(UtteranceRecord(utt, str(path), spk.name, tuple(phonemes)))
    paths = {}
    for split, recs in splits.items():
        paths[split] = out_dir / f"{split}.tsv"
        write_manifest(paths[split], recs)
    return paths
