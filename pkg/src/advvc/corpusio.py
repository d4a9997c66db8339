"""Corpus manifests, WAV I/O, log-mel extraction, feature statistics and batching."""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch
from scipy.io import wavfile
from scipy.signal import get_window

from .errors import DataError, FingerprintMismatchError, ManifestError

PAD_ID = 0
EOS_ID = 1
STD_FLOOR = 1e-5


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    audio_path: str
    speaker_id: str
    phonemes: tuple[str, ...] = ()


@dataclass
class Manifest:
    records: list[UtteranceRecord]
    speakers: list[str]

    def __iter__(self):
        # allows `records, speakers = load_manifest(...)`
        return iter((self.records, self.speakers))

    def by_speaker(self, speaker_id: str) -> list[UtteranceRecord]:
        return [r for r in self.records if r.speaker_id == speaker_id]


class PhonemeInventory:
    """Symbol table with reserved pad (0) and end-of-sequence (1) ids."""

    def __init__(self, symbols: Iterable[str]):
        symbols = sorted(set(symbols))
        for reserved in ("<pad>", "<eos>"):
            if reserved in symbols:
                raise ManifestError(f"phoneme symbol {reserved!r} is reserved")
        self.symbols = symbols
        self._index = {s: i + 2 for i, s in enumerate(symbols)}

    @classmethod
    def from_records(cls, records: Iterable[UtteranceRecord]) -> "PhonemeInventory":
        return cls(p for r in records for p in r.phonemes)

    def __len__(self) -> int:
        return len(self.symbols) + 2

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def encode(self, phonemes: Sequence[str]) -> list[int]:
        try:
            return [self._index[p] for p in phonemes]
        except KeyError as err:
            raise DataError(f"unknown phoneme symbol {err.args[0]!r}") from None

    def decode(self, ids: Sequence[int]) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if i == EOS_ID:
                break
            if i >= 2:
                out.append(self.symbols[i - 2])
        return out


def load_manifest(path, phoneme_inventory: PhonemeInventory | Iterable[str] | None = None) -> Manifest:
    """Read a tab-separated manifest.

    Each non-blank line is ``utterance_id<TAB>audio_path<TAB>speaker_id[<TAB>phonemes]`` with
    phonemes space-separated. Lines starting with ``#`` are comments. Relative audio paths
    are resolved against the manifest's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    allowed = None
    if phoneme_inventory is not None:
        allowed = phoneme_inventory if isinstance(phoneme_inventory, PhonemeInventory) else set(phoneme_inventory)
    records = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) not in (3, 4) or not all(f.strip() for f in fields[:3]):
            raise ManifestError(f"{path}:{lineno}: expected 3 or 4 tab-separated fields, got {len(fields)}")
        utt, audio, spk = (f.strip() for f in fields[:3])
        phonemes = tuple(fields[3].split()) if len(fields) == 4 else ()
        if utt in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate utterance_id {utt!r} (first on line {seen[utt]})")
        seen[utt] = lineno
        if allowed is not None:
            for p in phonemes:
                if p not in allowed:
                    raise ManifestError(f"{path}:{lineno}: unknown phoneme symbol {p!r}")
        audio_path = Path(audio)
        if not audio_path.is_absolute():
            audio_path = path.parent / audio_path
        records.append(UtteranceRecord(utt, str(audio_path), spk, phonemes))
    speakers = sorted({r.speaker_id for r in records})
    return Manifest(records, speakers)


def write_manifest(path, records: Iterable[UtteranceRecord], relative_to=None) -> None:
    path = Path(path)
    base = Path(relative_to) if relative_to is not None else path.parent
    lines = []
    for r in records:
        audio = Path(r.audio_path)
        try:
            audio = audio.resolve().relative_to(base.resolve())
        except ValueError:
            pass
        fields = [r.utterance_id, str(audio), r.speaker_id]
        if r.phonemes:
            fields.append(" ".join(r.phonemes))
        lines.append("\t".join(fields))
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


# ---------------------------------------------------------------------------
# audio


def read_wav(path) -> tuple[np.ndarray, int]:
    """Return float64 samples in [-1, 1) and the sample rate."""
    sr, data = wavfile.read(str(path))
    if data.ndim > 1:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    else:
        samples = data.astype(np.float64)
    return samples, int(sr)


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write 16-bit PCM; samples are clipped to [-1, 1]."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    pcm = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0 - 1.0 / 32768.0)
    wavfile.write(str(path), int(sample_rate), np.round(pcm * 32768.0).astype(np.int16))


# ---------------------------------------------------------------------------
# mel extraction


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 16000
    n_mels: int = 80
    hop_length: int = 160
    win_length: int = 800
    n_fft: int = 1024
    fmin: float = 0.0
    fmax: float | None = None
    log_floor: float = 1e-10

    @classmethod
    def for_rate(cls, sample_rate: int, **overrides) -> "MelConfig":
        """10 ms hop, 50 ms Hann window, FFT size the next power of two above the window."""
        win = int(round(0.05 * sample_rate))
        params = dict(
            sample_rate=sample_rate,
            hop_length=int(round(0.01 * sample_rate)),
            win_length=win,
            n_fft=1 << (win - 1).bit_length(),
        )
        params.update(overrides)
        return cls(**params)

    @property
    def hop_seconds(self) -> float:
        return self.hop_length / self.sample_rate

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class MelSpectrogram:
    frames: np.ndarray
    hop: float = 0.010
    utterance_id: str = ""

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


_FILTERBANKS: dict[MelConfig, np.ndarray] = {}


def mel_filterbank(config: MelConfig) -> np.ndarray:
    """Unit-peak triangular filters on the HTK mel scale, shape (n_mels, n_fft // 2 + 1)."""
    if config in _FILTERBANKS:
        return _FILTERBANKS[config]
    fmax = config.fmax if config.fmax is not None else config.sample_rate / 2
    edges = mel_to_hz(np.linspace(hz_to_mel(config.fmin), hz_to_mel(fmax), config.n_mels + 2))
    bins = np.fft.rfftfreq(config.n_fft, 1.0 / config.sample_rate)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins[None, :] - lower) / (center - lower)
    falling = (upper - bins[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    _FILTERBANKS[config] = fb
    return fb


def mel_band_centers(config: MelConfig) -> np.ndarray:
    fmax = config.fmax if config.fmax is not None else config.sample_rate / 2
    edges = mel_to_hz(np.linspace(hz_to_mel(config.fmin), hz_to_mel(fmax), config.n_mels + 2))
    return edges[1:-1]


def analysis_window(config: MelConfig) -> np.ndarray:
    win = get_window("hann", config.win_length, fftbins=True)
    left = (config.n_fft - config.win_length) // 2
    out = np.zeros(config.n_fft)
    out[left:left + config.win_length] = win
    return out


def num_frames(num_samples: int, hop_length: int) -> int:
    return math.ceil(num_samples / hop_length)


def stft(samples: np.ndarray, config: MelConfig) -> np.ndarray:
    """Complex STFT, frame t centred on sample t * hop, zero-padded at both ends."""
    n = num_frames(len(samples), config.hop_length)
    pad = config.n_fft // 2
    padded = np.zeros(pad + n * config.hop_length + config.n_fft)
    padded[pad:pad + len(samples)] = samples
    idx = np.arange(config.n_fft)[None, :] + config.hop_length * np.arange(n)[:, None]
    return np.fft.rfft(padded[idx] * analysis_window(config), axis=1)


def istft(spectrum: np.ndarray, config: MelConfig) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft`; returns n_frames * hop samples."""
    n = spectrum.shape[0]
    window = analysis_window(config)
    frames = np.fft.irfft(spectrum, n=config.n_fft, axis=1) * window
    total = n * config.hop_length + config.n_fft
    out = np.zeros(total)
    norm = np.zeros(total)
    for t in range(n):
        start = t * config.hop_length
        out[start:start + config.n_fft] += frames[t]
        norm[start:start + config.n_fft] += window ** 2
    out = np.where(norm > 1e-8, out / np.maximum(norm, 1e-8), 0.0)
    pad = config.n_fft // 2
    return out[pad:pad + n * config.hop_length]


def power_to_logmel(power: np.ndarray, config: MelConfig) -> np.ndarray:
    return np.log(np.maximum(power @ mel_filterbank(config).T, config.log_floor))


def extract_mel(samples: np.ndarray, sample_rate: int, config: MelConfig | None = None,
                utterance_id: str = "") -> MelSpectrogram:
    if config is None:
        config = MelConfig.for_rate(sample_rate)
    elif config.sample_rate != sample_rate:
        raise DataError(f"sample rate {sample_rate} does not match extraction config ({config.sample_rate})")
    if sample_rate < 8000:
        raise DataError(f"sample rate must be at least 8 kHz, got {sample_rate}")
    samples = np.asarray(samples)
    if samples.dtype == np.int16:
        samples = samples.astype(np.float64) / 32768.0
    samples = samples.astype(np.float64).ravel()
    if samples.size == 0:
        raise DataError("empty waveform")
    if not np.all(np.isfinite(samples)):
        raise DataError("waveform contains NaN or infinite samples")
    spec = stft(samples, config)
    frames = power_to_logmel(np.abs(spec) ** 2, config)
    return MelSpectrogram(frames, hop=config.hop_seconds, utterance_id=utterance_id)


def extract_corpus(records: Sequence[UtteranceRecord], config: MelConfig, workers: int = 1) -> list[MelSpectrogram]:
    """Extract log-mels for every record; output order follows ``records`` for any worker count."""

    def one(rec: UtteranceRecord) -> MelSpectrogram:
        samples, sr = read_wav(rec.audio_path)
        return extract_mel(samples, sr, config, utterance_id=rec.utterance_id)

    if workers <= 1:
        return [one(r) for r in records]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, records))


# ---------------------------------------------------------------------------
# statistics


@dataclass
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray
    config_fingerprint: str = ""

    def to_json(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "config_fingerprint": self.config_fingerprint,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureStats":
        return cls(np.asarray(obj["mean"], dtype=np.float64), np.asarray(obj["std"], dtype=np.float64),
                   obj.get("config_fingerprint", ""))

    def save(self, path, mel_config: MelConfig | None = None) -> None:
        obj = self.to_json()
        if mel_config is not None:
            obj["mel_config"] = asdict(mel_config)
        Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True))

    @classmethod
    def load(cls, path, expected_fingerprint: str | None = None) -> "FeatureStats":
        stats = cls.from_json(json.loads(Path(path).read_text()))
        if expected_fingerprint is not None and stats.config_fingerprint != expected_fingerprint:
            raise FingerprintMismatchError(expected_fingerprint, stats.config_fingerprint, what="feature extraction")
        return stats


def compute_stats(mels: Iterable[MelSpectrogram | np.ndarray], config_fingerprint: str = "") -> FeatureStats:
    """Pooled per-channel mean and (population) std over every frame of the training mels."""
    arrays = [m.frames if isinstance(m, MelSpectrogram) else np.asarray(m) for m in mels]
    if not arrays:
        raise DataError("cannot compute statistics of an empty corpus")
    stacked = np.concatenate(arrays, axis=0).astype(np.float64)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    low = std < STD_FLOOR
    if np.any(low):
        warnings.warn(f"{int(low.sum())} zero-variance channel(s); std clamped to {STD_FLOOR}", RuntimeWarning,
                      stacklevel=2)
        std = np.where(low, STD_FLOOR, std)
    return FeatureStats(mean, std, config_fingerprint)


def normalize(mel, stats: FeatureStats):
    if isinstance(mel, MelSpectrogram):
        return MelSpectrogram((mel.frames - stats.mean) / stats.std, mel.hop, mel.utterance_id)
    return (np.asarray(mel) - stats.mean) / stats.std


def denormalize(mel, stats: FeatureStats):
    if isinstance(mel, MelSpectrogram):
        return MelSpectrogram(mel.frames * stats.std + stats.mean, mel.hop, mel.utterance_id)
    return np.asarray(mel) * stats.std + stats.mean


# ---------------------------------------------------------------------------
# batching


@dataclass
class Batch:
    features: torch.Tensor          # B x N_pad x n_mels
    frame_mask: torch.Tensor        # B x N_pad, bool
    lengths: torch.Tensor           # B
    speaker_ids: torch.Tensor       # B, index into the batch speaker inventory
    speaker_onehots: torch.Tensor   # B x |y|
    phoneme_targets: torch.Tensor   # B x N_p_max, eos-terminated, PAD_ID padded
    phoneme_mask: torch.Tensor      # B x N_p_max, bool
    utterance_ids: list[str] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def padded_length(self) -> int:
        return self.features.shape[1]


def padded_length(lengths: Iterable[int], pad_multiple: int = 4) -> int:
    longest = max(lengths)
    return max(pad_multiple, math.ceil(longest / pad_multiple) * pad_multiple)


def make_batch(records: Sequence[UtteranceRecord], features: Sequence[np.ndarray | MelSpectrogram],
               speakers: Sequence[str], phonemes: PhonemeInventory | None = None,
               pad_multiple: int = 4, extra_padding: int = 0) -> Batch:
    """Zero-pad normalized features to a common length divisible by ``pad_multiple``.

    ``extra_padding`` appends that many further multiples of ``pad_multiple``; it exists so
    tests can check that losses do not depend on the amount of padding.
    """
    if len(records) != len(features) or not records:
        raise DataError("records and features must be non-empty and of equal length")
    arrays = [f.frames if isinstance(f, MelSpectrogram) else np.asarray(f) for f in features]
    dims = {a.shape[1] for a in arrays}
    if len(dims) != 1:
        raise DataError(f"mixed feature dimensionality in batch: {sorted(dims)}")
    dim = dims.pop()
    lengths = [a.shape[0] for a in arrays]
    if min(lengths) < 1:
        raise DataError("utterance with zero frames")
    n_pad = padded_length(lengths, pad_multiple) + extra_padding * pad_multiple
    feats = np.zeros((len(arrays), n_pad, dim), dtype=np.float32)
    mask = np.zeros((len(arrays), n_pad), dtype=bool)
    for i, a in enumerate(arrays):
        feats[i, :a.shape[0]] = a
        mask[i, :a.shape[0]] = True

    spk_index = {s: i for i, s in enumerate(speakers)}
    try:
        spk = [spk_index[r.speaker_id] for r in records]
    except KeyError as err:
        raise DataError(f"speaker {err.args[0]!r} not in batch inventory {list(speakers)}") from None
    onehot = np.zeros((len(records), len(speakers)), dtype=np.float32)
    onehot[np.arange(len(records)), spk] = 1.0

    encoded = [(phonemes.encode(r.phonemes) if phonemes is not None else []) + [EOS_ID] for r in records]
    n_p = max(len(e) for e in encoded)
    targets = np.full((len(records), n_p), PAD_ID, dtype=np.int64)
    pmask = np.zeros((len(records), n_p), dtype=bool)
    for i, e in enumerate(encoded):
        targets[i, :len(e)] = e
        pmask[i, :len(e)] = True

    return Batch(
        features=torch.from_numpy(feats),
        frame_mask=torch.from_numpy(mask),
        lengths=torch.tensor(lengths, dtype=torch.long),
        speaker_ids=torch.tensor(spk, dtype=torch.long),
        speaker_onehots=torch.from_numpy(onehot),
        phoneme_targets=torch.from_numpy(targets),
        phoneme_mask=torch.from_numpy(pmask),
        utterance_ids=[r.utterance_id for r in records],
    )


def content_hash(paths: Iterable[str | Path]) -> str:
    """sha256 over the bytes of the given files, in the given order."""
    h = hashlib.sha256()
    for p in paths:
        h.update(str(Path(p).name).encode())
        h.update(Path(p).read_bytes())
    return h.hexdigest()
