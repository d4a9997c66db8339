"""Objective evaluation: mel-cepstral distortion under DTW, F0 RMSE, and representation probes."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct

from .checkpoint import ModelCheckpoint
from .corpusio import MelConfig, PhonemeInventory, extract_mel, num_frames
from .errors import DataError
from .losses import reconstruction_loss
from .netdefs import NetConfig, SpeakerClassifier, VCModel, lengths_to_mask

MCD_SCALE = 10.0 / math.log(10.0) * math.sqrt(2.0)


# ---------------------------------------------------------------------------
# mel cepstra and MCD


def mcc_from_mel(mel: np.ndarray, order: int = 25) -> np.ndarray:
    """Orthonormal DCT-II of each log-mel frame, truncated to ``order`` coefficients (c0 kept)."""
    mel = np.atleast_2d(np.asarray(mel, dtype=np.float64))
    if order > mel.shape[1]:
        raise ValueError(f"order {order} exceeds {mel.shape[1]} mel channels")
    return dct(mel, type=2, norm="ortho", axis=1)[:, :order]


def dtw(cost: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Minimum-cost monotone alignment with steps (1,0), (0,1), (1,1); no band constraint.

    Returns the accumulated cost and the path from (0, 0) to (n-1, m-1).
    """
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    if n == 0 or m == 0:
        raise ValueError("DTW needs two non-empty sequences")
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        row, prev = acc[i], acc[i - 1]
        c = cost[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if row[j - 1] < best:
                best = row[j - 1]
            row[j] = c[j - 1] + best
    path = [(n - 1, m - 1)]
    i, j = n, m
    while (i, j) != (1, 1):
        options = ((acc[i - 1, j - 1], i - 1, j - 1), (acc[i - 1, j], i - 1, j), (acc[i, j - 1], i, j - 1))
        _, i, j = min(options, key=lambda o: o[0])
        path.append((i - 1, j - 1))
    path.reverse()
    return float(acc[n, m]), path


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def mcd(converted: np.ndarray, reference: np.ndarray) -> float:
    """Mean mel-cepstral distortion in dB over the DTW path, using coefficients 1..order-1."""
    converted = np.atleast_2d(converted)
    reference = np.atleast_2d(reference)
    if converted.shape[0] == 0 or reference.shape[0] == 0:
        raise ValueError("MCD needs two non-empty sequences")
    dist = pairwise_distances(converted[:, 1:], reference[:, 1:])
    _, path = dtw(dist)
    return float(MCD_SCALE * np.mean([dist[i, j] for i, j in path]))


# ---------------------------------------------------------------------------
# F0


@dataclass
class F0Track:
    f0: np.ndarray        # Hz, 0 where unvoiced
    voiced: np.ndarray    # bool

    @property
    def all_unvoiced(self) -> bool:
        return not bool(self.voiced.any())


def estimate_f0(samples: np.ndarray, sample_rate: int = 16000, hop_length: int | None = None,
                fmin: float = 50.0, fmax: float = 500.0, threshold: float = 0.3,
                frame_length: int | None = None) -> F0Track:
    """Normalized-autocorrelation pitch per 10 ms frame.

    Frame t is centred on sample t * hop, matching :func:`extract_mel`. The shortest lag
    whose correlation is within 10% of the best peak is chosen (guards against octave-down
    errors) and refined by parabolic interpolation. Frames whose best correlation is below
    ``threshold`` are unvoiced.
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    hop = hop_length or int(round(0.01 * sample_rate))
    n = num_frames(len(samples), hop) if len(samples) else 0
    f0 = np.zeros(n)
    voiced = np.zeros(n, dtype=bool)
    if n == 0:
        return F0Track(f0, voiced)
    width = frame_length or int(round(0.025 * sample_rate))
    lag_min = max(2, int(math.floor(sample_rate / fmax)))
    lag_max = int(math.ceil(sample_rate / fmin))
    pad = width // 2
    padded = np.zeros(pad + len(samples) + width + lag_max + 2)
    padded[pad:pad + len(samples)] = samples
    for t in range(n):
        seg = padded[t * hop:t * hop + width + lag_max + 2]
        x0 = seg[:width]
        e0 = float(x0 @ x0)
        if e0 < 1e-10:
            continue
        wins = sliding_window_view(seg, width)[lag_min - 1:lag_max + 2]
        energy = np.einsum("ij,ij->i", wins, wins)
        r = (wins @ x0) / np.sqrt(np.maximum(e0 * energy, 1e-20))
        inner = r[1:-1]  # lags lag_min .. lag_max
        best = float(inner.max())
        if best < threshold:
            continue
        peaks = np.nonzero((inner >= r[:-2]) & (inner >= r[2:]) & (inner >= 0.9 * best))[0]
        k = int(peaks[0]) if peaks.size else int(inner.argmax())
        a, b, c = r[k], r[k + 1], r[k + 2]
        denom = a - 2 * b + c
        delta = 0.5 * (a - c) / denom if abs(denom) > 1e-12 else 0.0
        lag = lag_min + k + float(np.clip(delta, -0.5, 0.5))
        f0[t] = sample_rate / lag
        voiced[t] = True
    return F0Track(f0, voiced)


@dataclass
class F0Error:
    rmse: float           # NaN when undefined
    pairs: int            # co-voiced aligned frame pairs
    undefined: bool


def f0_rmse(converted: np.ndarray, reference: np.ndarray, sample_rate: int = 16000,
            mel_config: MelConfig | None = None, threshold: float = 0.3) -> F0Error:
    """F0 RMSE over DTW-aligned (on mel cepstra) frame pairs voiced in both signals."""
    cfg = mel_config or MelConfig.for_rate(sample_rate)
    fa = estimate_f0(converted, sample_rate, cfg.hop_length, threshold=threshold)
    fb = estimate_f0(reference, sample_rate, cfg.hop_length, threshold=threshold)
    if fa.all_unvoiced or fb.all_unvoiced:
        return F0Error(float("nan"), 0, True)
    ma = mcc_from_mel(extract_mel(converted, sample_rate, cfg).frames)
    mb = mcc_from_mel(extract_mel(reference, sample_rate, cfg).frames)
    _, path = dtw(pairwise_distances(ma[:, 1:], mb[:, 1:]))
    diffs = [fa.f0[i] - fb.f0[j] for i, j in path if fa.voiced[i] and fb.voiced[j]]
    if not diffs:
        return F0Error(float("nan"), 0, True)
    return F0Error(float(np.sqrt(np.mean(np.square(diffs)))), len(diffs), False)


# ---------------------------------------------------------------------------
# probes


def edit_distance(a: Sequence, b: Sequence) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def majority_vote(frame_labels: Sequence[int]) -> int:
    """Most frequent label; ties go to the smallest label."""
    counts = Counter(int(v) for v in frame_labels)
    return min(counts, key=lambda k: (-counts[k], k))


def _batches(n: int, size: int):
    for start in range(0, n, size):
        yield list(range(start, min(start + size, n)))


@torch.no_grad()
def recognizer_outputs(model: VCModel, corpus, batch_size: int = 16) -> list[torch.Tensor]:
    """H for every utterance of ``corpus`` (eval mode), trimmed to its valid length."""
    model.eval()
    out = []
    for idx in _batches(len(corpus), batch_size):
        batch = corpus.batch(idx, None)
        rec = model.recognize(batch.features, batch.lengths)
        for k in range(len(idx)):
            out.append(rec.h[k, :int(rec.h_lengths[k])].clone())
    return out


def _labels(corpus, inventory: Sequence[str]) -> list[int]:
    try:
        return [list(inventory).index(r.speaker_id) for r in corpus.records]
    except ValueError:
        missing = sorted({r.speaker_id for r in corpus.records} - set(inventory))
        raise DataError(f"corpus speakers {missing} not in inventory {list(inventory)}") from None


def _unpack(model, names):
    """Accept a checkpoint in place of (model, inventory); returns the model and inventory."""
    if isinstance(model, ModelCheckpoint):
        return model.build_model(), names if names is not None else model.stage_speakers
    if names is None:
        raise ValueError("an inventory is required when passing a bare model")
    return model, names


@torch.no_grad()
def probe_speaker_accuracy(model: VCModel | ModelCheckpoint, corpus, inventory: Sequence[str] | None = None,
                           batch_size: int = 16) -> float:
    """Utterance accuracy of the model's own speaker classifier on H, by frame-majority vote."""
    model, inventory = _unpack(model, inventory)
    labels = _labels(corpus, inventory)
    model.eval()
    correct = 0
    i = 0
    for idx in _batches(len(corpus), batch_size):
        batch = corpus.batch(idx, None)
        rec = model.recognize(batch.features, batch.lengths)
        pred = model.classify_speaker(rec, "main").argmax(-1)
        for k in range(len(idx)):
            vote = majority_vote(pred[k, :int(rec.h_lengths[k])].tolist())
            correct += vote == labels[i]
            i += 1
    return correct / max(len(labels), 1)


class SequenceProbe:
    """Freshly initialised frame-level speaker classifier trained on frozen sequences."""

    def __init__(self, d_in: int, n_classes: int, channels: int = 32, layers: int = 3, seed: int = 0):
        cfg = NetConfig(cls_channels=channels, cls_layers=layers, kernel_size=5)
        torch.manual_seed(seed)
        self.net = SpeakerClassifier(cfg, d_in=d_in, n_out=n_classes)
        self.seed = seed

    @staticmethod
    def _pad(seqs: Sequence[torch.Tensor]) -> tuple[torch.Tensor, torch.Tensor]:
        lengths = torch.tensor([s.shape[0] for s in seqs])
        x = torch.zeros(len(seqs), int(lengths.max()), seqs[0].shape[1])
        for k, s in enumerate(seqs):
            x[k, :s.shape[0]] = torch.as_tensor(s, dtype=torch.float32)
        return x, lengths

    def fit(self, seqs: Sequence[torch.Tensor], labels: Sequence[int], steps: int = 300, batch_size: int = 16,
            lr: float = 1e-3) -> "SequenceProbe":
        gen = torch.Generator().manual_seed(self.seed)
        opt = torch.optim.Adam(self.net.parameters(), lr=lr)
        labels_t = torch.tensor(list(labels))
        self.net.train()
        for _ in range(steps):
            idx = torch.randperm(len(seqs), generator=gen)[:batch_size].tolist()
            x, lengths = self._pad([seqs[i] for i in idx])
            logits = self.net.logits(x, lengths)
            mask = lengths_to_mask(lengths, x.shape[1])
            ce = torch.nn.functional.cross_entropy(logits.transpose(1, 2),
                                                   labels_t[idx][:, None].expand(-1, x.shape[1]), reduction="none")
            loss = ((ce * mask).sum(1) / mask.sum(1)).mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
        self.net.eval()
        return self

    @torch.no_grad()
    def predict(self, seqs: Sequence[torch.Tensor]) -> list[int]:
        self.net.eval()
        votes = []
        for s in seqs:
            x, lengths = self._pad([s])
            votes.append(majority_vote(self.net.logits(x, lengths)[0].argmax(-1).tolist()))
        return votes

    def accuracy(self, seqs: Sequence[torch.Tensor], labels: Sequence[int]) -> float:
        pred = self.predict(seqs)
        return float(np.mean([p == y for p, y in zip(pred, labels)]))


def fresh_probe_accuracy(model: VCModel | ModelCheckpoint, train_corpus, test_corpus,
                         inventory: Sequence[str] | None = None, steps: int = 300, seed: int = 0,
                         **probe_kwargs) -> float:
    """Train a new speaker probe on frozen H of ``train_corpus``; utterance accuracy on ``test_corpus``."""
    model, inventory = _unpack(model, inventory)
    probe = SequenceProbe(model.cfg.h_dim, len(inventory), seed=seed, **probe_kwargs)
    probe.fit(recognizer_outputs(model, train_corpus), _labels(train_corpus, inventory), steps=steps)
    return probe.accuracy(recognizer_outputs(model, test_corpus), _labels(test_corpus, inventory))


@dataclass
class PhonemeScore:
    accuracy: float
    evaluated: int
    skipped: int


@torch.no_grad()
def phoneme_accuracy(model: VCModel | ModelCheckpoint, corpus, phonemes: PhonemeInventory | None = None,
                     batch_size: int = 16) -> PhonemeScore:
    """Corpus mean of 1 - (edit distance / reference length), clipped to [0, 1], greedy decoding."""
    if isinstance(model, ModelCheckpoint):
        phonemes = phonemes or PhonemeInventory(model.phonemes)
        model = model.build_model()
    model.eval()
    scores, skipped = [], 0
    for idx in _batches(len(corpus), batch_size):
        batch = corpus.batch(idx, None)
        rec = model.recognize(batch.features, batch.lengths)
        hyps = model.phoneme_decoder.decoded_ids(model.classify_phonemes(rec))
        for k, i in enumerate(idx):
            ref = phonemes.encode(corpus.records[i].phonemes)
            if not ref:
                skipped += 1
                continue
            scores.append(sequence_accuracy(hyps[k], ref))
    return PhonemeScore(float(np.mean(scores)) if scores else float("nan"), len(scores), skipped)


@torch.no_grad()
def reconstruction_error(ckpt: ModelCheckpoint, corpus, batch_size: int = 16) -> float:
    """Teacher-forced masked L_rec (pre- plus post-postnet MSE) in eval mode, averaged over utterances."""
    model = ckpt.build_model().eval()
    rows = torch.tensor([ckpt.row_of(s) for s in corpus.speakers])
    total = 0.0
    for idx in _batches(len(corpus), batch_size):
        batch = corpus.batch(idx, None)
        rec = model.recognize(batch.features, batch.lengths)
        syn = model.synthesize(rec, batch.lengths, rows[batch.speaker_ids], teacher=batch.features)
        total += reconstruction_loss((syn.before, syn.after), batch.features, batch.frame_mask).item() * len(idx)
    return total / max(len(corpus), 1)


def sequence_accuracy(hypothesis: Sequence, reference: Sequence) -> float:
    return float(max(0.0, 1.0 - edit_distance(hypothesis, reference) / len(reference)))


# ---------------------------------------------------------------------------
# reports


@dataclass
class PairResult:
    source: str
    target_speaker: str
    reference: str
    mcd_db: float
    f0_rmse_hz: float
    f0_pairs: int
    f0_undefined: bool


@dataclass
class EvalReport:
    pairs: list[PairResult] = field(default_factory=list)
    probe_speaker_accuracy: float | None = None
    phoneme_accuracy: float | None = None
    frames_evaluated: int = 0

    @property
    def mean_mcd(self) -> float:
        return float(np.mean([p.mcd_db for p in self.pairs])) if self.pairs else float("nan")

    @property
    def mean_f0_rmse(self) -> float:
        vals = [p.f0_rmse_hz for p in self.pairs if not p.f0_undefined]
        return float(np.mean(vals)) if vals else float("nan")

    def summary(self) -> dict:
        return {
            "pairs": len(self.pairs),
            "frames_evaluated": self.frames_evaluated,
            "mcd_db": self.mean_mcd,
            "f0_rmse_hz": self.mean_f0_rmse,
            "f0_undefined_pairs": sum(p.f0_undefined for p in self.pairs),
            "probe_speaker_accuracy": self.probe_speaker_accuracy,
            "phoneme_accuracy": self.phoneme_accuracy,
        }

    @classmethod
    def load(cls, path) -> "EvalReport":
        """Read a ``report.json`` (or the directory holding one)."""
        path = Path(path)
        if path.is_dir():
            path = path / "report.json"
        data = json.loads(path.read_text())
        summary = data.get("summary", {})
        return cls([PairResult(**p) for p in data.get("pairs", [])], summary.get("probe_speaker_accuracy"),
                   summary.get("phoneme_accuracy"), summary.get("frames_evaluated", 0))

    def write(self, out_dir) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report = out_dir / "report.json"
        report.write_text(json.dumps({"summary": self.summary(), "pairs": [asdict(p) for p in self.pairs]},
                                     indent=2, sort_keys=True))
        table = out_dir / "pairs.csv"
        with table.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(PairResult.__dataclass_fields__))
            writer.writeheader()
            for p in self.pairs:
                writer.writerow(asdict(p))
        return report, table


def evaluate_pair(converted: np.ndarray, reference: np.ndarray, sample_rate: int, mel_config: MelConfig,
                  source: str = "", target_speaker: str = "", reference_id: str = "") -> tuple[PairResult, int]:
    ca = mcc_from_mel(extract_mel(converted, sample_rate, mel_config).frames)
    cb = mcc_from_mel(extract_mel(reference, sample_rate, mel_config).frames)
    f0 = f0_rmse(converted, reference, sample_rate, mel_config)
    return PairResult(source, target_speaker, reference_id, mcd(ca, cb), f0.rmse, f0.pairs, f0.undefined), len(ca)


def plot_report(report: EvalReport, out_dir) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, values, unit in (("mcd", [p.mcd_db for p in report.pairs], "dB"),
                               ("f0_rmse", [p.f0_rmse_hz for p in report.pairs if not p.f0_undefined], "Hz")):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.hist(values, bins=min(20, max(1, len(values))))
        ax.set_xlabel(f"{name} ({unit})")
        ax.set_ylabel("pairs")
        fig.tight_layout()
        path = out_dir / f"{name}_hist.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_training_log(log_path, out_dir) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    entries = [json.loads(line) for line in Path(log_path).read_text().splitlines() if line.strip()]
    steps = [e for e in entries if "losses" in e]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = sorted({k for e in steps for k in e["losses"]})
    fig, axes = plt.subplots(len(names) + 1, 1, figsize=(7, 1.8 * (len(names) + 1)), sharex=True)
    axes = np.atleast_1d(axes)
    for ax, name in zip(axes, names):
        xs = [e["step"] for e in steps if name in e["losses"]]
        ax.plot(xs, [e["losses"][name] for e in steps if name in e["losses"]], lw=0.8)
        ax.set_ylabel(name)
    axes[-1].plot([e["step"] for e in steps], [e["total"] for e in steps], lw=0.8)
    axes[-1].set_ylabel("total")
    axes[-1].set_xlabel("step")
    fig.tight_layout()
    path = out_dir / "training_losses.png"
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return [path]
