"""Desk-scale experiment protocol on the synthetic corpus.

One protocol serves the acceptance tests and the scripts in ``scripts/``:

* ``pre``   multi-speaker pretraining corpus (speakers ``prespk*``)
* ``pair``  source/target pair for finetuning, parallel test split (``spk0``, ``spk1``)
* ``probe`` a larger training-only corpus of the pair speakers, used solely to fit
  post-hoc probes so they do not have to generalize from a handful of utterances
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .checkpoint import ModelCheckpoint
from .converter import Converter
from .corpusio import MelConfig, MelSpectrogram, PhonemeInventory, denormalize, normalize
from .evalkit import SequenceProbe, fresh_probe_accuracy, probe_speaker_accuracy
from .netdefs import NetConfig
from .toycorpus import generate_toy_corpus
from .trainer import Corpus, TrainConfig, finetune, load_corpus, pretrain

# variant -> (pretrain switches or None to skip pretraining, finetune switches)
VARIANTS: dict[str, tuple[dict | None, dict]] = {
    "full": ({}, {}),
    "-adv": ({"no_adv": True}, {"no_adv": True}),
    "-phone": ({"no_phone": True}, {"no_phone": True}),
    "-pretrain": (None, {"no_pretrain": True}),
    "-joint": ({"separate_training": True}, {"separate_training": True}),
    "-tunerec": ({}, {"freeze_recognizer": True}),
    "-all": ({"no_adv": True, "separate_training": True},
             {"no_adv": True, "separate_training": True, "freeze_recognizer": True}),
}


@dataclass
class ToyProtocol:
    pretrain_steps: int = 800
    finetune_steps: int = 600
    batch_size: int = 8
    net: NetConfig = field(default_factory=NetConfig.toy)
    probe_steps: int = 1000
    pre_speakers: int = 4
    pre_utts: int = 50
    pair_utts: int = 20
    pair_test_utts: int = 10
    probe_utts: int = 300


@dataclass
class ToyCorpora:
    pre: Corpus
    pair: Corpus
    pair_test: Corpus
    probe: Corpus
    stats: object
    phonemes: PhonemeInventory
    mel: MelConfig


def build_toy_corpora(root, protocol: ToyProtocol | None = None, seed: int = 0) -> ToyCorpora:
    """Write the three toy corpora under ``root`` and load them with the pretraining statistics."""
    p = protocol or ToyProtocol()
    root = Path(root)
    pre = generate_toy_corpus(root / "pre", n_speakers=p.pre_speakers, utts_per_speaker=p.pre_utts,
                              test_per_speaker=0, seed=seed + 100, prefix="pre")
    pair = generate_toy_corpus(root / "pair", utts_per_speaker=p.pair_utts, test_per_speaker=p.pair_test_utts,
                               seed=seed)
    probe = generate_toy_corpus(root / "probe", utts_per_speaker=p.probe_utts, test_per_speaker=0,
                                seed=seed + 200)
    mel = MelConfig()
    pre_c, stats = load_corpus(pre["train"], mel)
    pair_c, _ = load_corpus(pair["train"], mel, stats)
    test_c, _ = load_corpus(pair["test"], mel, stats)
    probe_c, _ = load_corpus(probe["train"], mel, stats)
    return ToyCorpora(pre_c, pair_c, test_c, probe_c, stats, PhonemeInventory.from_records(pre_c.records), mel)


@dataclass
class VariantRun:
    variant: str
    seed: int
    pretrained: ModelCheckpoint | None
    finetuned: ModelCheckpoint
    seconds: float


def train_variant(corpora: ToyCorpora, variant: str, seed: int, protocol: ToyProtocol | None = None) -> VariantRun:
    p = protocol or ToyProtocol()
    pre_sw, ft_sw = VARIANTS[variant]
    start = time.perf_counter()
    pre_ckpt = None
    if pre_sw is not None:
        cfg = TrainConfig(stage="pretrain", max_steps=p.pretrain_steps, batch_size=p.batch_size, seed=seed, **pre_sw)
        pre_ckpt, _ = pretrain(cfg, corpora.pre, p.net, corpora.phonemes, corpora.stats, corpora.mel)
    cfg = TrainConfig(stage="finetune", max_steps=p.finetune_steps, batch_size=p.batch_size, seed=seed, **ft_sw)
    ft_ckpt, _ = finetune(cfg, pre_ckpt, corpora.pair, corpora.phonemes, net_config=p.net if pre_ckpt is None else None,
                          stats=corpora.stats, mel_config=corpora.mel)
    return VariantRun(variant, seed, pre_ckpt, ft_ckpt, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# measurements

def hidden_probe_accuracy(run: VariantRun, corpora: ToyCorpora, protocol: ToyProtocol | None = None) -> float:
    """Fresh probe on frozen H: fit on the probe corpus, score on the parallel test split."""
    p = protocol or ToyProtocol()
    return fresh_probe_accuracy(run.finetuned, corpora.probe, corpora.pair_test, steps=p.probe_steps, seed=run.seed)


def own_classifier_accuracy(run: VariantRun, corpora: ToyCorpora) -> float:
    """The finetuned model's own C_s on H of the test split (frame-majority vote)."""
    return probe_speaker_accuracy(run.finetuned, corpora.pair_test)


def fit_external_probe(corpora: ToyCorpora, steps: int = 300, seed: int = 0) -> SequenceProbe:
    """Speaker classifier on normalized log-mel of real (unconverted) probe-corpus audio."""
    seqs = [torch.from_numpy(f) for f in corpora.probe.features]
    labels = [corpora.probe.speakers.index(r.speaker_id) for r in corpora.probe.records]
    probe = SequenceProbe(corpora.mel.n_mels, len(corpora.probe.speakers), seed=seed)
    return probe.fit(seqs, labels, steps=steps)


def conversion_target_rate(run: VariantRun, corpora: ToyCorpora, probe: SequenceProbe) -> float:
    """Fraction of test utterances, converted to the other pair speaker, that ``probe`` assigns to the target."""
    conv = Converter(run.finetuned)
    speakers = corpora.pair_test.speakers
    seqs, targets = [], []
    for rec, feats in zip(corpora.pair_test.records, corpora.pair_test.features):
        target = speakers[1 - speakers.index(rec.speaker_id)]
        src = MelSpectrogram(denormalize(feats.astype(np.float64), corpora.stats), corpora.mel.hop_length,
                             rec.utterance_id)
        out = conv.convert_mel(src, target)
        seqs.append(torch.from_numpy(normalize(out.frames, corpora.stats).astype(np.float32)))
        targets.append(corpora.probe.speakers.index(target))
    return probe.accuracy(seqs, targets)


def median(values) -> float:
    return float(np.median(np.asarray(list(values), dtype=np.float64)))


__all__ = ["VARIANTS", "ToyProtocol", "ToyCorpora", "VariantRun", "build_toy_corpora", "train_variant",
           "hidden_probe_accuracy", "own_classifier_accuracy", "fit_external_probe", "conversion_target_rate",
           "median"]
