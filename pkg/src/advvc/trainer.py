"""Two-stage training: multi-speaker pretraining, then pairwise finetuning with GAN losses.

Every training step alternates updates over disjoint parameter partitions:

* ``C`` (K times): speaker classifiers on detached recognizer outputs,
* ``D`` (finetune only): per-speaker WGAN-GP critics on real vs reconstructed features,
* ``G``: recognizer, phoneme decoder and synthesizer on the weighted generator objective,
  with the classifiers and critics held constant.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .checkpoint import ModelCheckpoint, flatten_optimizer, model_state_arrays, restore_optimizer
from .corpusio import (Batch, FeatureStats, MelConfig, PhonemeInventory, UtteranceRecord, compute_stats,
                       extract_corpus, load_manifest, make_batch, normalize)
from .errors import ConfigError, DataError, NonFiniteLossError
from .losses import (LossBreakdown, LossWeights, discriminator_loss, generator_gan_loss, phoneme_ce_loss,
                     reconstruction_loss, speaker_adv_loss, speaker_ce_loss, total_loss)
from .netdefs import NetConfig, VCModel, constant, frozen_stats, init_weights, lengths_to_mask

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    stage: str = "pretrain"
    learning_rate: float = 1e-3
    batch_size: int | None = None           # None: 32 pretrain, 8 finetune
    k_classifier: int = 2
    weights: LossWeights | None = None      # None: stage defaults
    max_steps: int = 1000
    seed: int = 0
    no_adv: bool = False
    no_phone: bool = False
    separate_training: bool = False
    freeze_recognizer: bool = False
    no_pretrain: bool = False
    gan_warmup_steps: int = 0
    discriminate_converted: bool = False
    val_every: int = 100
    patience: int = 10
    debug: bool = False

    def __post_init__(self):
        if self.stage not in ("pretrain", "finetune"):
            raise ConfigError(f"unknown stage {self.stage!r}")
        if self.batch_size is None:
            self.batch_size = 32 if self.stage == "pretrain" else 8
        if self.weights is None:
            self.weights = LossWeights.for_stage(self.stage)
        elif isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)
        if self.k_classifier < 1:
            raise ConfigError("k_classifier must be at least 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = asdict(self.weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if isinstance(d.get("weights"), dict):
            d["weights"] = LossWeights(**d["weights"])
        return cls(**d)


@dataclass
class Corpus:
    """Normalized in-memory features plus the stage speaker inventory."""

    records: list[UtteranceRecord]
    features: list[np.ndarray]
    speakers: list[str]

    def __len__(self) -> int:
        return len(self.records)

    def subset(self, indices: Sequence[int]) -> "Corpus":
        return Corpus([self.records[i] for i in indices], [self.features[i] for i in indices], self.speakers)

    def batch(self, indices: Sequence[int], phonemes: PhonemeInventory | None, extra_padding: int = 0) -> Batch:
        return make_batch([self.records[i] for i in indices], [self.features[i] for i in indices], self.speakers,
                          phonemes, extra_padding=extra_padding)


def load_corpus(manifest, mel_config: MelConfig, stats: FeatureStats | None = None,
                phonemes: PhonemeInventory | None = None, speakers: Sequence[str] | None = None,
                workers: int = 1) -> tuple[Corpus, FeatureStats]:
    """Extract and normalize a manifest; statistics are computed here when not given."""
    man = load_manifest(manifest, phonemes)
    mels = extract_corpus(man.records, mel_config, workers=workers)
    if stats is None:
        stats = compute_stats(mels, mel_config.fingerprint())
    feats = [normalize(m.frames, stats).astype(np.float32) for m in mels]
    return Corpus(man.records, feats, list(speakers) if speakers is not None else man.speakers), stats


class BatchSampler:
    """Seeded epoch-wise shuffling; state is a plain dict so it can be checkpointed."""

    def __init__(self, n: int, batch_size: int, seed: int):
        self.n = n
        self.batch_size = min(batch_size, n)
        self.generator = torch.Generator().manual_seed(seed)
        self.order: list[int] = []
        self.cursor = 0
        self.epoch = 0

    def next(self) -> list[int]:
        if self.cursor + self.batch_size > len(self.order):
            self.order = torch.randperm(self.n, generator=self.generator).tolist()
            self.cursor = 0
            self.epoch += 1
        idx = self.order[self.cursor:self.cursor + self.batch_size]
        self.cursor += self.batch_size
        return idx


class Trainer:
    """Owns a model, its three optimizers and the step schedule for one stage."""

    def __init__(self, model: VCModel, config: TrainConfig, corpus: Corpus, phonemes: PhonemeInventory,
                 speaker_rows: Sequence[int], val_corpus: Corpus | None = None, log_path=None, dump_dir=None):
        if config.stage == "finetune" and len(model.discriminators) != len(corpus.speakers):
            raise ConfigError("finetuning needs one discriminator per stage speaker")
        if config.stage == "pretrain" and len(model.discriminators):
            raise ConfigError("pretraining does not use discriminators")
        if len(corpus.speakers) < 2:
            raise DataError("training corpus needs at least 2 speakers")
        if config.stage == "finetune" and len(corpus.speakers) != 2:
            raise DataError(f"finetuning expects exactly 2 speakers, got {len(corpus.speakers)}")
        if not config.no_phone and any(not r.phonemes for r in corpus.records):
            raise DataError("training records need phoneme transcripts")
        self.model = model
        self.config = config
        self.corpus = corpus
        self.val_corpus = val_corpus
        self.phonemes = phonemes
        self.speaker_rows = torch.tensor(list(speaker_rows), dtype=torch.long)
        self.log_path = Path(log_path) if log_path is not None else None
        self.dump_dir = Path(dump_dir) if dump_dir is not None else None
        self.step = 0
        self.history: list[dict] = []
        self.counters: Counter = Counter()
        self.last_trace: list[str] = []
        self.stopped_early = False

        torch.manual_seed(config.seed)
        self.sampler = BatchSampler(len(corpus), config.batch_size, config.seed)
        self.gp_generator = torch.Generator().manual_seed(config.seed + 1)
        lr = config.learning_rate
        self.opt_cls = torch.optim.Adam(model.classifier_parameters(), lr=lr)
        self.opt_main = torch.optim.Adam(model.generator_parameters(include_recognizer=not config.freeze_recognizer),
                                         lr=lr)
        self.opt_disc = torch.optim.Adam(model.discriminator_parameters(), lr=lr) if len(model.discriminators) else None
        self.best_val = math.inf
        self.bad_vals = 0

    # ------------------------------------------------------------------ modes
    def phase(self, step: int | None = None) -> str:
        """``joint`` normally; ``recognizer`` then ``synthesizer`` halves under separate training."""
        step = self.step if step is None else step
        if not self.config.separate_training:
            return "joint"
        return "recognizer" if step < self.config.max_steps // 2 else "synthesizer"

    def _recognizer_frozen(self) -> bool:
        return self.config.freeze_recognizer or self.phase() == "synthesizer"

    def _set_train_mode(self) -> None:
        self.model.train()
        if self._recognizer_frozen():
            self.model.recognizer.eval()

    def _gan_active(self) -> bool:
        return (self.config.stage == "finetune" and self.phase() != "recognizer"
                and self.step >= self.config.gan_warmup_steps)

    def _rows(self, batch: Batch) -> torch.Tensor:
        return self.speaker_rows[batch.speaker_ids]

    # ---------------------------------------------------------- partition checks
    def _assert_untouched(self, allowed: str) -> None:
        if not self.config.debug:
            return
        groups = self.model.partition_names()
        params = dict(self.model.named_parameters())
        for group, names in groups.items():
            if group == allowed or (allowed == "generator" and group == "recognizer"):
                continue
            for n in names:
                g = params[n].grad
                if g is not None and bool(g.abs().sum() != 0):
                    raise AssertionError(f"{allowed} update produced gradient on {group} parameter {n}")

    def _check_finite(self, value: torch.Tensor, what: str, batch: Batch) -> None:
        if torch.isfinite(value).all():
            return
        dump = None
        if self.dump_dir is not None:
            self.dump_dir.mkdir(parents=True, exist_ok=True)
            dump = self.dump_dir / f"nonfinite_step{self.step}.npz"
            np.savez(dump, features=batch.features.numpy(), lengths=batch.lengths.numpy(),
                     utterance_ids=np.array(batch.utterance_ids))
        raise NonFiniteLossError(
            f"non-finite {what} at step {self.step} on utterances {batch.utterance_ids}", batch.utterance_ids, dump)

    # ------------------------------------------------------------ update steps
    def classifier_update_step(self, batch: Batch) -> dict[str, float]:
        """Train C_s and C'_s on detached recognizer outputs."""
        model = self.model
        with torch.no_grad(), frozen_stats(model.recognizer):
            rec = model.recognize(batch.features, batch.lengths)
        h_mask = lengths_to_mask(rec.h_lengths, rec.h.shape[1])
        h1_mask = lengths_to_mask(rec.h1_lengths, rec.h1.shape[1])
        l_s = speaker_ce_loss(model.classify_speaker(rec, "main"), batch.speaker_onehots, h_mask)
        l_s2 = speaker_ce_loss(model.classify_speaker(rec, "secondary"), batch.speaker_onehots, h1_mask)
        loss = l_s + l_s2
        self._check_finite(loss, "classifier loss", batch)
        # clear every partition so the debug checks only see this update's gradients
        self.model.zero_grad(set_to_none=True)
        loss.backward()
        self._assert_untouched("classifiers")
        self.opt_cls.step()
        self.counters["C"] += 1
        self.last_trace.append("C")
        return {"speaker": l_s.item(), "speaker2": l_s2.item()}

    def _generate(self, batch: Batch):
        rec = self.model.recognize(batch.features, batch.lengths)
        return rec, self.model.synthesize(rec, batch.lengths, self._rows(batch), teacher=batch.features)

    def _converted_pair(self, batch: Batch):
        """Converted features of ``batch`` into the other finetune speaker, plus that speaker's real utterances."""
        other = 1 - batch.speaker_ids
        pool = {s: [i for i, r in enumerate(self.corpus.records) if r.speaker_id == self.corpus.speakers[s]]
                for s in (0, 1)}
        picks = []
        for s in other.tolist():
            j = int(torch.randint(len(pool[s]), (1,), generator=self.gp_generator))
            picks.append(pool[s][j])
        real = self.corpus.batch(picks, None)
        return other, real

    def discriminator_update_step(self, batch: Batch) -> float:
        model = self.model
        frame_mask = batch.frame_mask
        with torch.no_grad(), frozen_stats(model.recognizer, model.synthesizer):
            rec, syn = self._generate(batch)
        critic = lambda x, m: model.discriminate(x, m, batch.speaker_ids)  # noqa: E731
        parts = discriminator_loss(critic, batch.features, syn.after, frame_mask, self.config.weights.w_gp,
                                   generator=self.gp_generator)
        loss = parts.total
        if self.config.discriminate_converted:
            other, real = self._converted_pair(batch)
            with torch.no_grad(), frozen_stats(model.synthesizer):
                conv = model.synthesize(rec, batch.lengths, self.speaker_rows[other]).after
            n = max(conv.shape[1], real.padded_length)
            conv = torch.nn.functional.pad(conv, (0, 0, 0, n - conv.shape[1]))
            real_x = torch.nn.functional.pad(real.features, (0, 0, 0, n - real.padded_length))
            mask = lengths_to_mask(torch.minimum(batch.lengths, real.lengths), n)
            critic_o = lambda x, m: model.discriminate(x, m, other)  # noqa: E731
            loss = loss + discriminator_loss(critic_o, real_x, conv, mask, self.config.weights.w_gp,
                                             generator=self.gp_generator).total
        self._check_finite(loss, "discriminator loss", batch)
        self.model.zero_grad(set_to_none=True)
        loss.backward()
        self._assert_untouched("discriminators")
        self.opt_disc.step()
        self.counters["D"] += 1
        self.last_trace.append("D")
        return loss.item()

    def main_update_step(self, batch: Batch) -> LossBreakdown:
        cfg = self.config
        model = self.model
        phase = self.phase()
        frozen_r = self._recognizer_frozen()
        if frozen_r:
            with torch.no_grad():
                rec = model.recognize(batch.features, batch.lengths)
        else:
            rec = model.recognize(batch.features, batch.lengths)
        h_mask = lengths_to_mask(rec.h_lengths, rec.h.shape[1])
        h1_mask = lengths_to_mask(rec.h1_lengths, rec.h1.shape[1])
        comps: dict[str, torch.Tensor] = {}
        exclude = set()
        if cfg.no_adv:
            exclude |= {"adv", "adv2"}
        if cfg.no_phone:
            exclude.add("phoneme")
        if phase == "recognizer":
            exclude |= {"rec", "gan"}
        if phase == "synthesizer":
            exclude |= {"phoneme", "adv", "adv2"}
        if not self._gan_active():
            exclude.add("gan")

        # speaker classification losses are reported but carry no gradient here
        with torch.no_grad(), frozen_stats(model.speaker_classifier, model.speaker_classifier2):
            comps["speaker"] = speaker_ce_loss(model.classify_speaker(rec, "main"), batch.speaker_onehots, h_mask)
            comps["speaker2"] = speaker_ce_loss(model.classify_speaker(rec, "secondary"), batch.speaker_onehots,
                                                h1_mask)
        if "adv" not in exclude:
            n_spk = len(self.corpus.speakers)
            with constant(model.speaker_classifier, model.speaker_classifier2):
                comps["adv"] = speaker_adv_loss(model.classify_speaker(rec, "main"), h_mask, n_spk)
                comps["adv2"] = speaker_adv_loss(model.classify_speaker(rec, "secondary"), h1_mask, n_spk)
        if "phoneme" not in exclude:
            ph = model.classify_phonemes(rec, batch.phoneme_targets)
            comps["phoneme"] = phoneme_ce_loss(ph.logits, batch.phoneme_targets, batch.phoneme_mask)
        if "rec" not in exclude:
            syn = model.synthesize(rec, batch.lengths, self._rows(batch), teacher=batch.features)
            comps["rec"] = reconstruction_loss((syn.before, syn.after), batch.features, batch.frame_mask)
            if "gan" not in exclude:
                with constant(model.discriminators):
                    critic = lambda x, m: model.discriminate(x, m, batch.speaker_ids)  # noqa: E731
                    gan = generator_gan_loss(critic, syn.after, batch.frame_mask)
                    if cfg.discriminate_converted:
                        other = 1 - batch.speaker_ids
                        conv = model.synthesize(rec, batch.lengths, self.speaker_rows[other]).after
                        critic_o = lambda x, m: model.discriminate(x, m, other)  # noqa: E731
                        gan = gan + generator_gan_loss(critic_o, conv, batch.frame_mask)
                comps["gan"] = gan
        breakdown = total_loss(cfg.stage, comps, cfg.weights, exclude=frozenset(exclude))
        self._check_finite(breakdown.total, "generator loss", batch)
        self.model.zero_grad(set_to_none=True)
        if breakdown.total.requires_grad:
            breakdown.total.backward()
        self._assert_untouched("generator")
        if cfg.debug and frozen_r:
            for n, p in model.recognizer.named_parameters():
                if p.grad is not None and bool(p.grad.abs().sum() != 0):
                    raise AssertionError(f"frozen recognizer received gradient on {n}")
        self.opt_main.step()
        self.counters["G"] += 1
        self.last_trace.append("G")
        return breakdown

    # ------------------------------------------------------------------ loop
    def train_step(self, batch: Batch) -> dict:
        self._set_train_mode()
        self.last_trace = []
        phase = self.phase()
        cls_losses = {}
        if phase != "synthesizer":
            for _ in range(self.config.k_classifier):
                cls_losses = self.classifier_update_step(batch)
        l_dis = None
        if self.config.stage == "finetune" and phase != "recognizer":
            l_dis = self.discriminator_update_step(batch)
        breakdown = self.main_update_step(batch)
        entry = {
            "step": self.step,
            "stage": self.config.stage,
            "phase": phase,
            "trace": "".join(self.last_trace),
            "weights": {"w_adv": self.config.weights.w_adv, "w_adv_prime": self.config.weights.w_adv_prime,
                        "w_gp": self.config.weights.w_gp, "w_gan": self.config.weights.w_gan},
            "losses": breakdown.raw,
            "terms": breakdown.terms,
            "total": breakdown.total.item(),
        }
        if cls_losses:
            entry["classifier"] = cls_losses
        if l_dis is not None:
            entry["dis"] = l_dis
        self._log(entry)
        self.step += 1
        return entry

    def _log(self, entry: dict) -> None:
        self.history.append(entry)
        if self.log_path is not None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with self.log_path.open("a") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def validation_loss(self) -> float:
        """Teacher-forced reconstruction loss on the validation corpus in eval mode."""
        corpus = self.val_corpus
        self.model.eval()
        total, count = 0.0, 0
        with torch.no_grad():
            for start in range(0, len(corpus), self.config.batch_size):
                idx = list(range(start, min(start + self.config.batch_size, len(corpus))))
                batch = corpus.batch(idx, None)
                rows = self.speaker_rows[batch.speaker_ids]
                rec = self.model.recognize(batch.features, batch.lengths)
                syn = self.model.synthesize(rec, batch.lengths, rows, teacher=batch.features)
                total += reconstruction_loss((syn.before, syn.after), batch.features, batch.frame_mask).item() * len(idx)
                count += len(idx)
        self._set_train_mode()
        return total / max(count, 1)

    def fit(self, steps: int | None = None) -> list[dict]:
        end = self.config.max_steps if steps is None else min(self.config.max_steps, self.step + steps)
        while self.step < end:
            idx = self.sampler.next()
            batch = self.corpus.batch(idx, None if self.config.no_phone else self.phonemes)
            self.train_step(batch)
            if self.val_corpus is not None and self.config.val_every and self.step % self.config.val_every == 0:
                val = self.validation_loss()
                self._log({"step": self.step, "stage": self.config.stage, "validation_rec": val})
                if val < self.best_val - 1e-9:
                    self.best_val, self.bad_vals = val, 0
                else:
                    self.bad_vals += 1
                    if self.bad_vals >= self.config.patience:
                        log.info("early stopping at step %d", self.step)
                        self.stopped_early = True
                        break
        self.model.eval()
        return self.history

    # -------------------------------------------------------------- snapshots
    def optimizer_snapshot(self) -> tuple[dict, dict]:
        arrays, meta = {}, {}
        for name, opt in (("cls", self.opt_cls), ("main", self.opt_main), ("disc", self.opt_disc)):
            if opt is None:
                continue
            a, m = flatten_optimizer(name, opt)
            arrays.update(a)
            meta[name] = m
        return arrays, meta

    def restore_optimizers(self, ckpt: ModelCheckpoint) -> None:
        for name, opt in (("cls", self.opt_cls), ("main", self.opt_main), ("disc", self.opt_disc)):
            if opt is not None and name in ckpt.optimizer_meta:
                restore_optimizer(name, opt, ckpt.optimizer_arrays, ckpt.optimizer_meta[name])


def make_checkpoint(trainer: Trainer, speakers: list[str], stats: FeatureStats | None,
                    mel_config: MelConfig) -> ModelCheckpoint:
    opt_arrays, opt_meta = trainer.optimizer_snapshot()
    return ModelCheckpoint(
        net_config=trainer.model.cfg,
        arrays=model_state_arrays(trainer.model),
        speakers=list(speakers),
        stage_speakers=list(trainer.corpus.speakers),
        stage_rows=trainer.speaker_rows.tolist(),
        phonemes=list(trainer.phonemes.symbols),
        stats=stats,
        mel_config=mel_config,
        stage=trainer.config.stage,
        step=trainer.step,
        train_config=trainer.config.to_dict(),
        optimizer_arrays=opt_arrays,
        optimizer_meta=opt_meta,
        extra={"sampler": {"order": trainer.sampler.order, "cursor": trainer.sampler.cursor,
                           "epoch": trainer.sampler.epoch},
               "stopped_early": trainer.stopped_early},
    )


def pretrain(config: TrainConfig, corpus: Corpus, net_config: NetConfig, phonemes: PhonemeInventory,
             stats: FeatureStats | None = None, mel_config: MelConfig | None = None, val_corpus: Corpus | None = None,
             log_path=None, dump_dir=None) -> tuple[ModelCheckpoint, Trainer]:
    if config.stage != "pretrain":
        raise ConfigError("pretrain() needs a pretrain-stage TrainConfig")
    # classifier width and embedding table follow the corpus inventory
    net_config = net_config.with_(n_speakers=len(corpus.speakers), n_embeddings=len(corpus.speakers),
                                  n_symbols=len(phonemes), seed=config.seed)
    model = VCModel(net_config)
    trainer = Trainer(model, config, corpus, phonemes, range(len(corpus.speakers)), val_corpus, log_path, dump_dir)
    trainer.fit()
    return make_checkpoint(trainer, corpus.speakers, stats, mel_config or MelConfig()), trainer


def prepare_finetune_model(pretrained: ModelCheckpoint | None, corpus: Corpus, net_config: NetConfig | None,
                           phonemes: PhonemeInventory, seed: int) -> tuple[VCModel, list[str], list[int]]:
    """Load pretrained parameters, append fresh speaker rows, reset classifier heads, add critics."""
    n_new = len(corpus.speakers)
    gen = torch.Generator().manual_seed(seed + 7919)
    if pretrained is None:
        if net_config is None:
            raise ConfigError("no_pretrain needs an explicit network configuration")
        cfg = net_config.with_(n_speakers=n_new, n_embeddings=n_new, n_symbols=len(phonemes), seed=seed)
        model = VCModel(cfg, with_discriminators=n_new)
        return model, list(corpus.speakers), list(range(n_new))

    old = pretrained.build_model()
    n_old = old.cfg.n_embeddings
    cfg = old.cfg.with_(n_speakers=n_new, n_embeddings=n_old + n_new)
    model = VCModel(cfg)
    state = {k: v for k, v in old.state_dict().items()
             if not k.startswith(("speaker_classifier.proj", "speaker_classifier2.proj",
                                  "synthesizer.embedding"))}
    missing, unexpected = model.load_state_dict(state, strict=False)
    assert not unexpected, unexpected
    with torch.no_grad():
        table = model.synthesizer.embedding.weight
        table[:n_old] = old.synthesizer.embedding.weight
        bound = math.sqrt(3.0 / cfg.speaker_embed)
        table[n_old:].uniform_(-bound, bound, generator=gen)
    init_weights(model.speaker_classifier.proj, gen)
    init_weights(model.speaker_classifier2.proj, gen)
    model.add_discriminators(n_new, gen)
    return model, list(pretrained.speakers) + list(corpus.speakers), list(range(n_old, n_old + n_new))


def finetune(config: TrainConfig, pretrained: ModelCheckpoint | None, corpus: Corpus,
             phonemes: PhonemeInventory | None = None,
             net_config: NetConfig | None = None, stats: FeatureStats | None = None,
             mel_config: MelConfig | None = None, val_corpus: Corpus | None = None, log_path=None,
             dump_dir=None) -> tuple[ModelCheckpoint, Trainer]:
    if config.stage != "finetune":
        raise ConfigError("finetune() needs a finetune-stage TrainConfig")
    if len(corpus.speakers) != 2:
        raise DataError(f"finetuning expects exactly 2 speakers, got {len(corpus.speakers)}")
    if config.no_pretrain and pretrained is not None:
        raise ConfigError("no_pretrain conflicts with a supplied pretrained checkpoint")
    if not config.no_pretrain and pretrained is None:
        raise ConfigError("finetuning needs a pretrained checkpoint unless no_pretrain is set")
    if pretrained is not None:
        phonemes = PhonemeInventory(pretrained.phonemes)
        unknown = [p for r in corpus.records for p in r.phonemes if p not in phonemes]
        if unknown:
            raise DataError(f"finetune corpus uses phonemes missing from the pretrained inventory: {sorted(set(unknown))}")
        stats = pretrained.stats if stats is None else stats
        mel_config = pretrained.mel_config if mel_config is None else mel_config
    if phonemes is None:
        phonemes = PhonemeInventory.from_records(corpus.records)
    model, speakers, rows = prepare_finetune_model(pretrained, corpus, net_config, phonemes, config.seed)
    trainer = Trainer(model, config, corpus, phonemes, rows, val_corpus, log_path, dump_dir)
    trainer.fit()
    return make_checkpoint(trainer, speakers, stats, mel_config or MelConfig()), trainer
