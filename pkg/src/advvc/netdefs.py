"""Recognizer, phoneme decoder, speaker classifiers, synthesizer and discriminators.

All sequence tensors are batch-first with channels last (B x T x C). Padded positions
are zeroed after every layer and batch-norm statistics are taken over valid frames only,
so outputs on real frames do not depend on how much padding a batch carries.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import torch
import torch.nn.functional as F
from torch import Tensor, nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .corpusio import EOS_ID


@dataclass(frozen=True)
class NetConfig:
    n_mels: int = 80
    n_speakers: int = 99          # classifier width: speakers of the current training stage
    n_embeddings: int = 99        # rows of the synthesizer's speaker table
    n_symbols: int = 42           # phoneme inventory incl. pad and eos
    kernel_size: int = 5
    rec_channels: int = 512
    rec_lstm_units: int = 256
    rec_dropout: float = 0.2
    cls_channels: int = 256
    cls_layers: int = 3
    leaky_slope: float = 0.2
    dec_units: int = 128
    dec_embed: int = 64
    att_dim: int = 128
    att_filters: int = 16
    att_kernel: int = 15
    prenet_units: int = 256
    prenet_dropout: float = 0.5
    syn_lstm_units: int = 512
    syn_lstm_layers: int = 2
    reduction: int = 2
    postnet_channels: int = 256
    postnet_layers: int = 5
    postnet_dropout: float = 0.2
    speaker_embed: int = 128
    disc_channels: int = 256
    disc_layers: int = 3
    seed: int = 0

    @classmethod
    def toy(cls, **overrides) -> "NetConfig":
        """Narrow widths for CPU experiments on the synthetic corpus."""
        params = dict(
            rec_channels=64, rec_lstm_units=32, cls_channels=32, dec_units=64, dec_embed=16,
            att_dim=32, att_filters=8, att_kernel=7, prenet_units=64, syn_lstm_units=128,
            syn_lstm_layers=2, postnet_channels=32, speaker_embed=16, disc_channels=32,
        )
        params.update(overrides)
        return cls(**params)

    @classmethod
    def tiny(cls, **overrides) -> "NetConfig":
        """Widths of at most 8, used for finite-difference gradient checks."""
        params = dict(
            n_mels=6, n_speakers=3, n_embeddings=3, n_symbols=6, kernel_size=3,
            rec_channels=8, rec_lstm_units=4, cls_channels=8, cls_layers=2, dec_units=8,
            dec_embed=4, att_dim=8, att_filters=2, att_kernel=3, prenet_units=8,
            syn_lstm_units=8, syn_lstm_layers=2, postnet_channels=8, postnet_layers=2,
            speaker_embed=4, disc_channels=8, disc_layers=3,
        )
        params.update(overrides)
        return cls(**params)

    @property
    def h_dim(self) -> int:
        return 2 * self.rec_lstm_units

    def with_(self, **changes) -> "NetConfig":
        return replace(self, **changes)

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# building blocks


class MaskedBatchNorm1d(nn.Module):
    """Batch norm over (B x C x T) whose statistics ignore padded frames."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.register_buffer("running_mean", torch.zeros(channels))
        self.register_buffer("running_var", torch.ones(channels))
        self.momentum = momentum
        self.eps = eps
        self.update_stats = True

    def forward(self, x: Tensor, mask: Tensor) -> Tensor:
        if self.training:
            m = mask.to(x.dtype)
            n = m.sum().clamp_min(1.0)
            mean = (x * m).sum(dim=(0, 2)) / n
            var = (((x - mean[None, :, None]) * m) ** 2).sum(dim=(0, 2)) / n
            if self.update_stats:
                with torch.no_grad():
                    unbiased = var * n / (n - 1).clamp_min(1.0)
                    self.running_mean.lerp_(mean, self.momentum)
                    self.running_var.lerp_(unbiased, self.momentum)
        else:
            mean, var = self.running_mean, self.running_var
        y = (x - mean[None, :, None]) * torch.rsqrt(var[None, :, None] + self.eps)
        return y * self.weight[None, :, None] + self.bias[None, :, None]


@contextlib.contextmanager
def frozen_stats(*modules: nn.Module):
    """Suspend running-statistics updates of every masked batch-norm inside ``modules``."""
    bns = [m for mod in modules for m in mod.modules() if isinstance(m, MaskedBatchNorm1d)]
    saved = [bn.update_stats for bn in bns]
    for bn in bns:
        bn.update_stats = False
    try:
        yield
    finally:
        for bn, s in zip(bns, saved):
            bn.update_stats = s


@contextlib.contextmanager
def constant(*modules: nn.Module):
    """Treat ``modules`` as constants: no parameter gradients, no statistic updates.

    Gradients still flow through their inputs, which is what the adversarial and GAN
    generator objectives need.
    """
    params = [p for m in modules for p in m.parameters()]
    flags = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad_(False)
    try:
        with frozen_stats(*modules):
            yield
    finally:
        for p, f in zip(params, flags):
            p.requires_grad_(f)


def frozen_call(module: nn.Module, *args, **kwargs):
    with constant(module):
        return module(*args, **kwargs)


def _apply_mask(x: Tensor, mask: Tensor) -> Tensor:
    return x * mask.to(x.dtype)


class ConvBlock(nn.Module):
    """Conv1d with "same" padding, optional masked BN, activation and dropout."""

    def __init__(self, c_in, c_out, kernel_size=5, stride=1, norm=True, activation="relu",
                 dropout=0.0, leaky_slope=0.2):
        super().__init__()
        self.conv = nn.Conv1d(c_in, c_out, kernel_size, stride=stride, padding=kernel_size // 2)
        self.norm = MaskedBatchNorm1d(c_out) if norm else None
        self.activation = activation
        self.leaky_slope = leaky_slope
        self.dropout = nn.Dropout(dropout) if dropout > 0 else None
        self.stride = stride

    def forward(self, x: Tensor, mask: Tensor) -> tuple[Tensor, Tensor]:
        # x: B x C x T, mask: B x 1 x T
        y = self.conv(_apply_mask(x, mask))
        mask = mask[..., ::self.stride]
        if self.norm is not None:
            y = self.norm(y, mask)
        if self.activation == "relu":
            y = F.relu(y)
        elif self.activation == "leaky":
            y = F.leaky_relu(y, self.leaky_slope)
        if self.dropout is not None:
            y = self.dropout(y)
        return _apply_mask(y, mask), mask


class BLSTM(nn.Module):
    def __init__(self, d_in: int, units: int):
        super().__init__()
        self.lstm = nn.LSTM(d_in, units, batch_first=True, bidirectional=True)

    def forward(self, x: Tensor, lengths: Tensor) -> Tensor:
        packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, _ = self.lstm(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=x.shape[1])
        return out


def downsampled_lengths(lengths: Tensor, factor: int) -> Tensor:
    return torch.div(lengths + factor - 1, factor, rounding_mode="floor")


def lengths_to_mask(lengths: Tensor, total: int) -> Tensor:
    return torch.arange(total, device=lengths.device)[None, :] < lengths[:, None]


# ---------------------------------------------------------------------------
# recognizer


class RecognizerOutput(NamedTuple):
    h: Tensor            # B x N_pad/4 x 2*units
    h_lengths: Tensor
    h1: Tensor           # B x N_pad/2 x 2*units, first recurrent layer
    h1_lengths: Tensor


class Recognizer(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        k = cfg.kernel_size
        self.conv1 = ConvBlock(cfg.n_mels, cfg.rec_channels, k, stride=2, dropout=cfg.rec_dropout)
        self.blstm1 = BLSTM(cfg.rec_channels, cfg.rec_lstm_units)
        self.conv2 = ConvBlock(cfg.h_dim, cfg.rec_channels, k, stride=2, dropout=cfg.rec_dropout)
        self.blstm2 = BLSTM(cfg.rec_channels, cfg.rec_lstm_units)

    def forward(self, x: Tensor, lengths: Tensor) -> RecognizerOutput:
        n_pad = x.shape[1]
        if n_pad % 4:
            raise ValueError(f"recognizer input length {n_pad} is not divisible by 4")
        mask = lengths_to_mask(lengths, n_pad)[:, None, :]
        y, mask = self.conv1(x.transpose(1, 2), mask)
        len1 = downsampled_lengths(lengths, 2)
        h1 = self.blstm1(y.transpose(1, 2), len1)
        y, mask = self.conv2(h1.transpose(1, 2), mask)
        len2 = downsampled_lengths(lengths, 4)
        h = self.blstm2(y.transpose(1, 2), len2)
        return RecognizerOutput(h, len2, h1, len1)


# ---------------------------------------------------------------------------
# phoneme classifier


class LocationAwareAttention(nn.Module):
    """Additive attention with convolutional features of the previous alignment."""

    def __init__(self, query_dim, memory_dim, att_dim, n_filters, kernel_size):
        super().__init__()
        self.query = nn.Linear(query_dim, att_dim, bias=False)
        self.memory = nn.Linear(memory_dim, att_dim, bias=False)
        self.location_conv = nn.Conv1d(1, n_filters, kernel_size, padding=kernel_size // 2, bias=False)
        self.location = nn.Linear(n_filters, att_dim, bias=False)
        self.score = nn.Linear(att_dim, 1)

    def forward(self, query, memory, processed_memory, prev_alignment, mask):
        loc = self.location(self.location_conv(prev_alignment[:, None, :]).transpose(1, 2))
        energies = self.score(torch.tanh(self.query(query)[:, None, :] + processed_memory + loc)).squeeze(-1)
        energies = energies.masked_fill(~mask, float("-inf"))
        alignment = torch.softmax(energies, dim=-1)
        context = torch.bmm(alignment[:, None, :], memory).squeeze(1)
        return context, alignment


class PhonemeOutput(NamedTuple):
    logits: Tensor       # B x L x n_symbols
    attention: Tensor    # B x L x N_h
    lengths: Tensor      # decoded length incl. eos (teacher forcing: target lengths)
    truncated: Tensor    # B bools; greedy decoding hit the step cap without eos


class PhonemeDecoder(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.embed = nn.Embedding(cfg.n_symbols, cfg.dec_embed)
        self.cell = nn.LSTMCell(cfg.dec_embed + cfg.h_dim, cfg.dec_units)
        self.attention = LocationAwareAttention(cfg.dec_units, cfg.h_dim, cfg.att_dim, cfg.att_filters,
                                                cfg.att_kernel)
        self.out = nn.Linear(cfg.dec_units + cfg.h_dim, cfg.n_symbols)
        self.units = cfg.dec_units

    def _init(self, h):
        b, n, d = h.shape
        z = h.new_zeros(b, self.units)
        return (z, z.clone()), h.new_zeros(b, d), h.new_zeros(b, n)

    def _step(self, symbol, state, context, alignment, h, processed, mask):
        state = self.cell(torch.cat([self.embed(symbol), context], dim=-1), state)
        context, alignment = self.attention(state[0], h, processed, alignment, mask)
        logits = self.out(torch.cat([state[0], context], dim=-1))
        return logits, state, context, alignment

    def forward(self, h: Tensor, h_lengths: Tensor, targets: Tensor | None = None,
                max_steps: int | None = None) -> PhonemeOutput:
        mask = lengths_to_mask(h_lengths, h.shape[1])
        processed = self.attention.memory(h)
        state, context, alignment = self._init(h)
        b = h.shape[0]
        logits, aligns = [], []
        if targets is not None:
            prev = torch.full((b,), EOS_ID, dtype=torch.long, device=h.device)
            for t in range(targets.shape[1]):
                lg, state, context, alignment = self._step(prev, state, context, alignment, h, processed, mask)
                logits.append(lg)
                aligns.append(alignment)
                prev = targets[:, t]
            lengths = (targets != 0).sum(dim=1)
            truncated = torch.zeros(b, dtype=torch.bool)
        else:
            caps = 2 * h_lengths if max_steps is None else torch.full_like(h_lengths, max_steps)
            prev = torch.full((b,), EOS_ID, dtype=torch.long, device=h.device)
            finished = torch.zeros(b, dtype=torch.bool)
            emitted = torch.zeros(b, dtype=torch.bool)
            lengths = caps.clone()
            for t in range(int(caps.max())):
                lg, state, context, alignment = self._step(prev, state, context, alignment, h, processed, mask)
                logits.append(lg)
                aligns.append(alignment)
                prev = lg.argmax(dim=-1)
                newly = (prev == EOS_ID) & ~finished
                emitted |= newly
                lengths = torch.where(newly, torch.full_like(lengths, t + 1), lengths)
                finished |= newly | (t + 1 >= caps)
                if bool(finished.all()):
                    break
            truncated = ~emitted
        return PhonemeOutput(torch.stack(logits, 1), torch.stack(aligns, 1), lengths, truncated)

    @staticmethod
    def decoded_ids(out: PhonemeOutput) -> list[list[int]]:
        """Greedy symbol ids per utterance, cut at (and excluding) the first eos."""
        ids = out.logits.argmax(-1)
        seqs = []
        for i in range(ids.shape[0]):
            seq = []
            for s in ids[i, :int(out.lengths[i])].tolist():
                if s == EOS_ID:
                    break
                seq.append(s)
            seqs.append(seq)
        return seqs


# ---------------------------------------------------------------------------
# speaker classifier


class SpeakerClassifier(nn.Module):
    def __init__(self, cfg: NetConfig, d_in: int | None = None, n_out: int | None = None):
        super().__init__()
        d_in = cfg.h_dim if d_in is None else d_in
        n_out = cfg.n_speakers if n_out is None else n_out
        self.blocks = nn.ModuleList()
        c = d_in
        for _ in range(cfg.cls_layers):
            self.blocks.append(ConvBlock(c, cfg.cls_channels, cfg.kernel_size, activation="leaky",
                                         leaky_slope=cfg.leaky_slope))
            c = cfg.cls_channels
        self.proj = nn.Linear(c, n_out)

    def logits(self, h: Tensor, lengths: Tensor) -> Tensor:
        mask = lengths_to_mask(lengths, h.shape[1])[:, None, :]
        y = h.transpose(1, 2)
        for block in self.blocks:
            y, mask = block(y, mask)
        return self.proj(y.transpose(1, 2))

    def forward(self, h: Tensor, lengths: Tensor, temperature: float = 1.0) -> Tensor:
        """Per-frame speaker posteriors, B x T x |y|."""
        return torch.softmax(self.logits(h, lengths) / temperature, dim=-1)


# ---------------------------------------------------------------------------
# synthesizer


class Prenet(nn.Module):
    def __init__(self, d_in: int, units: int, dropout: float):
        super().__init__()
        self.fc1 = nn.Linear(d_in, units)
        self.fc2 = nn.Linear(units, units)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: Tensor) -> Tensor:
        return self.dropout(F.relu(self.fc2(self.dropout(F.relu(self.fc1(x))))))


class Postnet(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.blocks = nn.ModuleList()
        c = cfg.n_mels
        for _ in range(cfg.postnet_layers):
            self.blocks.append(ConvBlock(c, cfg.postnet_channels, cfg.kernel_size, dropout=cfg.postnet_dropout))
            c = cfg.postnet_channels
        self.final = nn.Conv1d(c, cfg.n_mels, cfg.kernel_size, padding=cfg.kernel_size // 2)

    def forward(self, x: Tensor, mask: Tensor) -> Tensor:
        m = mask[:, None, :]
        y = x.transpose(1, 2)
        for block in self.blocks:
            y, m = block(y, m)
        y = self.final(_apply_mask(y, m))
        return _apply_mask(y, m).transpose(1, 2)


class SynthOutput(NamedTuple):
    before: Tensor       # B x N_pad x n_mels, pre-postnet
    after: Tensor        # before + postnet residual
    steps: int


class Synthesizer(nn.Module):
    """Frame-synchronous Tacotron-style decoder conditioned on repeated H plus a speaker embedding."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        self.embedding = nn.Embedding(cfg.n_embeddings, cfg.speaker_embed)
        self.prenet = Prenet(cfg.n_mels, cfg.prenet_units, cfg.prenet_dropout)
        cond = cfg.reduction * (cfg.h_dim + cfg.speaker_embed)
        self.lstm = nn.LSTM(cfg.prenet_units + cond, cfg.syn_lstm_units, num_layers=cfg.syn_lstm_layers,
                            batch_first=True)
        self.proj = nn.Linear(cfg.syn_lstm_units, cfg.reduction * cfg.n_mels)
        self.postnet = Postnet(cfg)

    def conditioning(self, h: Tensor, speaker_rows: Tensor) -> Tensor:
        """B x N_pad/r x r*(h_dim + embed): H repeated 4x, speaker vector on every frame, r frames per step."""
        if h.shape[1] == 0:
            raise ValueError("empty linguistic representation")
        if speaker_rows.min() < 0 or speaker_rows.max() >= self.embedding.num_embeddings:
            raise IndexError(f"speaker row out of range [0, {self.embedding.num_embeddings})")
        rep = h.repeat_interleave(4, dim=1)
        emb = self.embedding(speaker_rows)[:, None, :].expand(-1, rep.shape[1], -1)
        cond = torch.cat([rep, emb], dim=-1)
        b, n, d = cond.shape
        r = self.cfg.reduction
        return cond.reshape(b, n // r, r * d)

    def forward(self, h: Tensor, frame_lengths: Tensor, speaker_rows: Tensor,
                teacher: Tensor | None = None) -> SynthOutput:
        cond = self.conditioning(h, speaker_rows)
        b, steps, _ = cond.shape
        r, n_mels = self.cfg.reduction, self.cfg.n_mels
        n_pad = steps * r
        if teacher is not None:
            prev = torch.cat([teacher.new_zeros(b, 1, n_mels), teacher[:, r - 1::r][:, :-1]], dim=1)
            out, _ = self.lstm(torch.cat([self.prenet(prev), cond], dim=-1))
            before = self.proj(out).reshape(b, n_pad, n_mels)
        else:
            prev = cond.new_zeros(b, n_mels)
            state = None
            chunks = []
            for t in range(steps):
                x = torch.cat([self.prenet(prev), cond[:, t]], dim=-1)[:, None, :]
                out, state = self.lstm(x, state)
                frames = self.proj(out[:, 0]).reshape(b, r, n_mels)
                chunks.append(frames)
                prev = frames[:, -1]
            before = torch.cat(chunks, dim=1)
        mask = lengths_to_mask(frame_lengths, n_pad)
        before = _apply_mask(before, mask[..., None])
        after = before + self.postnet(before, mask)
        return SynthOutput(before, after, steps)


# ---------------------------------------------------------------------------
# discriminator


class Discriminator(nn.Module):
    """Strided conv critic with masked temporal mean pooling. No normalization layers."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.blocks = nn.ModuleList()
        c = cfg.n_mels
        for _ in range(cfg.disc_layers):
            self.blocks.append(ConvBlock(c, cfg.disc_channels, cfg.kernel_size, stride=2, norm=False,
                                         activation="leaky", leaky_slope=cfg.leaky_slope))
            c = cfg.disc_channels
        self.final = ConvBlock(c, 1, cfg.kernel_size, stride=2, norm=False, activation=None)

    def forward(self, x: Tensor, frame_mask: Tensor | None = None) -> Tensor:
        if frame_mask is None:
            frame_mask = torch.ones(x.shape[:2], dtype=torch.bool, device=x.device)
        m = frame_mask[:, None, :]
        y = x.transpose(1, 2)
        for block in self.blocks:
            y, m = block(y, m)
        y, m = self.final(y, m)
        m = m.to(y.dtype)
        return (y * m).sum(dim=(1, 2)) / m.sum(dim=(1, 2)).clamp_min(1.0)


# ---------------------------------------------------------------------------
# full model


def init_weights(module: nn.Module, generator: torch.Generator | None = None) -> None:
    """Fan-in uniform for conv/affine/embedding, orthogonal recurrent kernels, zero biases."""
    for m in module.modules():
        if isinstance(m, (nn.Conv1d, nn.Linear)):
            fan_in = m.weight[0].numel()
            bound = math.sqrt(3.0 / fan_in)
            with torch.no_grad():
                m.weight.uniform_(-bound, bound, generator=generator)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.Embedding):
            bound = math.sqrt(3.0 / m.embedding_dim)
            with torch.no_grad():
                m.weight.uniform_(-bound, bound, generator=generator)
        elif isinstance(m, (nn.LSTM, nn.LSTMCell)):
            for name, p in m.named_parameters():
                with torch.no_grad():
                    if name.startswith("weight_hh"):
                        units = p.shape[1]
                        for g in range(p.shape[0] // units):
                            nn.init.orthogonal_(p[g * units:(g + 1) * units], generator=generator)
                    elif name.startswith("weight_ih"):
                        bound = math.sqrt(3.0 / p.shape[1])
                        p.uniform_(-bound, bound, generator=generator)
                    else:
                        p.zero_()


class VCModel(nn.Module):
    """Container for R, C_p, C_s, C'_s, S and the per-speaker discriminators."""

    def __init__(self, cfg: NetConfig, with_discriminators: int = 0):
        super().__init__()
        self.cfg = cfg
        self.recognizer = Recognizer(cfg)
        self.phoneme_decoder = PhonemeDecoder(cfg)
        self.speaker_classifier = SpeakerClassifier(cfg)
        self.speaker_classifier2 = SpeakerClassifier(cfg)
        self.synthesizer = Synthesizer(cfg)
        self.discriminators = nn.ModuleList()
        gen = torch.Generator().manual_seed(cfg.seed)
        init_weights(self, gen)
        if with_discriminators:
            self.add_discriminators(with_discriminators, gen)

    def add_discriminators(self, n: int, generator: torch.Generator | None = None) -> None:
        for _ in range(n):
            d = Discriminator(self.cfg)
            init_weights(d, generator)
            self.discriminators.append(d)

    # parameter partitions -------------------------------------------------
    def classifier_parameters(self):
        return list(self.speaker_classifier.parameters()) + list(self.speaker_classifier2.parameters())

    def generator_parameters(self, include_recognizer: bool = True):
        mods = [self.phoneme_decoder, self.synthesizer]
        if include_recognizer:
            mods.insert(0, self.recognizer)
        return [p for m in mods for p in m.parameters()]

    def discriminator_parameters(self):
        return list(self.discriminators.parameters())

    def partition_names(self) -> dict[str, list[str]]:
        groups = {"classifiers": [], "recognizer": [], "generator": [], "discriminators": []}
        for name, _ in self.named_parameters():
            if name.startswith("speaker_classifier"):
                groups["classifiers"].append(name)
            elif name.startswith("recognizer"):
                groups["recognizer"].append(name)
            elif name.startswith("discriminators"):
                groups["discriminators"].append(name)
            else:
                groups["generator"].append(name)
        return groups

    def parameter_counts(self) -> dict[str, int]:
        parts = {
            "recognizer": self.recognizer,
            "phoneme_decoder": self.phoneme_decoder,
            "speaker_classifier": self.speaker_classifier,
            "speaker_classifier2": self.speaker_classifier2,
            "synthesizer": self.synthesizer,
            "discriminators": self.discriminators,
        }
        return {k: sum(p.numel() for p in m.parameters()) for k, m in parts.items()}

    # forward operations ---------------------------------------------------
    def recognize(self, x: Tensor, lengths: Tensor) -> RecognizerOutput:
        return self.recognizer(x, lengths)

    def classify_phonemes(self, rec: RecognizerOutput, targets: Tensor | None = None) -> PhonemeOutput:
        return self.phoneme_decoder(rec.h, rec.h_lengths, targets)

    def classify_speaker(self, rec: RecognizerOutput, which: str = "main", temperature: float = 1.0) -> Tensor:
        if which == "main":
            return self.speaker_classifier(rec.h, rec.h_lengths, temperature)
        if which == "secondary":
            return self.speaker_classifier2(rec.h1, rec.h1_lengths, temperature)
        raise ValueError(f"unknown classifier {which!r}")

    def synthesize(self, rec: RecognizerOutput, frame_lengths: Tensor, speaker_rows: Tensor,
                   teacher: Tensor | None = None) -> SynthOutput:
        return self.synthesizer(rec.h, frame_lengths, speaker_rows, teacher)

    def discriminate(self, x: Tensor, frame_mask: Tensor, speaker_ids: Tensor) -> Tensor:
        """Score each sequence with the discriminator of its speaker; returns B scalars."""
        if len(self.discriminators) == 0:
            raise RuntimeError("model has no discriminators (pretraining stage)")
        if speaker_ids.min() < 0 or speaker_ids.max() >= len(self.discriminators):
            raise IndexError(f"speaker id out of range for {len(self.discriminators)} discriminators")
        scores = x.new_zeros(x.shape[0])
        for s in torch.unique(speaker_ids).tolist():
            sel = speaker_ids == s
            scores = scores.index_put((sel.nonzero().squeeze(1),), self.discriminators[s](x[sel], frame_mask[sel]))
        return scores
