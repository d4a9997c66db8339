"""Training objectives and their weighted combination.

Frame- and symbol-level losses average within each utterance over its valid positions
and then over the batch, so appending padding never changes a value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple

import torch
import torch.nn.functional as F
from torch import Tensor

from .corpusio import PAD_ID

PRETRAIN_COMPONENTS = ("phoneme", "speaker", "speaker2", "adv", "adv2", "rec")
FINETUNE_COMPONENTS = PRETRAIN_COMPONENTS + ("gan",)


@dataclass(frozen=True)
class LossWeights:
    w_adv: float
    w_adv_prime: float
    w_gp: float = 10.0
    w_gan: float = 0.05
    stage: str = "pretrain"

    @classmethod
    def pretrain(cls) -> "LossWeights":
        return cls(w_adv=100.0, w_adv_prime=5.0, w_gp=10.0, w_gan=0.05, stage="pretrain")

    @classmethod
    def finetune(cls) -> "LossWeights":
        return cls(w_adv=1.0, w_adv_prime=0.1, w_gp=10.0, w_gan=0.05, stage="finetune")

    @classmethod
    def for_stage(cls, stage: str) -> "LossWeights":
        if stage == "pretrain":
            return cls.pretrain()
        if stage == "finetune":
            return cls.finetune()
        raise ValueError(f"unknown stage {stage!r}")

    def __post_init__(self):
        for name in ("w_adv", "w_adv_prime", "w_gp", "w_gan"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def masked_utterance_mean(values: Tensor, mask: Tensor) -> Tensor:
    """Mean of per-position ``values`` (B x T) within each utterance's mask, then over the batch."""
    m = mask.to(values.dtype)
    counts = m.sum(dim=1)
    if bool((counts == 0).any()):
        raise ValueError("utterance with no valid positions")
    return ((values * m).sum(dim=1) / counts).mean()


def phoneme_ce_loss(logits: Tensor, targets: Tensor, mask: Tensor | None = None) -> Tensor:
    """Cross entropy of teacher-forced phoneme logits (B x L x V) against targets (B x L)."""
    if targets.numel() == 0 or targets.shape[1] == 0:
        raise ValueError("empty phoneme target sequence")
    if logits.shape[:2] != targets.shape:
        raise ValueError(f"logits {tuple(logits.shape)} do not match targets {tuple(targets.shape)}")
    if mask is None:
        mask = targets != PAD_ID
    ce = F.cross_entropy(logits.transpose(1, 2), targets, reduction="none")
    return masked_utterance_mean(ce, mask)


def _check_onehot(y: Tensor) -> None:
    if y.dim() != 2 or not bool(((y == 0) | (y == 1)).all()) or not bool((y.sum(dim=1) == 1).all()):
        raise ValueError("speaker labels must be one-hot rows")


def speaker_ce_loss(posteriors: Tensor, onehot: Tensor, mask: Tensor) -> Tensor:
    """Frame-wise speaker cross entropy; ``posteriors`` is B x N_h x |y|, ``onehot`` B x |y|."""
    _check_onehot(onehot)
    logp = torch.log(posteriors.clamp_min(1e-12))
    ce = -(logp * onehot[:, None, :]).sum(dim=-1)
    return masked_utterance_mean(ce, mask)


def speaker_adv_loss(posteriors: Tensor, mask: Tensor, num_speakers: int | None = None) -> Tensor:
    """Squared distance of every frame's posterior from the uniform prior, averaged over classes."""
    k = posteriors.shape[-1] if num_speakers is None else num_speakers
    if k < 2:
        raise ValueError("adversarial speaker loss needs at least 2 speakers")
    if posteriors.shape[-1] != k:
        raise ValueError(f"posterior width {posteriors.shape[-1]} != num_speakers {k}")
    mse = ((posteriors - 1.0 / k) ** 2).mean(dim=-1)
    return masked_utterance_mean(mse, mask)


def reconstruction_loss(prediction, target: Tensor, mask: Tensor) -> Tensor:
    """Per-frame MSE over channels, averaged over valid frames.

    ``prediction`` may be a tensor or a sequence of tensors (pre- and post-postnet); the
    losses of all of them are summed.
    """
    preds = [prediction] if isinstance(prediction, Tensor) else list(prediction)
    total = target.new_zeros(())
    for p in preds:
        if p.shape != target.shape:
            raise ValueError(f"prediction shape {tuple(p.shape)} != target shape {tuple(target.shape)}")
        total = total + masked_utterance_mean(((p - target) ** 2).mean(dim=-1), mask)
    return total


Critic = Callable[[Tensor, Tensor], Tensor]


class DiscriminatorLoss(NamedTuple):
    total: Tensor
    wasserstein: Tensor   # mean D(X') - mean D(X)
    penalty: Tensor       # mean (||grad|| - 1)^2, unweighted
    grad_norms: Tensor    # B


def interpolate(real: Tensor, fake: Tensor, u: Tensor) -> Tensor:
    """X_hat = u * X + (1 - u) * X' with one u per sample."""
    return u.view(-1, *([1] * (real.dim() - 1))) * real + (1 - u.view(-1, *([1] * (real.dim() - 1)))) * fake


def critic_input_gradient(critic: Critic, x: Tensor, mask: Tensor, create_graph: bool = True) -> Tensor:
    x = x.detach().requires_grad_(True)
    out = critic(x, mask)
    if not out.requires_grad:
        raise RuntimeError("discriminator output is not differentiable with respect to its input")
    (grad,) = torch.autograd.grad(out.sum(), x, create_graph=create_graph, allow_unused=True)
    if grad is None:
        raise RuntimeError("discriminator output does not depend on its input")
    return grad


def discriminator_loss(critic: Critic, real: Tensor, fake: Tensor, mask: Tensor, w_gp: float = 10.0,
                       u: Tensor | None = None, generator: torch.Generator | None = None) -> DiscriminatorLoss:
    """WGAN-GP critic objective, batch-averaged.

    ``critic(x, mask)`` returns one score per sequence. ``u`` (one value per sample) is
    drawn from ``generator`` when not given.
    """
    if real.shape != fake.shape:
        raise ValueError("real and fake batches differ in shape")
    fake = fake.detach()
    if u is None:
        u = torch.rand(real.shape[0], generator=generator, dtype=real.dtype)
    x_hat = interpolate(real, fake, u)
    grad = critic_input_gradient(critic, x_hat, mask, create_graph=True)
    norms = torch.linalg.vector_norm(grad.flatten(1), dim=1)
    penalty = ((norms - 1.0) ** 2).mean()
    wasserstein = critic(fake, mask).mean() - critic(real, mask).mean()
    return DiscriminatorLoss(wasserstein + w_gp * penalty, wasserstein, penalty, norms)


def generator_gan_loss(critic: Critic, fake: Tensor, mask: Tensor) -> Tensor:
    """-mean D(X'). Pass a critic whose parameters are held constant."""
    return -critic(fake, mask).mean()


def _scalar(v) -> float:
    return float(v.detach()) if isinstance(v, Tensor) else float(v)


class LossBreakdown(NamedTuple):
    terms: dict[str, float]       # weighted contributions, summing to total
    raw: dict[str, float]         # unweighted component values
    total: Tensor


def total_loss(stage: str, components: Mapping[str, Tensor | float], weights: LossWeights,
               exclude: tuple[str, ...] | frozenset = ()) -> LossBreakdown:
    """Weighted sum of the generator-side objective for ``stage``.

    Components are keyed ``phoneme, speaker, speaker2, adv, adv2, rec`` plus ``gan`` in
    finetuning. Names in ``exclude`` are dropped (ablations); every other required
    component must be present.
    """
    if stage == "pretrain":
        required = PRETRAIN_COMPONENTS
    elif stage == "finetune":
        required = FINETUNE_COMPONENTS
    else:
        raise ValueError(f"unknown stage {stage!r}")
    scale = {"adv": weights.w_adv, "adv2": weights.w_adv_prime, "gan": weights.w_gan}
    terms, raw = {}, {}
    total = None
    for name in required:
        if name in exclude:
            continue
        if name not in components or components[name] is None:
            raise KeyError(f"missing loss component {name!r} for stage {stage}")
        value = components[name]
        contrib = scale.get(name, 1.0) * value
        total = contrib if total is None else total + contrib
        raw[name] = _scalar(value)
        terms[name] = _scalar(contrib)
    if total is None:
        total = torch.zeros(())
    if not isinstance(total, Tensor):
        total = torch.tensor(float(total))
    return LossBreakdown(terms, raw, total)
