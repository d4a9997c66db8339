"""Autograd against central finite differences on float64 networks of width <= 8."""

import pytest
import torch
from oracles import directional_check, relative_error

from advvc.losses import discriminator_loss, generator_gan_loss, reconstruction_loss
from advvc.netdefs import NetConfig, VCModel, constant, lengths_to_mask

TOL = 1e-3


@pytest.fixture(scope="module")
def setup():
    torch.manual_seed(0)
    cfg = NetConfig.tiny(rec_dropout=0.0, prenet_dropout=0.0, postnet_dropout=0.0)
    model = VCModel(cfg, with_discriminators=2).double().train()
    # zero-initialized biases put ReLUs exactly on their kink for the all-zero go frame;
    # move to a generic point so central differences are meaningful
    gb = torch.Generator().manual_seed(2)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith("bias"):
                p.add_(0.1 * torch.randn(p.shape, generator=gb, dtype=p.dtype))
    g = torch.Generator().manual_seed(1)
    lengths = torch.tensor([12, 9])
    x = torch.randn(2, 12, cfg.n_mels, generator=g, dtype=torch.float64)
    mask = lengths_to_mask(lengths, 12)
    x = x * mask[..., None]
    return model, x, lengths, mask


def _assert_close(pairs):
    for analytic, numeric in pairs:
        assert relative_error(analytic, numeric) < TOL, (analytic, numeric)


def _rec_loss(model, x, lengths, mask):
    rec = model.recognize(x, lengths)
    syn = model.synthesize(rec, lengths, torch.tensor([0, 1]), teacher=x)
    return reconstruction_loss((syn.before, syn.after), x, mask)


def test_reconstruction_gradient(setup):
    model, x, lengths, mask = setup
    params = [p for p in model.generator_parameters() if p.requires_grad]
    _assert_close(directional_check(lambda: _rec_loss(model, x, lengths, mask), params))


def test_reconstruction_gradient_single_tensors(setup):
    model, x, lengths, mask = setup
    for p in (model.recognizer.conv1.conv.weight, model.synthesizer.proj.weight,
              model.synthesizer.postnet.final.weight):
        _assert_close(directional_check(lambda: _rec_loss(model, x, lengths, mask), [p], n_dirs=2, seed=7))


def test_gan_gradient_wrt_generator(setup):
    model, x, lengths, mask = setup
    ids = torch.tensor([0, 1])

    def loss():
        rec = model.recognize(x, lengths)
        fake = model.synthesize(rec, lengths, ids, teacher=x).after
        with constant(model.discriminators):
            return generator_gan_loss(lambda z, m: model.discriminate(z, m, ids), fake, mask)

    params = list(model.synthesizer.parameters())
    _assert_close(directional_check(loss, params))


def test_gradient_penalty_gradient_wrt_discriminator(setup):
    model, x, lengths, mask = setup
    ids = torch.tensor([0, 1])
    fake = (x * 0.5 + 0.1).detach()
    u = torch.tensor([0.3, 0.8], dtype=torch.float64)

    def penalty():
        parts = discriminator_loss(lambda z, m: model.discriminate(z, m, ids), x, fake, mask, u=u)
        return parts.penalty

    def total():
        return discriminator_loss(lambda z, m: model.discriminate(z, m, ids), x, fake, mask, u=u).total

    params = model.discriminator_parameters()
    _assert_close(directional_check(penalty, params))
    _assert_close(directional_check(total, params, seed=3))
