"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line and records it for the summary."""

import itertools
import math
import time

import numpy as np
import pytest
import torch
from conftest import ACCEPTANCE
from oracles import brute_force_dtw, directional_check, relative_error, tone

from advvc.checkpoint import save_checkpoint
from advvc.corpusio import MelConfig, PhonemeInventory
from advvc.evalkit import MCD_SCALE, dtw, estimate_f0, mcd, phoneme_accuracy, reconstruction_error
from advvc.experiments import (ToyProtocol, build_toy_corpora, conversion_target_rate, fit_external_probe,
                               hidden_probe_accuracy, median, own_classifier_accuracy, train_variant)
from advvc.losses import (LossWeights, discriminator_loss, generator_gan_loss, phoneme_ce_loss, reconstruction_loss,
                          speaker_adv_loss, speaker_ce_loss, total_loss)
from advvc.netdefs import NetConfig, VCModel, constant, lengths_to_mask
from advvc.trainer import TrainConfig, Trainer, finetune, load_corpus, prepare_finetune_model, pretrain

SEEDS = (0, 1, 2)
# widths and dropout used by the overfit criterion; see the decisions ledger
OVERFIT_NET = NetConfig.toy(prenet_dropout=0.2, syn_lstm_units=256, rec_lstm_units=64, postnet_channels=64,
                          rec_dropout=0.0, postnet_dropout=0.0)
OVERFIT_STEPS = 2000


def record(n: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[n] = (passed, detail)
    print(f"\n[acceptance] criterion {n} {'PASS' if passed else 'FAIL'}: {detail}")


def check(n: int, passed: bool, detail: str) -> None:
    record(n, passed, detail)
    assert passed, detail


# ---------------------------------------------------------------- criterion 1

def test_criterion_01_loss_oracles():
    start = time.perf_counter()
    errors = {}
    for k in (2, 40, 99):
        post = torch.full((3, 5, k), 1.0 / k, dtype=torch.float64)
        onehot = torch.eye(k, dtype=torch.float64)[torch.tensor([0, 1, k - 1])]
        errors[f"uniform speaker CE |y|={k}"] = abs(speaker_ce_loss(post, onehot, torch.ones(3, 5)).item()
                                                   - math.log(k))
        logits = torch.zeros(2, 4, k, dtype=torch.float64)
        targets = torch.randint(1, k, (2, 4))
        errors[f"uniform phoneme CE V={k}"] = abs(phoneme_ce_loss(logits, targets).item() - math.log(k))
    mask = torch.ones(1, 3)
    errors["adv one-hot |y|=2"] = abs(speaker_adv_loss(torch.tensor([[[1.0, 0.0]] * 3]), mask).item() - 0.25)
    errors["adv one-hot |y|=4"] = abs(speaker_adv_loss(torch.tensor([[[0.0, 1.0, 0.0, 0.0]] * 3]), mask).item()
                                      - 0.1875)
    errors["adv uniform"] = abs(speaker_adv_loss(torch.full((2, 3, 4), 0.25), torch.ones(2, 3)).item())

    def zero_critic(x, m):
        return (x * 0.0).sum(dim=(1, 2)) + 0.37

    real, fake = torch.randn(4, 6, 3), torch.randn(4, 6, 3)
    gp = discriminator_loss(zero_critic, real, fake, torch.ones(4, 6))
    errors["GP zero network"] = abs(gp.total.item() - 10.0)

    comps = {"phoneme": 0.7, "speaker": 0.2, "speaker2": 0.3, "adv": 0.01, "adv2": 0.04, "rec": 0.5, "gan": -2.0}
    pre = total_loss("pretrain", comps, LossWeights.pretrain())
    errors["pretrain total"] = abs(pre.total.item() - (0.7 + 0.2 + 0.3 + 100 * 0.01 + 5 * 0.04 + 0.5))
    ft = total_loss("finetune", comps, LossWeights.finetune())
    errors["finetune total"] = abs(ft.total.item() - (0.7 + 0.2 + 0.3 + 0.01 + 0.1 * 0.04 + 0.5 + 0.05 * -2.0))
    ones = {k: torch.tensor(1.0) for k in comps}
    errors["all-ones pretrain"] = abs(total_loss("pretrain", ones, LossWeights.pretrain()).total.item() - 109.0)
    errors["all-ones finetune"] = abs(total_loss("finetune", ones, LossWeights.finetune()).total.item() - 5.15)
    elapsed = time.perf_counter() - start
    worst = max(errors, key=errors.get)
    check(1, max(errors.values()) < 1e-6 and elapsed < 60,
          f"{len(errors)} closed forms, worst {worst} off by {errors[worst]:.2e} (tol 1e-6), {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 2

def test_criterion_02_gradient_checks():
    start = time.perf_counter()
    torch.manual_seed(0)
    cfg = NetConfig.tiny(rec_dropout=0.0, prenet_dropout=0.0, postnet_dropout=0.0)
    assert max(v for k, v in vars(cfg).items() if k.endswith(("channels", "units", "dim", "embed"))) <= 8
    model = VCModel(cfg, with_discriminators=2).double().train()
    gb = torch.Generator().manual_seed(2)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith("bias"):  # off the ReLU kink, see ledger
                p.add_(0.1 * torch.randn(p.shape, generator=gb, dtype=p.dtype))
    g = torch.Generator().manual_seed(1)
    lengths = torch.tensor([12, 9])
    mask = lengths_to_mask(lengths, 12)
    x = torch.randn(2, 12, cfg.n_mels, generator=g, dtype=torch.float64) * mask[..., None]
    ids = torch.tensor([0, 1])

    def l_rec():
        rec = model.recognize(x, lengths)
        syn = model.synthesize(rec, lengths, ids, teacher=x)
        return reconstruction_loss((syn.before, syn.after), x, mask)

    def l_gan():
        fake = model.synthesize(model.recognize(x, lengths), lengths, ids, teacher=x).after
        with constant(model.discriminators):
            return generator_gan_loss(lambda z, m: model.discriminate(z, m, ids), fake, mask)

    fake = (0.5 * x + 0.1).detach()
    u = torch.tensor([0.3, 0.8], dtype=torch.float64)

    def l_gp():
        return discriminator_loss(lambda z, m: model.discriminate(z, m, ids), x, fake, mask, u=u).penalty

    worst = {}
    for name, fn, params in (("L_rec", l_rec, [p for p in model.generator_parameters() if p.requires_grad]),
                             ("L_gan", l_gan, list(model.synthesizer.parameters())),
                             ("GP", l_gp, list(model.discriminator_parameters()))):
        worst[name] = max(relative_error(a, n) for a, n in directional_check(fn, params))
    elapsed = time.perf_counter() - start
    detail = ", ".join(f"{k} rel err {v:.1e}" for k, v in worst.items())
    check(2, max(worst.values()) < 1e-3 and elapsed < 300, f"{detail} (tol 1e-3), {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 3

def test_criterion_03_temporal_contracts():
    start = time.perf_counter()
    cfg = NetConfig.tiny(n_mels=80)
    model = VCModel(cfg).eval()
    rng = np.random.default_rng(0)
    lengths_seen, bad = [], []
    for n in rng.integers(1, 400, size=100):
        n = int(n)
        n_pad = -(-n // 4) * 4
        x = torch.randn(1, n_pad, 80)
        lengths = torch.tensor([n])
        with torch.no_grad():
            rec = model.recognize(x, lengths)
            out = model.synthesize(rec, lengths, torch.tensor([0]), teacher=x)
        ok = (rec.h.shape[1] == n_pad // 4 and rec.h1.shape[1] == n_pad // 2 and out.after.shape[1] == n_pad
              and out.before.shape[1] == n_pad)
        lengths_seen.append(n)
        if not ok:
            bad.append(n)
    elapsed = time.perf_counter() - start
    check(3, not bad and elapsed < 60,
          f"100 lengths in [{min(lengths_seen)}, {max(lengths_seen)}], {len(bad)} violations, {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 4

def _snap(module):
    return [p.detach().clone() for p in module.parameters()]


def _same(before, module):
    return all(torch.equal(a, b) for a, b in zip(before, module.parameters()))


def test_criterion_04_stop_gradient_purity(small_corpus):
    corpus, stats, phon = small_corpus
    cfg = TrainConfig(stage="finetune", max_steps=20, batch_size=4, no_pretrain=True, k_classifier=2)
    model, _, rows = prepare_finetune_model(None, corpus, NetConfig.tiny(n_mels=80), phon, 0)
    tr = Trainer(model, cfg, corpus, phon, rows)
    violations = {"C step moved R": 0, "G step moved C_s": 0, "D step moved S": 0}
    for _ in range(20):
        batch = corpus.batch(tr.sampler.next(), phon)
        tr._set_train_mode()
        for _ in range(cfg.k_classifier):
            r0 = _snap(model.recognizer)
            tr.classifier_update_step(batch)
            violations["C step moved R"] += not _same(r0, model.recognizer)
        s0 = _snap(model.synthesizer)
        tr.discriminator_update_step(batch)
        violations["D step moved S"] += not _same(s0, model.synthesizer)
        c0 = _snap(model.speaker_classifier)
        c1 = _snap(model.speaker_classifier2)
        tr.main_update_step(batch)
        violations["G step moved C_s"] += not (_same(c0, model.speaker_classifier)
                                               and _same(c1, model.speaker_classifier2))
        tr.step += 1
    check(4, sum(violations.values()) == 0,
          "20 steps, " + ", ".join(f"{k}: {v}" for k, v in violations.items()))


# ---------------------------------------------------------------- criterion 5

@pytest.mark.slow
def test_criterion_05_overfit(toy_dir):
    start = time.perf_counter()
    corpus, stats = load_corpus(toy_dir / "train.tsv", MelConfig())
    phon = PhonemeInventory.from_records(corpus.records)
    assert corpus.speakers == ["spk0", "spk1"] and len(corpus) == 40
    cfg = TrainConfig(stage="finetune", max_steps=OVERFIT_STEPS, no_pretrain=True, seed=0)
    ckpt, _ = finetune(cfg, None, corpus, phon, net_config=OVERFIT_NET, stats=stats)
    l_rec = reconstruction_error(ckpt, corpus)
    acc = phoneme_accuracy(ckpt, corpus).accuracy
    elapsed = time.perf_counter() - start
    check(5, l_rec < 0.05 and acc > 0.9 and elapsed <= 900,
          f"{OVERFIT_STEPS} finetune steps: masked L_rec {l_rec:.4f} (< 0.05), phoneme accuracy {acc:.3f} (> 0.9), "
          f"{elapsed / 60:.1f} min")


# ------------------------------------------------------- criteria 6, 7 and 10

PROTOCOL = ToyProtocol()


@pytest.fixture(scope="session")
def protocol_runs(tmp_path_factory):
    start = time.perf_counter()
    corpora = build_toy_corpora(tmp_path_factory.mktemp("protocol"), PROTOCOL)
    runs = {(v, s): train_variant(corpora, v, s, PROTOCOL) for s in SEEDS for v in ("full", "-adv")}
    hidden = {k: hidden_probe_accuracy(r, corpora, PROTOCOL) for k, r in runs.items()}
    own = {k: own_classifier_accuracy(r, corpora) for k, r in runs.items()}
    return corpora, runs, hidden, own, time.perf_counter() - start


@pytest.mark.slow
def test_criterion_06_disentanglement_direction(protocol_runs):
    _, _, hidden, _, elapsed = protocol_runs
    with_adv = median(hidden["full", s] for s in SEEDS)
    without = median(hidden["-adv", s] for s in SEEDS)
    per_seed = "; ".join(f"seed {s}: {hidden['-adv', s]:.2f} vs {hidden['full', s]:.2f}" for s in SEEDS)
    check(6, without >= 0.9 and without - with_adv >= 0.15 and elapsed <= 1800,
          f"fresh H probe, median without adv {without:.3f} (>= 0.9), with adv {with_adv:.3f} "
          f"(gap {without - with_adv:+.3f}, need >= 0.15) [{per_seed}], {elapsed / 60:.1f} min")


@pytest.mark.slow
def test_criterion_07_conversion_effect(protocol_runs):
    corpora, runs, _, _, _ = protocol_runs
    probe = fit_external_probe(corpora)
    rates = [conversion_target_rate(runs["full", s], corpora, probe) for s in SEEDS]
    check(7, median(rates) >= 0.7,
          f"external mel probe assigns {median(rates):.3f} of converted test utterances to the target "
          f"(median of {', '.join(f'{r:.2f}' for r in rates)}; need >= 0.7)")


# ---------------------------------------------------------------- criterion 8

def test_criterion_08_evalkit_oracles():
    rng = np.random.default_rng(0)
    dtw_bad = 0
    pairs = 0
    for n, m in itertools.product(range(1, 7), repeat=2):
        for _ in range(2):
            cost = rng.uniform(0, 10, (n, m))
            dtw_bad += abs(dtw(cost)[0] - brute_force_dtw(cost)) > 1e-9
            pairs += 1
    mcd_err = 0.0
    for delta in (0.05, 0.4, 2.0):
        a = np.zeros((12, 25))
        b = a.copy()
        b[:, 5] = delta
        mcd_err = max(mcd_err, abs(mcd(a, b) - 10 / math.log(10) * math.sqrt(2) * delta))
    assert math.isclose(MCD_SCALE, 10 / math.log(10) * math.sqrt(2))
    f0_err = 0.0
    for freq in np.linspace(80, 400, 17):
        track = estimate_f0(tone(freq), 16000)
        f0_err = max(f0_err, float(np.max(np.abs(track.f0[5:-5] - freq))))
        assert track.voiced[5:-5].all()
    check(8, dtw_bad == 0 and mcd_err < 1e-9 and f0_err <= 1.0,
          f"DTW = brute force on {pairs} cost matrices (lengths 1..6, {dtw_bad} mismatches); "
          f"MCD closed form off by {mcd_err:.1e} (tol 1e-9); F0 worst error {f0_err:.3f} Hz over 80-400 Hz (tol 1)")


# ---------------------------------------------------------------- criterion 9

def test_criterion_09_reproducibility(small_corpus, tmp_path):
    corpus, stats, phon = small_corpus
    net = NetConfig.tiny(n_mels=80)
    outputs = []
    for run in ("a", "b"):
        pre_cfg = TrainConfig(stage="pretrain", max_steps=50, batch_size=4, seed=3)
        pre, tp = pretrain(pre_cfg, corpus, net, phon, stats)
        ft_cfg = TrainConfig(stage="finetune", max_steps=50, batch_size=4, seed=3)
        ft, tf = finetune(ft_cfg, pre, corpus, phon)
        save_checkpoint(pre, tmp_path / f"{run}_pre.ckpt")
        save_checkpoint(ft, tmp_path / f"{run}_ft.ckpt")
        outputs.append((tp.history, tf.history))
    same_logs = outputs[0] == outputs[1] and len(outputs[0][0]) == 50 and len(outputs[0][1]) == 50
    same_bytes = all((tmp_path / f"a_{s}.ckpt").read_bytes() == (tmp_path / f"b_{s}.ckpt").read_bytes()
                     for s in ("pre", "ft"))
    check(9, same_logs and same_bytes,
          f"50 pretrain + 50 finetune steps twice: identical logs {same_logs}, bit-identical checkpoints {same_bytes}")


# --------------------------------------------------------------- criterion 10

TABLE3 = {
    "-adv": (["--no-adv"], ["--no-adv"]),
    "-phone": (["--no-phone"], ["--no-phone"]),
    "-pretrain": (None, ["--no-pretrain"]),
    "-joint": (["--separate"], ["--separate"]),
    "-tunerec": ([], ["--freeze-recognizer"]),
    "-all": (["--baseline-all"], ["--baseline-all"]),
}


def _launch_variants(tmp_path):
    from advvc.cli import main

    w = tmp_path
    fast = ["--net.preset", "tiny", "--train.max_steps", "2", "--train.batch_size", "4"]
    assert main(["--workdir", str(w), "toy-corpus", "pre", "--speakers", "3", "--train-utts", "6",
                 "--test-utts", "0", "--prefix", "pre"]) == 0
    assert main(["--workdir", str(w), "toy-corpus", "pair", "--train-utts", "4", "--test-utts", "0"]) == 0
    launched = {}
    for variant, (pre_flags, ft_flags) in TABLE3.items():
        tag = variant.strip("-")
        code = 0
        ft = ["--workdir", str(w), "finetune", *fast, "--data.train_manifest", "pair/train.tsv",
              "--run.run_dir", f"{tag}_ft", *ft_flags]
        if pre_flags is not None:
            code = main(["--workdir", str(w), "pretrain", *fast, "--data.train_manifest", "pre/train.tsv",
                         "--run.run_dir", f"{tag}_pre", *pre_flags])
            ft += ["--checkpoint", f"{tag}_pre/model.ckpt"]
        launched[variant] = code == 0 and main(ft) == 0
    return launched


@pytest.mark.slow
def test_criterion_10_ablations(protocol_runs, tmp_path):
    _, _, hidden, own, _ = protocol_runs
    launched = _launch_variants(tmp_path)
    full = median(hidden["full", s] for s in SEEDS)
    no_adv = median(hidden["-adv", s] for s in SEEDS)
    own_full = median(own["full", s] for s in SEEDS)
    own_no_adv = median(own["-adv", s] for s in SEEDS)
    check(10, all(launched.values()) and no_adv > full,
          f"{sum(launched.values())}/6 variants launched ({', '.join(v for v, ok in launched.items() if ok)}); "
          f"fresh H probe -adv {no_adv:.3f} vs full {full:.3f} (need -adv > full); "
          f"own C_s -adv {own_no_adv:.3f} vs full {own_full:.3f}")
