import numpy as np
import pytest
import torch

from advvc.corpusio import MelConfig, PhonemeInventory
from advvc.toycorpus import generate_toy_corpus
from advvc.trainer import load_corpus

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    generate_toy_corpus(out, n_speakers=2, utts_per_speaker=20, test_per_speaker=10, seed=0)
    return out


@pytest.fixture(scope="session")
def small_toy_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy_small")
    generate_toy_corpus(out, n_speakers=2, utts_per_speaker=4, test_per_speaker=2, seed=3)
    return out


@pytest.fixture(scope="session")
def small_corpus(small_toy_dir):
    corpus, stats = load_corpus(small_toy_dir / "train.tsv", MelConfig())
    return corpus, stats, PhonemeInventory.from_records(corpus.records)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def tiny_finetuned(small_corpus):
    """A few-step finetuned checkpoint on tiny widths, shared by checkpoint and conversion tests."""
    from advvc.netdefs import NetConfig
    from advvc.trainer import TrainConfig, finetune

    corpus, stats, phon = small_corpus
    cfg = TrainConfig(stage="finetune", max_steps=3, batch_size=4, no_pretrain=True)
    ckpt, _ = finetune(cfg, None, corpus, phon, net_config=NetConfig.tiny(n_mels=80), stats=stats)
    return ckpt


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if passed else 'FAIL'}  {detail}")
