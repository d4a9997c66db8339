import itertools
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_force_dtw, levenshtein, monotone_paths, tone

from advvc.corpusio import MelConfig, PhonemeInventory
from advvc.errors import DataError
from advvc.evalkit import (MCD_SCALE, EvalReport, PairResult, SequenceProbe, dtw, edit_distance, estimate_f0,
                           evaluate_pair, f0_rmse, majority_vote, mcc_from_mel, mcd, pairwise_distances,
                           plot_report, plot_training_log, probe_speaker_accuracy, sequence_accuracy)
from advvc.netdefs import NetConfig, VCModel


# ------------------------------------------------------------------------ DTW

def test_dtw_three_by_three_matches_enumeration():
    cost = np.array([[1.0, 5.0, 9.0], [4.0, 1.0, 7.0], [8.0, 3.0, 1.0]])
    total, path = dtw(cost)
    assert total == pytest.approx(brute_force_dtw(cost))
    assert total == 3.0 and path == [(0, 0), (1, 1), (2, 2)]


def test_path_enumeration_counts():
    # Delannoy numbers count lattice paths with steps (1,0), (0,1), (1,1)
    assert [len(list(monotone_paths(k, k))) for k in range(1, 5)] == [1, 3, 13, 63]


@settings(max_examples=80, deadline=None)
@given(n=st.integers(1, 6), m=st.integers(1, 6), seed=st.integers(0, 2**16))
def test_dtw_equals_brute_force(n, m, seed):
    cost = np.random.default_rng(seed).uniform(0, 10, (n, m))
    total, path = dtw(cost)
    assert total == pytest.approx(brute_force_dtw(cost), abs=1e-9)
    assert path[0] == (0, 0) and path[-1] == (n - 1, m - 1)
    assert sum(cost[i, j] for i, j in path) == pytest.approx(total, abs=1e-9)
    for (i, j), (a, b) in zip(path, path[1:]):
        assert (a - i, b - j) in {(1, 0), (0, 1), (1, 1)}


def test_dtw_empty():
    with pytest.raises(ValueError):
        dtw(np.zeros((0, 3)))


# ------------------------------------------------------------------------ MCD

def test_mcd_identical_is_zero():
    c = np.random.default_rng(0).standard_normal((20, 25))
    assert mcd(c, c) == 0.0


@pytest.mark.parametrize("delta", [0.01, 0.3, 1.7])
@pytest.mark.parametrize("dim", [1, 12, 24])
def test_mcd_constant_offset(delta, dim):
    a = np.zeros((15, 25))
    b = a.copy()
    b[:, dim] = delta
    expected = 10 / math.log(10) * math.sqrt(2 * delta ** 2)
    assert mcd(a, b) == pytest.approx(expected, abs=1e-9)
    assert MCD_SCALE * delta == pytest.approx(expected, abs=1e-12)


def test_mcd_ignores_energy_coefficient():
    a = np.zeros((5, 25))
    b = a.copy()
    b[:, 0] = 10.0
    assert mcd(a, b) == 0.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**16), n=st.integers(1, 8), m=st.integers(1, 8))
def test_mcd_symmetric_nonnegative(seed, n, m):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal((n, 25)), r.standard_normal((m, 25))
    assert mcd(a, b) >= 0
    assert mcd(a, b) == pytest.approx(mcd(b, a), abs=1e-9)


def test_mcd_empty():
    with pytest.raises(ValueError):
        mcd(np.zeros((0, 25)), np.zeros((3, 25)))


def test_mcc_is_orthonormal_dct():
    x = np.random.default_rng(1).standard_normal((4, 80))
    n = np.arange(80)
    basis = np.array([np.cos(np.pi * k * (2 * n + 1) / 160) for k in range(25)])
    basis *= np.sqrt(2 / 80)
    basis[0] /= np.sqrt(2)
    np.testing.assert_allclose(mcc_from_mel(x), x @ basis.T, atol=1e-10)


# ------------------------------------------------------------------------- F0

@pytest.mark.parametrize("freq", [80, 97, 120, 150, 200, 233, 300, 350, 400])
def test_f0_tone_accuracy(freq):
    track = estimate_f0(tone(freq), 16000)
    inner = track.f0[5:-5]
    assert track.voiced[5:-5].all()
    assert np.all(np.abs(inner - freq) <= 1.0)


@settings(max_examples=20, deadline=None)
@given(freq=st.floats(80, 400))
def test_f0_tone_property(freq):
    track = estimate_f0(tone(freq, seconds=0.2), 16000)
    assert np.all(np.abs(track.f0[3:-3] - freq) <= 1.0)


def test_f0_rmse_identical_zero():
    x = tone(180)
    err = f0_rmse(x, x)
    assert not err.undefined and err.rmse == pytest.approx(0.0, abs=1e-9)


def test_f0_rmse_200_vs_210():
    err = f0_rmse(tone(200), tone(210))
    assert err.rmse == pytest.approx(10.0, abs=1.0)


def test_f0_silence_undefined():
    silent = np.zeros(8000)
    track = estimate_f0(silent)
    assert track.all_unvoiced
    assert f0_rmse(silent, tone(200)).undefined
    assert math.isnan(f0_rmse(tone(200), silent).rmse)


def test_f0_noise_mostly_unvoiced():
    noise = np.random.default_rng(0).standard_normal(16000)
    assert estimate_f0(noise).voiced.mean() < 0.2


def test_f0_empty_input():
    assert estimate_f0(np.zeros(0)).f0.size == 0


# --------------------------------------------------------------------- probes

@settings(max_examples=60, deadline=None)
@given(a=st.lists(st.integers(0, 4), max_size=8), b=st.lists(st.integers(0, 4), max_size=8))
def test_edit_distance_oracle(a, b):
    assert edit_distance(a, b) == levenshtein(a, b)


def test_sequence_accuracy_examples():
    ref = list(range(10))
    assert sequence_accuracy(ref, ref) == 1.0
    sub = ref.copy()
    sub[4] = 99
    assert sequence_accuracy(sub, ref) == pytest.approx(0.9)
    assert sequence_accuracy([], ref) == 0.0


def test_majority_vote_ties_to_smallest():
    assert majority_vote([1, 0, 1, 0]) == 0
    assert majority_vote([2, 2, 1]) == 2


class _Corpus:
    """Minimal corpus stand-in over random features."""

    def __init__(self, feats, speakers, names):
        from advvc.corpusio import UtteranceRecord

        self.features = feats
        self.speakers = names
        self.records = [UtteranceRecord(f"u{i}", "", names[s]) for i, s in enumerate(speakers)]

    def __len__(self):
        return len(self.records)

    def batch(self, idx, phonemes):
        from advvc.corpusio import make_batch

        return make_batch([self.records[i] for i in idx], [self.features[i] for i in idx], self.speakers, phonemes)


def _hardwire(model, bias):
    with torch.no_grad():
        proj = model.speaker_classifier.proj
        proj.weight.zero_()
        proj.bias.copy_(torch.tensor(bias))


def test_probe_accuracy_hardwired_and_uniform():
    model = VCModel(NetConfig.tiny(n_speakers=2, n_embeddings=2))
    r = np.random.default_rng(0)
    spk = [0] * 20 + [1] * 20
    feats = [r.standard_normal((16, 6)).astype(np.float32) for _ in spk]
    corpus = _Corpus(feats, spk, ["a", "b"])
    _hardwire(model, [0.0, 0.0])
    assert probe_speaker_accuracy(model, corpus, ["a", "b"]) == pytest.approx(0.5)
    _hardwire(model, [5.0, 0.0])
    only_a = _Corpus(feats[:20], spk[:20], ["a", "b"])
    assert probe_speaker_accuracy(model, only_a, ["a", "b"]) == 1.0
    with pytest.raises(DataError):
        probe_speaker_accuracy(model, corpus, ["a"])


def test_sequence_probe_learns_separable_classes():
    r = np.random.default_rng(0)
    seqs = [torch.tensor(r.standard_normal((10, 4)) + (2.0 if i % 2 else -2.0), dtype=torch.float32)
            for i in range(40)]
    labels = [i % 2 for i in range(40)]
    probe = SequenceProbe(4, 2, channels=8, layers=1, seed=0).fit(seqs[:30], labels[:30], steps=100)
    assert probe.accuracy(seqs[30:], labels[30:]) == 1.0


# -------------------------------------------------------------------- reports

def test_report_means_and_files(tmp_path):
    pairs = [PairResult(f"s{i}", "t", f"r{i}", float(i), 2.0 * i, 10, i == 3) for i in range(4)]
    rep = EvalReport(pairs)
    assert rep.mean_mcd == pytest.approx(np.mean([0, 1, 2, 3]), abs=1e-9)
    assert rep.mean_f0_rmse == pytest.approx(np.mean([0, 2, 4]), abs=1e-9)
    js, csv_path = rep.write(tmp_path)
    back = EvalReport.load(js)
    assert back.pairs == pairs
    assert len(csv_path.read_text().strip().splitlines()) == 5
    for p in plot_report(rep, tmp_path / "plots"):
        assert p.stat().st_size > 0


def test_evaluate_pair_identical():
    x = tone(150, seconds=0.3)
    result, frames = evaluate_pair(x, x, 16000, MelConfig(), "a", "b", "c")
    assert result.mcd_db == 0.0 and result.f0_rmse_hz == pytest.approx(0.0, abs=1e-9)
    assert frames == 30


def test_plot_training_log(tmp_path):
    import json

    log = tmp_path / "log.jsonl"
    log.write_text("\n".join(json.dumps({"step": i, "losses": {"rec": 1.0 / (i + 1)}, "total": 1.0}) for i in range(5)))
    (path,) = plot_training_log(log, tmp_path)
    assert path.exists()
