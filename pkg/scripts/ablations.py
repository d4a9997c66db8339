"""Train every ablation variant on the toy protocol and report the objective measures.

For each variant this prints the MCD and F0 RMSE of conversions against the parallel
target references (Griffin-Lim resynthesis), and the fresh-probe accuracy on H.

    python3 scripts/ablations.py --seed 0 --workdir /tmp/ablations
"""

import argparse
import json
from pathlib import Path

import numpy as np
import torch

from advvc.converter import Converter, mel_to_waveform
from advvc.corpusio import MelSpectrogram, denormalize, read_wav
from advvc.evalkit import EvalReport, evaluate_pair
from advvc.experiments import VARIANTS, ToyProtocol, build_toy_corpora, hidden_probe_accuracy, train_variant


def conversion_report(run, corpora, iterations: int) -> EvalReport:
    conv = Converter(run.finetuned)
    test = corpora.pair_test
    refs = {(r.speaker_id, r.utterance_id.split("_", 1)[1]): r.audio_path for r in test.records}
    report = EvalReport()
    for rec, feats in zip(test.records, test.features):
        if rec.speaker_id != test.speakers[0]:
            continue
        target = test.speakers[1]
        src = MelSpectrogram(denormalize(feats.astype(np.float64), corpora.stats), corpora.mel.hop_length)
        wav = mel_to_waveform(conv.convert_mel(src, target), corpora.mel, iterations)
        ref, sr = read_wav(refs[target, rec.utterance_id.split("_", 1)[1]])
        result, frames = evaluate_pair(wav, ref, sr, corpora.mel, rec.utterance_id, target, rec.utterance_id)
        report.pairs.append(result)
        report.frames_evaluated += frames
    return report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--variants", nargs="+", default=list(VARIANTS))
    ap.add_argument("--workdir", default="runs/ablations")
    ap.add_argument("--iterations", type=int, default=30, help="Griffin-Lim iterations")
    args = ap.parse_args()
    torch.set_num_threads(1)

    out = Path(args.workdir)
    protocol = ToyProtocol()
    corpora = build_toy_corpora(out / "corpora", protocol)
    rows = []
    for variant in args.variants:
        run = train_variant(corpora, variant, args.seed, protocol)
        report = conversion_report(run, corpora, args.iterations)
        report.write(out / variant.strip("-"))
        row = {"variant": variant, "mcd_db": report.mean_mcd, "f0_rmse_hz": report.mean_f0_rmse,
               "hidden_probe": hidden_probe_accuracy(run, corpora, protocol), "seconds": round(run.seconds, 1)}
        print(json.dumps(row), flush=True)
        rows.append(row)
    (out / "results.json").write_text(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
