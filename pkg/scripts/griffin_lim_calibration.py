"""Spectral error of Griffin-Lim resynthesis against the number of iterations.

Extracts log-mel from toy utterances, inverts with ``mel_to_waveform`` and re-extracts.
Prints the mean squared log-mel error and the F0 RMSE against the original per
iteration count.

    python3 scripts/griffin_lim_calibration.py --iterations 0 5 15 30 60 --utts 4
"""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from advvc.converter import mel_to_waveform
from advvc.corpusio import MelConfig, extract_mel, load_manifest, read_wav
from advvc.evalkit import f0_rmse
from advvc.toycorpus import generate_toy_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iterations", type=int, nargs="+", default=[0, 5, 15, 30, 60])
    ap.add_argument("--utts", type=int, default=4)
    ap.add_argument("--manifest", help="manifest to draw utterances from (default: a fresh toy corpus)")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        manifest = Path(args.manifest) if args.manifest else generate_toy_corpus(tmp, utts_per_speaker=args.utts,
                                                                                  test_per_speaker=0)["train"]
        records = load_manifest(manifest).records[:args.utts]
        cfg = MelConfig()
        clips = [read_wav(r.audio_path)[0] for r in records]
        mels = [extract_mel(x, cfg.sample_rate, cfg) for x in clips]
        print("iterations\tlogmel_mse\tf0_rmse_hz")
        for n in args.iterations:
            errs, f0s = [], []
            for x, m in zip(clips, mels):
                y = mel_to_waveform(m, cfg, n)
                again = extract_mel(y, cfg.sample_rate, cfg).frames
                k = min(len(again), m.num_frames)
                errs.append(np.mean((again[:k] - m.frames[:k]) ** 2))
                f0 = f0_rmse(y, x[:len(y)], cfg.sample_rate)
                if not f0.undefined:
                    f0s.append(f0.rmse)
            print(f"{n}\t{np.mean(errs):.4f}\t{np.mean(f0s) if f0s else float('nan'):.2f}")


if __name__ == "__main__":
    main()
