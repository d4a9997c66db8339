"""Speaker information in H with and without the adversarial losses.

Trains the full model and the -adv variant on the toy protocol for each seed. Reports
three numbers per model:

* the accuracy of a freshly trained probe on frozen H
* the accuracy of the model's own speaker classifier
* the fraction of conversions that an external mel probe assigns to the target

    python3 scripts/disentanglement.py --seeds 0 1 2 --workdir /tmp/disent
"""

import argparse
import json
from dataclasses import asdict
from pathlib import Path

import torch

from advvc.experiments import (ToyProtocol, build_toy_corpora, conversion_target_rate, fit_external_probe,
                               hidden_probe_accuracy, median, own_classifier_accuracy, train_variant)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--workdir", default="runs/disentanglement")
    ap.add_argument("--pretrain-steps", type=int, default=ToyProtocol.pretrain_steps)
    ap.add_argument("--finetune-steps", type=int, default=ToyProtocol.finetune_steps)
    args = ap.parse_args()
    torch.set_num_threads(1)

    protocol = ToyProtocol(pretrain_steps=args.pretrain_steps, finetune_steps=args.finetune_steps)
    out = Path(args.workdir)
    corpora = build_toy_corpora(out / "corpora", protocol)
    external = fit_external_probe(corpora)
    rows = []
    for seed in args.seeds:
        for variant in ("full", "-adv"):
            run = train_variant(corpora, variant, seed, protocol)
            row = {"variant": variant, "seed": seed, "hidden_probe": hidden_probe_accuracy(run, corpora, protocol),
                   "own_classifier": own_classifier_accuracy(run, corpora),
                   "conversion_to_target": conversion_target_rate(run, corpora, external),
                   "seconds": round(run.seconds, 1)}
            print(json.dumps(row), flush=True)
            rows.append(row)
    summary = {v: {k: median(r[k] for r in rows if r["variant"] == v)
                   for k in ("hidden_probe", "own_classifier", "conversion_to_target")} for v in ("full", "-adv")}
    print(json.dumps({"median": summary}, indent=2))
    (out / "results.json").write_text(json.dumps({"protocol": asdict(protocol) | {"net": asdict(protocol.net)},
                                                  "runs": rows, "median": summary}, indent=2, default=str))


if __name__ == "__main__":
    main()
