"""Command-line entry point: corpus preparation, training stages, conversion, evaluation, plots.

Every training command writes a self-contained run directory::

    <run_dir>/config.yaml      resolved configuration (re-runnable as --config)
    <run_dir>/seed.txt
    <run_dir>/inputs.sha256    content hash of manifests, audio and parent checkpoint
    <run_dir>/train.log.jsonl  one JSON object per step
    <run_dir>/model.ckpt

All relative paths resolve against ``--workdir``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import types
import typing
from pathlib import Path

import numpy as np
import torch
import yaml

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .corpusio import (MelConfig, PhonemeInventory, compute_stats, content_hash, extract_corpus, load_manifest,
                       read_wav)
from .errors import AdvVCError, ConfigError, DataError
from .losses import LossWeights
from .netdefs import NetConfig
from .trainer import TrainConfig, finetune, load_corpus, pretrain

log = logging.getLogger("advvc")

# network fields set by the training code from the corpus, never by the user
DERIVED_NET_FIELDS = ("n_speakers", "n_embeddings", "n_symbols", "seed", "n_mels")
NET_PRESETS = {"toy": NetConfig.toy, "paper": NetConfig, "tiny": NetConfig.tiny}

# ablation switches, each a set of train-section overrides
ABLATIONS = {
    "no_adv": ("-adv: drop L_adv and L_adv'", {"no_adv": True}),
    "no_phone": ("-phone: drop L_p", {"no_phone": True}),
    "no_pretrain": ("-pretrain: random initialization before finetuning", {"no_pretrain": True}),
    "separate": ("-joint: train recognizer and synthesizer in disjoint phases", {"separate_training": True}),
    "freeze_recognizer": ("-tunerec: keep the recognizer fixed during finetuning", {"freeze_recognizer": True}),
    "baseline_all": ("-all: plain recognition-synthesis baseline (no adversarial loss, separate training; "
                     "the recognizer is not adapted at finetuning)",
                     {"no_adv": True, "separate_training": True}),
}


# ---------------------------------------------------------------------------
# run configuration

def _field_types(cls) -> dict[str, typing.Any]:
    return typing.get_type_hints(cls)


def _section_schema() -> dict[str, dict[str, tuple[typing.Any, typing.Any, str]]]:
    """section -> field -> (type, default, help)."""
    schema: dict[str, dict] = {}
    hints = _field_types(MelConfig)
    schema["audio"] = {f.name: (hints[f.name], f.default, "feature extraction") for f in dataclasses.fields(MelConfig)}
    hints = _field_types(NetConfig)
    net = {"preset": (str, "toy", f"width preset: {', '.join(NET_PRESETS)}; explicit fields override it")}
    for f in dataclasses.fields(NetConfig):
        if f.name not in DERIVED_NET_FIELDS:
            net[f.name] = (typing.Optional[hints[f.name]], None, "network width / layer setting; null = preset")
    schema["net"] = net
    hints = _field_types(TrainConfig)
    schema["train"] = {f.name: (hints[f.name], f.default, "training schedule")
                       for f in dataclasses.fields(TrainConfig) if f.name not in ("stage", "weights")}
    schema["weights"] = {name: (typing.Optional[float], None, "loss weight; null = stage default")
                         for name in ("w_adv", "w_adv_prime", "w_gp", "w_gan")}
    schema["data"] = {
        "train_manifest": (str, "", "training manifest (tsv)"),
        "val_manifest": (str, "", "optional validation manifest for early stopping"),
        "workers": (int, 1, "feature extraction threads"),
    }
    schema["run"] = {
        "run_dir": (str, "runs/default", "output directory of this run"),
        "checkpoint": (str, "", "pretrained checkpoint to finetune from"),
    }
    return schema


def _accepts(tp, value) -> bool:
    if tp is typing.Any:
        return True
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        return any(_accepts(a, value) for a in typing.get_args(tp))
    if tp is type(None):
        return value is None
    if tp is bool:
        return isinstance(value, bool)
    if tp is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if tp is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if tp is str:
        return isinstance(value, str)
    return isinstance(value, tp)


def _coerce(tp, value):
    """Integers given for float fields become floats so the echoed config keeps its types."""
    int_field = tp is int or int in typing.get_args(tp)
    if _accepts(int, value) and _accepts(tp, 0.5) and not int_field:
        return float(value)
    return value


@dataclasses.dataclass
class RunConfig:
    """Resolved configuration: defaults, then the YAML file, then command-line overrides."""

    sections: dict[str, dict[str, typing.Any]]

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({s: {k: v[1] for k, v in fields.items()} for s, fields in _section_schema().items()})

    def update(self, overrides: dict, source: str) -> None:
        schema = _section_schema()
        for section, values in overrides.items():
            if section not in schema:
                raise ConfigError(f"{source}: unknown config section {section!r}")
            if not isinstance(values, dict):
                raise ConfigError(f"{source}: section {section!r} must be a mapping")
            for key, value in values.items():
                if key not in schema[section]:
                    raise ConfigError(f"{source}: unknown key {section}.{key}")
                tp = schema[section][key][0]
                if not _accepts(tp, value):
                    raise ConfigError(f"{source}: {section}.{key}={value!r} is not a valid {tp}")
                self.sections[section][key] = _coerce(tp, value)

    def set_dotted(self, dotted: str, raw: str) -> None:
        section, _, key = dotted.partition(".")
        self.update({section: {key: yaml.safe_load(raw)}}, f"--{dotted}")

    # typed views
    def mel_config(self) -> MelConfig:
        return MelConfig(**self.sections["audio"])

    def net_config(self) -> NetConfig:
        net = dict(self.sections["net"])
        preset = net.pop("preset")
        if preset not in NET_PRESETS:
            raise ConfigError(f"unknown net preset {preset!r}; choose from {sorted(NET_PRESETS)}")
        overrides = {k: v for k, v in net.items() if v is not None}
        return NET_PRESETS[preset](n_mels=self.sections["audio"]["n_mels"], **overrides)

    def train_config(self, stage: str) -> TrainConfig:
        weights = LossWeights.for_stage(stage)
        explicit = {k: v for k, v in self.sections["weights"].items() if v is not None}
        if explicit:
            weights = dataclasses.replace(weights, **explicit)
        try:
            return TrainConfig(stage=stage, weights=weights, **self.sections["train"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def resolved(self, stage: str) -> dict:
        """Fully expanded copy: preset widths and stage weights written out explicitly."""
        out = json.loads(json.dumps(self.sections))
        net = self.net_config()
        for k in out["net"]:
            if k != "preset":
                out["net"][k] = getattr(net, k)
        tc = self.train_config(stage)
        out["train"]["batch_size"] = tc.batch_size
        out["weights"] = {k: getattr(tc.weights, k) for k in out["weights"]}
        return out


def load_run_config(args) -> RunConfig:
    cfg = RunConfig.defaults()
    if getattr(args, "config", None):
        path = _resolve(args, args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        data = yaml.safe_load(path.read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        cfg.update(data, str(path))
    for dotted, raw in getattr(args, "overrides", None) or []:
        cfg.set_dotted(dotted, raw)
    for name, (_, changes) in ABLATIONS.items():
        if getattr(args, name, False):
            cfg.update({"train": changes}, f"--{name.replace('_', '-')}")
    if getattr(args, "seed", None) is not None:
        cfg.update({"train": {"seed": args.seed}}, "--seed")
    return cfg


# ---------------------------------------------------------------------------
# helpers

def _resolve(args, path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(args.workdir) / p


def _manifest_inputs(manifest: Path) -> list[Path]:
    man = load_manifest(manifest)
    return [manifest] + [Path(r.audio_path) for r in man.records]


def _prepare_run_dir(args, cfg: RunConfig, stage: str, inputs: list[Path]) -> Path:
    run_dir = _resolve(args, cfg.sections["run"]["run_dir"])
    run_dir.mkdir(parents=True, exist_ok=True)
    resolved = cfg.resolved(stage)
    (run_dir / "config.yaml").write_text(yaml.safe_dump(resolved, sort_keys=True))
    (run_dir / "seed.txt").write_text(f"{resolved['train']['seed']}\n")
    (run_dir / "inputs.sha256").write_text(content_hash(inputs) + "\n")
    log_path = run_dir / "train.log.jsonl"
    if log_path.exists():
        log_path.unlink()
    return run_dir


def _check_ablation_conflicts(args, cfg: RunConfig, stage: str) -> None:
    train = cfg.sections["train"]
    if stage == "pretrain":
        if train["no_pretrain"]:
            raise ConfigError("--no-pretrain only applies to finetuning")
        if train["freeze_recognizer"]:
            raise ConfigError("--freeze-recognizer only applies to finetuning")
    if stage == "finetune":
        if train["no_pretrain"] and cfg.sections["run"]["checkpoint"]:
            raise ConfigError("--no-pretrain conflicts with a supplied pretrained checkpoint; drop one of them")
        if not train["no_pretrain"] and not cfg.sections["run"]["checkpoint"]:
            raise ConfigError("finetuning needs --checkpoint (or --no-pretrain for random initialization)")
    if train["no_phone"] and train["separate_training"] and train["freeze_recognizer"]:
        raise ConfigError("--no-phone with separate training and a frozen recognizer leaves nothing to train "
                          "the recognizer")


def _load_val(args, cfg: RunConfig, mel: MelConfig, stats, speakers):
    vm = cfg.sections["data"]["val_manifest"]
    if not vm:
        return None, []
    path = _resolve(args, vm)
    corpus, _ = load_corpus(path, mel, stats, speakers=speakers, workers=cfg.sections["data"]["workers"])
    return corpus, _manifest_inputs(path)


# ---------------------------------------------------------------------------
# commands

def cmd_toy_corpus(args) -> int:
    from .toycorpus import generate_toy_corpus

    out = _resolve(args, args.out_dir)
    paths = generate_toy_corpus(out, n_speakers=args.speakers, utts_per_speaker=args.train_utts,
                                test_per_speaker=args.test_utts, seed=args.seed, prefix=args.prefix)
    for split, p in paths.items():
        print(f"{split}: {p}")
    return 0


def cmd_prepare(args) -> int:
    cfg = load_run_config(args)
    mel = cfg.mel_config()
    manifest = _resolve(args, args.manifest)
    man = load_manifest(manifest)
    mels = extract_corpus(man.records, mel, workers=cfg.sections["data"]["workers"])
    stats = compute_stats(mels, mel.fingerprint())
    out = _resolve(args, args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / "features.npz", **{m.utterance_id: m.frames for m in mels})
    stats.save(out / "stats.json", mel)
    (out / "inputs.sha256").write_text(content_hash(_manifest_inputs(manifest)) + "\n")
    print(f"{len(mels)} utterances, {sum(m.num_frames for m in mels)} frames -> {out}")
    return 0


def cmd_pretrain(args) -> int:
    cfg = load_run_config(args)
    _check_ablation_conflicts(args, cfg, "pretrain")
    tc = cfg.train_config("pretrain")
    mel = cfg.mel_config()
    tm = cfg.sections["data"]["train_manifest"]
    if not tm:
        raise ConfigError("pretraining needs data.train_manifest")
    manifest = _resolve(args, tm)
    corpus, stats = load_corpus(manifest, mel, workers=cfg.sections["data"]["workers"])
    phonemes = PhonemeInventory.from_records(corpus.records)
    val, val_inputs = _load_val(args, cfg, mel, stats, corpus.speakers)
    run_dir = _prepare_run_dir(args, cfg, "pretrain", _manifest_inputs(manifest) + val_inputs)
    ckpt, trainer = pretrain(tc, corpus, cfg.net_config(), phonemes, stats, mel, val,
                             log_path=run_dir / "train.log.jsonl", dump_dir=run_dir / "dumps")
    save_checkpoint(ckpt, run_dir / "model.ckpt")
    print(f"pretrained {trainer.step} steps -> {run_dir / 'model.ckpt'}")
    return 0


def cmd_finetune(args) -> int:
    cfg = load_run_config(args)
    if args.checkpoint:
        cfg.update({"run": {"checkpoint": args.checkpoint}}, "--checkpoint")
    _check_ablation_conflicts(args, cfg, "finetune")
    tc = cfg.train_config("finetune")
    if args.baseline_all:
        # the baseline adapts only the synthesizer on the target pair
        tc = dataclasses.replace(tc, freeze_recognizer=True)
        cfg.update({"train": {"freeze_recognizer": True}}, "--baseline-all")
    tm = cfg.sections["data"]["train_manifest"]
    if not tm:
        raise ConfigError("finetuning needs data.train_manifest")
    manifest = _resolve(args, tm)
    inputs = _manifest_inputs(manifest)
    pretrained = None
    if cfg.sections["run"]["checkpoint"]:
        ck_path = _resolve(args, cfg.sections["run"]["checkpoint"])
        pretrained = load_checkpoint(ck_path)
        inputs.append(ck_path)
        mel, stats = pretrained.mel_config, pretrained.stats
        phon = PhonemeInventory(pretrained.phonemes)
        corpus, _ = load_corpus(manifest, mel, stats, phonemes=phon, workers=cfg.sections["data"]["workers"])
        net = None
    else:
        mel = cfg.mel_config()
        corpus, stats = load_corpus(manifest, mel, workers=cfg.sections["data"]["workers"])
        phon = PhonemeInventory.from_records(corpus.records)
        net = cfg.net_config()
    val, val_inputs = _load_val(args, cfg, mel, stats, corpus.speakers)
    run_dir = _prepare_run_dir(args, cfg, "finetune", inputs + val_inputs)
    ckpt, trainer = finetune(tc, pretrained, corpus, phon, net_config=net, stats=stats, mel_config=mel,
                             val_corpus=val, log_path=run_dir / "train.log.jsonl", dump_dir=run_dir / "dumps")
    save_checkpoint(ckpt, run_dir / "model.ckpt")
    print(f"finetuned {trainer.step} steps -> {run_dir / 'model.ckpt'}")
    return 0


def cmd_convert(args) -> int:
    from .converter import Converter, ConversionRequest

    ckpt = load_checkpoint(_resolve(args, args.checkpoint))
    conv = Converter(ckpt)
    if args.speaker not in ckpt.stage_speakers:  # fail before any work
        raise DataError(f"target speaker {args.speaker!r} not in checkpoint inventory {ckpt.stage_speakers}")
    src = _resolve(args, args.source)
    out = _resolve(args, args.out)
    if not src.exists():
        raise DataError(f"source {src} does not exist")
    if src.is_dir():
        jobs = [(p, out / p.relative_to(src)) for p in sorted(src.rglob("*.wav"))]
        if not jobs:
            raise DataError(f"no .wav files under {src}")
    else:
        jobs = [(src, out if out.suffix == ".wav" else out / src.name)]
    rows = []
    for source, dest in jobs:
        dest.parent.mkdir(parents=True, exist_ok=True)
        conv.convert(ConversionRequest(source, args.speaker, dest, args.iterations))
        rows.append((str(source), str(dest), args.speaker))
    listing = (out if src.is_dir() else dest.parent) / "conversions.tsv"
    with listing.open("w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(["source", "converted", "target_speaker"])
        w.writerows(rows)
    print(f"converted {len(rows)} file(s) -> {out}")
    return 0


def content_key(utterance_id: str, speaker_id: str) -> str:
    """Utterance id with its speaker prefix removed: ``spkA_test_003`` -> ``test_003``."""
    prefix = speaker_id + "_"
    return utterance_id[len(prefix):] if utterance_id.startswith(prefix) else utterance_id


def _pairs(args, manifest: Path, converted_dir: Path, target: str) -> list[tuple[str, Path, Path]]:
    man = load_manifest(manifest)
    if args.pairs:
        pairs = []
        with _resolve(args, args.pairs).open() as fh:
            for n, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise DataError(f"{args.pairs}:{n}: expected 'converted<TAB>reference'")
                pairs.append((Path(parts[0]).stem, _resolve(args, parts[0]), _resolve(args, parts[1])))
        return pairs
    refs = {content_key(r.utterance_id, r.speaker_id): Path(r.audio_path) for r in man.by_speaker(target)}
    if not refs:
        raise DataError(f"test manifest has no utterances of target speaker {target!r}")
    pairs = []
    for wav in sorted(converted_dir.rglob("*.wav")):
        stem = wav.stem
        spk = next((s for s in man.speakers if stem.startswith(s + "_")), None)
        key = content_key(stem, spk) if spk else stem
        if key in refs:
            pairs.append((stem, wav, refs[key]))
    if not pairs:
        raise DataError(f"no converted file in {converted_dir} matches a {target!r} reference by content key")
    return pairs


def cmd_evaluate(args) -> int:
    from .evalkit import EvalReport, evaluate_pair

    ckpt = load_checkpoint(_resolve(args, args.checkpoint))
    mel = ckpt.mel_config
    pairs = _pairs(args, _resolve(args, args.manifest), _resolve(args, args.converted), args.speaker)
    report = EvalReport()
    for name, conv_path, ref_path in pairs:
        conv, sr = read_wav(conv_path)
        ref, sr_ref = read_wav(ref_path)
        if sr != sr_ref:
            raise DataError(f"sample rates differ for {name}: {sr} vs {sr_ref}")
        result, frames = evaluate_pair(conv, ref, sr, mel, name, args.speaker, str(ref_path))
        report.pairs.append(result)
        report.frames_evaluated += frames
    paths = report.write(_resolve(args, args.out))
    print(json.dumps(report.summary(), sort_keys=True))
    print(f"report -> {paths[0]}")
    return 0


def cmd_plot(args) -> int:
    from .evalkit import EvalReport, plot_report, plot_training_log

    out = _resolve(args, args.out)
    written = []
    if args.log:
        written += plot_training_log(_resolve(args, args.log), out)
    if args.report:
        written += plot_report(EvalReport.load(_resolve(args, args.report)), out)
    if not written:
        raise ConfigError("nothing to plot: pass --log and/or --report")
    for p in written:
        print(p)
    return 0


def cmd_reference(args) -> int:
    text = reference_markdown(build_parser())
    out = _resolve(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(out)
    return 0


# ---------------------------------------------------------------------------
# parser

class _Override(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        items = getattr(namespace, "overrides", None) or []
        items.append((self.dest, values))
        namespace.overrides = items


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run configuration; flags below override it")
    p.add_argument("--seed", type=int, help="shorthand for --train.seed")
    for section, fields in _section_schema().items():
        g = p.add_argument_group(f"{section} settings")
        for key, (tp, default, help_text) in fields.items():
            g.add_argument(f"--{section}.{key}", dest=f"{section}.{key}", action=_Override, metavar="VALUE",
                           help=f"{help_text} (default: {default!r})", default=argparse.SUPPRESS)


def _add_ablation_flags(p: argparse.ArgumentParser, stage: str) -> None:
    g = p.add_argument_group("ablations (combine freely unless noted)")
    for name, (help_text, _) in ABLATIONS.items():
        if stage == "pretrain" and name in ("no_pretrain", "freeze_recognizer"):
            continue
        g.add_argument(f"--{name.replace('_', '-')}", dest=name, action="store_true", help=help_text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="advvc", description="Adversarial recognition-synthesis voice conversion.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--workdir", default=".", help="base directory for every relative path (default: .)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("toy-corpus", help="write the bundled synthetic corpus")
    s.add_argument("out_dir")
    s.add_argument("--speakers", type=int, default=2)
    s.add_argument("--train-utts", type=int, default=20)
    s.add_argument("--test-utts", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--prefix", default="", help="speaker-name prefix, to keep several toy corpora apart")
    s.set_defaults(func=cmd_toy_corpus)

    s = sub.add_parser("prepare", help="extract log-mel features and statistics for a manifest")
    s.add_argument("manifest")
    s.add_argument("out_dir")
    _add_config_flags(s)
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("pretrain", help="multi-speaker pretraining")
    _add_config_flags(s)
    _add_ablation_flags(s, "pretrain")
    s.set_defaults(func=cmd_pretrain)

    s = sub.add_parser("finetune", help="finetune on a source/target speaker pair")
    s.add_argument("--checkpoint", help="pretrained checkpoint (same as --run.checkpoint)")
    _add_config_flags(s)
    _add_ablation_flags(s, "finetune")
    s.set_defaults(func=cmd_finetune)

    s = sub.add_parser("convert", help="convert a wav file or every wav under a directory")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--source", required=True, help="wav file or directory (tree is mirrored)")
    s.add_argument("--speaker", required=True, help="target speaker id")
    s.add_argument("--out", required=True, help="output wav or directory")
    s.add_argument("--iterations", type=int, default=60, help="Griffin-Lim iterations")
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("evaluate", help="MCD and F0 RMSE of converted audio against target references")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--manifest", required=True, help="test manifest holding the target references")
    s.add_argument("--converted", required=True, help="directory of converted wavs")
    s.add_argument("--speaker", required=True, help="target speaker id")
    s.add_argument("--pairs", help="explicit 'converted<TAB>reference' list instead of content-key pairing")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("plot", help="render training curves and/or report histograms")
    s.add_argument("--log", help="train.log.jsonl")
    s.add_argument("--report", help="report.json written by evaluate")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("reference", help="regenerate the flag reference page")
    s.add_argument("--out", default="docs/cli_reference.md")
    s.set_defaults(func=cmd_reference)
    return p


def reference_markdown(parser: argparse.ArgumentParser) -> str:
    lines = ["# advvc command reference", "", "Generated by `advvc reference`.", ""]
    lines += ["## Ablation variants", "", "| variant | flags |", "|---|---|"]
    variants = [
        ("full model", "`pretrain`, then `finetune --checkpoint P`"),
        ("-adv", "`--no-adv` on both stages"),
        ("-phone", "`--no-phone` on both stages"),
        ("-pretrain", "`finetune --no-pretrain` (no checkpoint)"),
        ("-joint", "`--separate` on both stages"),
        ("-tunerec", "`finetune --checkpoint P --freeze-recognizer`"),
        ("-all", "`--baseline-all` on both stages (finetune also freezes the recognizer)"),
    ]
    lines += [f"| {a} | {b} |" for a, b in variants] + [""]
    lines += ["## Global options", "", "```text", parser.format_help().rstrip(), "```", ""]
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in sub.choices.items():
        lines += [f"## `advvc {name}`", "", sp.description or sub._choices_actions[list(sub.choices).index(name)].help
                  or "", "", "```text", sp.format_help().rstrip(), "```", ""]
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    torch.set_num_threads(1)
    try:
        return args.func(args)
    except AdvVCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
