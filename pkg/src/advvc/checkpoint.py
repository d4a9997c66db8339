"""Self-describing checkpoint container.

Layout::

    MAGIC | u64 header length | JSON header | raw array bytes | FOOTER_MAGIC | u64 payload length | sha256(payload)

The payload is everything before the footer. The header lists every array with dtype,
shape and byte offset, plus the architecture fingerprint, feature statistics and
inventories. Serialization is deterministic, so equal checkpoints give equal bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .corpusio import FeatureStats, MelConfig
from .errors import FingerprintMismatchError, IntegrityError, MissingCheckpointError
from .netdefs import NetConfig, VCModel

MAGIC = b"ADVVC-CKPT\x00\x01"
FOOTER_MAGIC = b"ADVVCEND"
_FOOTER_LEN = len(FOOTER_MAGIC) + 8 + 32


@dataclass
class ModelCheckpoint:
    net_config: NetConfig
    arrays: dict[str, np.ndarray]                       # model state (parameters and buffers)
    speakers: list[str]                                 # name of every speaker-embedding row
    stage_speakers: list[str]                           # classifier / discriminator inventory
    stage_rows: list[int]                               # embedding row of each stage speaker
    phonemes: list[str]
    stats: FeatureStats | None = None
    mel_config: MelConfig = field(default_factory=MelConfig)
    stage: str = "pretrain"
    step: int = 0
    train_config: dict = field(default_factory=dict)
    optimizer_arrays: dict[str, np.ndarray] = field(default_factory=dict)
    optimizer_meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return self.net_config.fingerprint()

    @property
    def finetuned(self) -> bool:
        return self.stage == "finetune"

    def build_model(self) -> VCModel:
        n_disc = len({k.split(".")[1] for k in self.arrays if k.startswith("discriminators.")})
        model = VCModel(self.net_config, with_discriminators=n_disc)
        state = {k: torch.from_numpy(np.array(v)) for k, v in self.arrays.items()}
        model.load_state_dict(state, strict=True)
        return model

    def row_of(self, speaker: str) -> int:
        if speaker not in self.stage_speakers:
            raise KeyError(f"speaker {speaker!r} not in checkpoint inventory {self.stage_speakers}")
        return self.stage_rows[self.stage_speakers.index(speaker)]


def model_state_arrays(model: torch.nn.Module) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()}


def flatten_optimizer(name: str, optimizer: torch.optim.Optimizer) -> tuple[dict[str, np.ndarray], dict]:
    sd = optimizer.state_dict()
    arrays = {}
    scalars = {}
    for idx, state in sd["state"].items():
        for key, val in state.items():
            if torch.is_tensor(val):
                arrays[f"{name}/{idx}/{key}"] = val.detach().cpu().numpy().copy()
            else:
                scalars[f"{idx}/{key}"] = val
    return arrays, {"param_groups": sd["param_groups"], "scalars": scalars}


def restore_optimizer(name: str, optimizer: torch.optim.Optimizer, arrays: dict[str, np.ndarray], meta: dict) -> None:
    state: dict[int, dict] = {}
    prefix = name + "/"
    for key, arr in arrays.items():
        if not key.startswith(prefix):
            continue
        idx, field_name = key[len(prefix):].split("/", 1)
        state.setdefault(int(idx), {})[field_name] = torch.from_numpy(np.array(arr))
    for key, val in meta.get("scalars", {}).items():
        idx, field_name = key.split("/", 1)
        state.setdefault(int(idx), {})[field_name] = val
    optimizer.load_state_dict({"state": state, "param_groups": meta["param_groups"]})


def _dtype_name(arr: np.ndarray) -> str:
    return np.dtype(arr.dtype).str


def save_checkpoint(ckpt: ModelCheckpoint, path) -> None:
    """Write ``ckpt`` atomically (temp file then rename)."""
    from dataclasses import asdict

    named = [("model/" + k, v) for k, v in sorted(ckpt.arrays.items())]
    named += [("optim/" + k, v) for k, v in sorted(ckpt.optimizer_arrays.items())]
    index = []
    offset = 0
    blobs = []
    for name, arr in named:
        arr = np.ascontiguousarray(arr)
        data = arr.tobytes()
        index.append({"name": name, "dtype": _dtype_name(arr), "shape": list(arr.shape), "offset": offset,
                      "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = {
        "format": 1,
        "fingerprint": ckpt.fingerprint,
        "net_config": asdict(ckpt.net_config),
        "mel_config": asdict(ckpt.mel_config),
        "mel_fingerprint": ckpt.mel_config.fingerprint(),
        "stats": ckpt.stats.to_json() if ckpt.stats is not None else None,
        "speakers": ckpt.speakers,
        "stage_speakers": ckpt.stage_speakers,
        "stage_rows": ckpt.stage_rows,
        "phonemes": ckpt.phonemes,
        "stage": ckpt.stage,
        "step": ckpt.step,
        "train_config": ckpt.train_config,
        "optimizer_meta": ckpt.optimizer_meta,
        "extra": ckpt.extra,
        "arrays": index,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    payload = MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + b"".join(blobs)
    footer = FOOTER_MAGIC + struct.pack("<Q", len(payload)) + hashlib.sha256(payload).digest()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(payload + footer)
    tmp.replace(path)


def load_checkpoint(path, expected_fingerprint: str | None = None) -> ModelCheckpoint:
    path = Path(path)
    if not path.is_file():
        raise MissingCheckpointError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8 + _FOOTER_LEN or not raw.startswith(MAGIC):
        raise IntegrityError(f"{path}: not a checkpoint or truncated")
    footer = raw[-_FOOTER_LEN:]
    payload = raw[:-_FOOTER_LEN]
    if footer[:len(FOOTER_MAGIC)] != FOOTER_MAGIC:
        raise IntegrityError(f"{path}: missing footer (truncated or corrupt)")
    (length,) = struct.unpack("<Q", footer[len(FOOTER_MAGIC):len(FOOTER_MAGIC) + 8])
    if length != len(payload):
        raise IntegrityError(f"{path}: length mismatch ({length} recorded, {len(payload)} present)")
    if hashlib.sha256(payload).digest() != footer[-32:]:
        raise IntegrityError(f"{path}: hash mismatch")
    (hlen,) = struct.unpack("<Q", payload[len(MAGIC):len(MAGIC) + 8])
    start = len(MAGIC) + 8
    header = json.loads(payload[start:start + hlen])
    data = memoryview(payload)[start + hlen:]

    net_config = NetConfig(**header["net_config"])
    if net_config.fingerprint() != header["fingerprint"]:
        raise IntegrityError(f"{path}: stored fingerprint does not match its architecture record")
    if expected_fingerprint is not None and expected_fingerprint != header["fingerprint"]:
        raise FingerprintMismatchError(expected_fingerprint, header["fingerprint"])

    model_arrays, optim_arrays = {}, {}
    for entry in header["arrays"]:
        buf = data[entry["offset"]:entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(buf, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"]).copy()
        kind, name = entry["name"].split("/", 1)
        (model_arrays if kind == "model" else optim_arrays)[name] = arr
    stats = FeatureStats.from_json(header["stats"]) if header["stats"] is not None else None
    mel_config = MelConfig(**header["mel_config"])
    return ModelCheckpoint(
        net_config=net_config,
        arrays=model_arrays,
        speakers=header["speakers"],
        stage_speakers=header["stage_speakers"],
        stage_rows=header["stage_rows"],
        phonemes=header["phonemes"],
        stats=stats,
        mel_config=mel_config,
        stage=header["stage"],
        step=header["step"],
        train_config=header["train_config"],
        optimizer_arrays=optim_arrays,
        optimizer_meta=header["optimizer_meta"],
        extra=header["extra"],
    )
