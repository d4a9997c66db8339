"""Inference path: source mel -> H -> synthesizer with the target speaker -> mel -> waveform."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoint import ModelCheckpoint
from .corpusio import (MelConfig, MelSpectrogram, denormalize, extract_mel, istft, mel_filterbank, normalize,
                       padded_length, read_wav, stft, write_wav)
from .errors import DataError, FingerprintMismatchError
from .netdefs import VCModel


@dataclass
class ConversionRequest:
    source: str | Path | MelSpectrogram
    target_speaker: str
    output_path: str | Path | None = None
    griffin_lim_iterations: int = 60


class Converter:
    """Holds a checkpoint's model in eval mode; conversions never modify it."""

    def __init__(self, ckpt: ModelCheckpoint, model: VCModel | None = None):
        if not ckpt.finetuned:
            warnings.warn("checkpoint has not been finetuned; conversion is for diagnostics only", RuntimeWarning,
                          stacklevel=2)
        if ckpt.stats is None:
            raise DataError("checkpoint carries no feature statistics")
        self.ckpt = ckpt
        self.model = (model if model is not None else ckpt.build_model()).eval()

    def _source_mel(self, source) -> MelSpectrogram:
        if isinstance(source, MelSpectrogram):
            return source
        samples, sr = read_wav(source)
        return extract_mel(samples, sr, self.ckpt.mel_config, utterance_id=Path(source).stem)

    @torch.no_grad()
    def convert_mel(self, mel: MelSpectrogram, target_speaker: str) -> MelSpectrogram:
        """Log-mel in, log-mel out; the output has exactly the source's frame count."""
        row = self.ckpt.row_of(target_speaker)
        n = mel.num_frames
        feats = normalize(mel.frames, self.ckpt.stats).astype(np.float32)
        n_pad = padded_length([n])
        x = torch.zeros(1, n_pad, feats.shape[1])
        x[0, :n] = torch.from_numpy(feats)
        lengths = torch.tensor([n])
        rec = self.model.recognize(x, lengths)
        out = self.model.synthesize(rec, lengths, torch.tensor([row])).after[0, :n].numpy().astype(np.float64)
        return MelSpectrogram(denormalize(out, self.ckpt.stats), mel.hop, mel.utterance_id)

    def convert(self, request: ConversionRequest) -> MelSpectrogram:
        mel = self.convert_mel(self._source_mel(request.source), request.target_speaker)
        if request.output_path is not None:
            wav = mel_to_waveform(mel, self.ckpt.mel_config, request.griffin_lim_iterations)
            write_wav(request.output_path, wav, self.ckpt.mel_config.sample_rate)
        return mel


def convert(request: ConversionRequest, ckpt: ModelCheckpoint) -> MelSpectrogram:
    return Converter(ckpt).convert(request)


def mel_to_waveform(mel: MelSpectrogram | np.ndarray, config: MelConfig, iterations: int = 60,
                    expected_fingerprint: str | None = None, seed: int = 0) -> np.ndarray:
    """Griffin-Lim reconstruction from a log-mel spectrogram.

    The magnitude spectrum is recovered with the filterbank pseudo-inverse. With zero
    iterations the result is the inverse STFT of that magnitude with zero phase.
    Output length is ``n_frames * hop_length`` samples.
    """
    if expected_fingerprint is not None and expected_fingerprint != config.fingerprint():
        raise FingerprintMismatchError(expected_fingerprint, config.fingerprint(), what="feature extraction")
    frames = mel.frames if isinstance(mel, MelSpectrogram) else np.asarray(mel)
    if frames.shape[1] != config.n_mels:
        raise DataError(f"mel has {frames.shape[1]} channels, config expects {config.n_mels}")
    power = np.exp(frames)
    fb = mel_filterbank(config)
    magnitude = np.sqrt(np.maximum(power @ np.linalg.pinv(fb).T, 0.0))
    if iterations <= 0:
        return istft(magnitude.astype(np.complex128), config)
    rng = np.random.default_rng(seed)
    angles = np.exp(2j * np.pi * rng.random(magnitude.shape))
    signal = istft(magnitude * angles, config)
    for _ in range(iterations):
        rebuilt = stft(signal, config)
        angles = np.exp(1j * np.angle(rebuilt))
        signal = istft(magnitude * angles, config)
    return signal
