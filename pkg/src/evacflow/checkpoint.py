"""Versioned checkpoint container shared by the diffusion model and the
U-Net baseline.

A checkpoint stores the parameters together with the network config and
(for diffusion) the exact noise schedule used in training, since
sampling must replay that schedule. Extra metadata keys are tolerated
on load so minor-version additions stay backward compatible.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .baselines import RegressorConfig, predict_baseline
from .diffusion import (
    ConditionalDenoiser,
    DenoiserConfig,
    NoiseSchedule,
    TrainResult,
    sample,
)
from .errors import ConfigError
from .oracle import Heatmap

CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    kind: str  # "diffusion" | "unet"
    run_id: str
    state_dict: dict
    config: DenoiserConfig | RegressorConfig
    schedule: NoiseSchedule | None
    metadata: dict

    @property
    def image_size(self) -> int:
        return self.config.image_size

    @property
    def representation(self) -> str:
        return self.config.representation

    def build_model(self, cached: bool = True):
        if cached and getattr(self, "_model", None) is not None:
            return self._model
        if self.kind == "diffusion":
            model = ConditionalDenoiser(self.config)
        else:
            model = self.config.build_network()
        model.load_state_dict(self.state_dict)
        model.eval()
        if cached:
            self._model = model
        return model

    def predict(self, condition: np.ndarray, seed: int = 0) -> Heatmap:
        model = self.build_model()
        if self.kind == "diffusion":
            return sample(model, self.schedule, condition, seed=seed)
        return predict_baseline(model, condition)


def condition_for_layout(layout, checkpoint: Checkpoint) -> np.ndarray:
    """Encode a layout in the checkpoint's own conditioning representation."""
    from .layout import encode_features, rasterize_rgb

    size = checkpoint.image_size
    if checkpoint.representation == "feature":
        return encode_features(layout, size, size).data
    rgb = rasterize_rgb(layout, size, size)
    return (rgb.transpose(2, 0, 1) / 255.0).astype(np.float32)


def load_condition(manifest, entry, representation: str) -> np.ndarray:
    """(3, H, W) float32 condition array for a manifest entry."""
    if representation == "feature":
        from .container import read_tensor

        return read_tensor(manifest.resolve(entry.feature_path))
    import cv2

    bgr = cv2.imread(str(manifest.resolve(entry.rgb_path)))
    rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
    return (rgb.transpose(2, 0, 1) / 255.0).astype(np.float32)


def manifest_predictor(checkpoint: Checkpoint, manifest, seed: int = 0):
    """Adapt a checkpoint into an ``evaluate``-compatible predictor.

    The model is built once; each call encodes the entry's condition in
    the checkpoint's own representation.
    """
    model = checkpoint.build_model()

    def predictor(entry) -> np.ndarray:
        condition = load_condition(manifest, entry, checkpoint.representation)
        if checkpoint.kind == "diffusion":
            from .diffusion import sample

            return sample(model, checkpoint.schedule, condition, seed=seed).pixels
        return predict_baseline(model, condition).pixels

    return predictor


def save_checkpoint(path, result, kind: str, run_id: str) -> None:
    """Persist a TrainResult or BaselineResult."""
    if kind not in ("diffusion", "unet"):
        raise ConfigError(f"unknown checkpoint kind {kind!r}")
    metadata = {
        "loss_curve": list(result.loss_curve),
        "val_history": [list(v) for v in result.val_history],
        "best_epoch": result.best_epoch,
        "best_val_ssim": result.best_val_ssim,
        "manifest_hash": result.manifest_hash,
        "training": asdict(result.training),
        "wall_clock_s": result.wall_clock_s,
    }
    if isinstance(result, TrainResult):
        metadata["sampler_seed"] = result.sampler_seed
        metadata["val_entry_ids"] = list(result.val_entry_ids)
    payload = {
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "run_id": run_id,
        "state_dict": result.state_dict,
        "config": asdict(result.config),
        "schedule_betas": (
            result.schedule.betas.tolist() if isinstance(result, TrainResult) else None
        ),
        "metadata": metadata,
    }
    torch.save(payload, path)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ConfigError(f"unreadable checkpoint {path.name}: {exc}") from exc
    if not isinstance(payload, dict) or "version" not in payload:
        raise ConfigError(f"{path.name}: not a checkpoint file")
    version = payload["version"]
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"{path.name}: unsupported checkpoint version {version!r}")
    kind = payload["kind"]
    try:
        if kind == "diffusion":
            config = DenoiserConfig(**payload["config"])
            schedule = NoiseSchedule(
                np.asarray(payload["schedule_betas"], dtype=np.float64)
            )
        elif kind == "unet":
            config = RegressorConfig(**payload["config"])
            schedule = None
        else:
            raise ConfigError(f"{path.name}: unknown kind {kind!r}")
    except TypeError as exc:
        raise ConfigError(f"{path.name}: malformed config: {exc}") from exc
    return Checkpoint(
        kind=kind,
        run_id=payload.get("run_id", path.stem),
        state_dict=payload["state_dict"],
        config=config,
        schedule=schedule,
        metadata=payload.get("metadata", {}),
    )
