"""Direct-regression U-Net baseline: layout encoding in, heatmap out.

Shares the diffusion denoiser's backbone minus the temporal pathway.
Trained with L1 on unit-scaled heatmaps; the best-on-validation
parameters (mean global SSIM, like the diffusion trainer) are kept.
"""

from __future__ import annotations

import copy
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np
import torch

from .diffusion import (
    LR_GRID,
    TrainingConfig,
    heatmap_to_unit,
    load_training_arrays,
    unit_to_heatmap,
)
from .errors import ConfigError, ContractError, TrainingDivergedError
from .metrics import ssim as ssim_metric
from .networks import UNet
from .oracle import Heatmap


@dataclass(frozen=True)
class RegressorConfig:
    image_size: int = 64
    representation: str = "feature"
    condition_channels: int = 3
    target_channels: int = 1
    base_width: int = 32
    depth: int = 4
    attention_enabled: bool = False

    def validate(self) -> None:
        if self.representation not in ("feature", "rgb"):
            raise ConfigError(f"unknown representation {self.representation!r}")
        if self.condition_channels != 3 or self.target_channels != 1:
            raise ConfigError("baseline maps 3 input planes to 1 output plane")

    def build_network(self) -> UNet:
        self.validate()
        return UNet(
            in_channels=self.condition_channels,
            out_channels=self.target_channels,
            base_width=self.base_width,
            depth=self.depth,
            image_size=self.image_size,
            time_embedding_dim=None,
            attention_enabled=self.attention_enabled,
        )


BASELINE_VALIDATION_INTERVAL = 50


@dataclass
class BaselineResult:
    state_dict: dict
    config: RegressorConfig
    training: TrainingConfig
    loss_curve: list = field(default_factory=list)
    val_history: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_ssim: float = float("nan")
    manifest_hash: str = ""
    wall_clock_s: float = 0.0


def _predict_batch(model, conditions: torch.Tensor) -> torch.Tensor:
    model.eval()
    with torch.no_grad():
        return torch.clamp(model(conditions), -1.0, 1.0)


def _val_ssim(model, cond_val, x0_val) -> float:
    preds = _predict_batch(model, cond_val)
    scores = [
        ssim_metric(
            unit_to_heatmap(preds[i, 0].numpy()), unit_to_heatmap(x0_val[i, 0].numpy())
        )
        for i in range(cond_val.shape[0])
    ]
    return float(np.mean(scores))


def train_baseline(
    manifest,
    cfg: RegressorConfig,
    tcfg: TrainingConfig | None = None,
    log=None,
) -> BaselineResult:
    """Supervised L1 fit; validation every 50 epochs plus the final one."""
    cfg.validate()
    tcfg = tcfg or TrainingConfig(validation_interval_epochs=BASELINE_VALIDATION_INTERVAL)
    tcfg.validate()
    t_start = _time.perf_counter()

    cond_train, x0_train, _ = load_training_arrays(
        manifest, "train", cfg.representation, cfg.image_size
    )
    cond_val, x0_val, _ = load_training_arrays(
        manifest, "val", cfg.representation, cfg.image_size
    )

    torch.manual_seed(tcfg.seed)
    model = cfg.build_network()
    optimizer = torch.optim.Adam(model.parameters(), lr=tcfg.learning_rate)
    generator = torch.Generator().manual_seed(tcfg.seed)

    result = BaselineResult(
        state_dict={},
        config=cfg,
        training=tcfg,
        manifest_hash=manifest.manifest_hash(),
    )
    best_state = None
    n = x0_train.shape[0]
    for epoch in range(1, tcfg.epochs + 1):
        model.train()
        order = torch.randperm(n, generator=generator)
        losses = []
        for start in range(0, n, tcfg.batch_size):
            idx = order[start : start + tcfg.batch_size]
            pred = model(cond_train[idx])
            loss = torch.mean(torch.abs(pred - x0_train[idx]))
            if not torch.isfinite(loss):
                raise TrainingDivergedError(f"baseline loss diverged at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        result.loss_curve.append(float(np.mean(losses)))

        if epoch % tcfg.validation_interval_epochs == 0 or epoch == tcfg.epochs:
            score = _val_ssim(model, cond_val, x0_val)
            result.val_history.append((epoch, score))
            if math.isnan(result.best_val_ssim) or score > result.best_val_ssim:
                result.best_val_ssim = score
                result.best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())
            if log:
                log(
                    f"epoch {epoch}/{tcfg.epochs} l1={result.loss_curve[-1]:.4f} "
                    f"val_ssim={score:.4f}"
                )

    result.state_dict = best_state if best_state is not None else model.state_dict()
    result.wall_clock_s = _time.perf_counter() - t_start
    return result


def predict_baseline(model, condition: np.ndarray) -> Heatmap:
    """Single forward pass for a (3, H, W) condition array."""
    if condition.ndim != 3 or condition.shape[0] != 3:
        raise ContractError(f"condition must be (3, H, W), got {condition.shape}")
    tensor = torch.from_numpy(np.ascontiguousarray(condition, dtype=np.float32))[None]
    pred = _predict_batch(model, tensor)
    return Heatmap(pixels=unit_to_heatmap(pred[0, 0].numpy()), provenance="surrogate")
