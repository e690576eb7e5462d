"""Conditional denoising-diffusion surrogate.

The forward chain corrupts a heatmap with Gaussian noise under a linear
variance schedule; the denoiser is a U-Net that sees the noisy heatmap
concatenated with the layout encoding (image-prompt conditioning) plus
a sinusoidal step embedding, and predicts the injected noise. Training
minimizes the plain noise-prediction MSE; sampling runs the ancestral
reverse chain with fixed per-step variance beta_t.

Heatmaps are mapped [0, 255] -> [-1, 1] for the model and back for
output. Condition planes stay in [0, 1].
"""

from __future__ import annotations

import copy
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ConfigError, ContractError, StepError, TrainingDivergedError
from .metrics import ssim as ssim_metric
from .networks import UNet
from .oracle import Heatmap

BETA_START = 1e-6
BETA_END = 0.01
LR_GRID = (0.0002, 0.0003, 0.0005, 0.001)


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step variances and their running products (1-based steps)."""

    betas: np.ndarray  # float64, betas[0] is step t=1

    def __post_init__(self):
        betas = self.betas
        if betas.ndim != 1 or len(betas) < 2:
            raise ConfigError("schedule needs at least 2 steps")
        if (betas <= 0).any() or (betas >= 1).any():
            raise ConfigError("betas must lie in (0, 1)")

    @property
    def T(self) -> int:
        return len(self.betas)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def beta(self, t: int) -> float:
        """1-based accessor: beta(1) is the first step."""
        if not 1 <= t <= self.T:
            raise StepError(f"step {t} outside [1, {self.T}]")
        return float(self.betas[t - 1])

    def alpha_bar(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise StepError(f"step {t} outside [1, {self.T}]")
        return float(self.alpha_bars[t - 1])


def make_schedule(T: int = 1000) -> NoiseSchedule:
    """Linear schedule with exact endpoints beta_1 = 1e-6, beta_T = 0.01."""
    if T < 2:
        raise ConfigError(f"T must be at least 2, got {T}")
    return NoiseSchedule(np.linspace(BETA_START, BETA_END, T, dtype=np.float64))


def make_rescaled_schedule(T: int, reference_T: int = 1000) -> NoiseSchedule:
    """Shorter linear schedule preserving the total variance budget.

    The endpoint is raised so sum(beta) matches the reference schedule,
    keeping the terminal signal-to-noise near zero at any T.
    """
    if T < 2:
        raise ConfigError(f"T must be at least 2, got {T}")
    target_sum = reference_T * (BETA_START + BETA_END) / 2.0
    beta_end = 2.0 * target_sum / T - BETA_START
    if not 0 < beta_end < 1:
        raise ConfigError(f"T={T} is too short to preserve the variance budget")
    return NoiseSchedule(np.linspace(BETA_START, beta_end, T, dtype=np.float64))


@dataclass(frozen=True)
class DenoiserConfig:
    image_size: int = 64
    representation: str = "feature"  # or "rgb"
    condition_channels: int = 3
    target_channels: int = 1
    base_width: int = 32
    depth: int = 4
    time_embedding_dim: int = 64
    attention_enabled: bool = False

    @property
    def attention_resolution(self) -> int:
        return self.image_size // 8

    def validate(self) -> None:
        if self.representation not in ("feature", "rgb"):
            raise ConfigError(f"unknown representation {self.representation!r}")
        if self.condition_channels != 3 or self.target_channels != 1:
            raise ConfigError("conditioning is 3 planes onto 1 target plane")
        if self.time_embedding_dim < 2:
            raise ConfigError("time embedding too small")

    def build_network(self) -> UNet:
        self.validate()
        return UNet(
            in_channels=self.target_channels + self.condition_channels,
            out_channels=self.target_channels,
            base_width=self.base_width,
            depth=self.depth,
            image_size=self.image_size,
            time_embedding_dim=self.time_embedding_dim,
            attention_enabled=self.attention_enabled,
        )


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.0003
    epochs: int = 200
    batch_size: int = 16
    validation_interval_epochs: int = 100
    val_items: int = 6  # validation sampling is capped to this many items
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate not in LR_GRID:
            raise ConfigError(
                f"learning_rate must be one of {LR_GRID}, got {self.learning_rate}"
            )
        if self.validation_interval_epochs < 1:
            raise ConfigError("validation interval must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")


def _steps_as_tensor(t, T: int, device=None) -> torch.Tensor:
    t = torch.as_tensor(t, dtype=torch.long, device=device)
    if t.ndim == 0:
        t = t[None]
    if ((t < 1) | (t > T)).any():
        raise StepError(f"step outside [1, {T}]")
    return t


def forward_sample(
    x0: torch.Tensor, t, eps: torch.Tensor, schedule: NoiseSchedule
) -> torch.Tensor:
    """Closed-form noisy image: sqrt(a_bar_t) x0 + sqrt(1 - a_bar_t) eps."""
    if x0.shape != eps.shape:
        raise ContractError(f"x0 {tuple(x0.shape)} vs eps {tuple(eps.shape)}")
    t = _steps_as_tensor(t, schedule.T, device=x0.device)
    a_bar = torch.from_numpy(schedule.alpha_bars).to(x0.device)[t - 1]
    # keep the 1 - a_bar subtraction in float64: a_bar sits next to 1 early on
    scale_x0 = torch.sqrt(a_bar).to(x0.dtype)
    scale_eps = torch.sqrt(1.0 - a_bar).to(x0.dtype)
    while scale_x0.ndim < x0.ndim:
        scale_x0 = scale_x0[..., None]
        scale_eps = scale_eps[..., None]
    return scale_x0 * x0 + scale_eps * eps


def training_loss(
    model,
    condition: torch.Tensor,
    x0: torch.Tensor,
    schedule: NoiseSchedule,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Noise-prediction MSE at uniformly drawn steps.

    ``model(x_t, t, condition)`` must return a tensor shaped like x0.
    """
    if condition.shape[0] != x0.shape[0] or condition.shape[-2:] != x0.shape[-2:]:
        raise ContractError(
            f"condition {tuple(condition.shape)} does not match x0 {tuple(x0.shape)}"
        )
    batch = x0.shape[0]
    t = torch.randint(1, schedule.T + 1, (batch,), generator=generator)
    eps = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
    x_t = forward_sample(x0, t, eps, schedule)
    eps_hat = model(x_t, t, condition)
    if eps_hat.shape != eps.shape:
        raise ContractError(
            f"denoiser returned {tuple(eps_hat.shape)}, wanted {tuple(eps.shape)}"
        )
    return torch.mean((eps_hat - eps) ** 2)


class ConditionalDenoiser(torch.nn.Module):
    """U-Net wrapper implementing the image-prompt concatenation."""

    def __init__(self, config: DenoiserConfig):
        super().__init__()
        self.config = config
        self.net = config.build_network()

    def forward(self, x_t, t, condition):
        if condition.shape[-2:] != x_t.shape[-2:]:
            raise ContractError(
                f"condition size {tuple(condition.shape[-2:])} "
                f"!= x_t size {tuple(x_t.shape[-2:])}"
            )
        return self.net(torch.cat([x_t, condition], dim=1), t)


def heatmap_to_unit(pixels: np.ndarray) -> np.ndarray:
    """uint8 [0, 255] -> float32 [-1, 1]."""
    return (pixels.astype(np.float32) / 255.0) * 2.0 - 1.0


def unit_to_heatmap(values: np.ndarray) -> np.ndarray:
    """float [-1, 1] -> uint8, round half up."""
    clipped = np.clip(values, -1.0, 1.0)
    return np.floor((clipped + 1.0) / 2.0 * 255.0 + 0.5).astype(np.uint8)


@torch.no_grad()
def sample_tensor(
    model,
    schedule: NoiseSchedule,
    condition: torch.Tensor,
    seed: int = 0,
) -> torch.Tensor:
    """Ancestral reverse chain from pure noise; returns x0 in [-1, 1]."""
    model.eval()
    batch = condition.shape[0]
    size = condition.shape[-2:]
    generator = torch.Generator().manual_seed(seed)
    x = torch.randn((batch, 1, *size), generator=generator)
    betas = schedule.betas
    alphas = schedule.alphas
    a_bars = schedule.alpha_bars
    for t in range(schedule.T, 0, -1):
        t_tensor = torch.full((batch,), t, dtype=torch.long)
        eps_hat = model(x, t_tensor, condition)
        coef = betas[t - 1] / math.sqrt(1.0 - a_bars[t - 1])
        x = (x - coef * eps_hat) / math.sqrt(alphas[t - 1])
        if t > 1:
            z = torch.randn(x.shape, generator=generator)
            x = x + math.sqrt(betas[t - 1]) * z
    return torch.clamp(x, -1.0, 1.0)


def sample(
    model,
    schedule: NoiseSchedule,
    condition: np.ndarray,
    seed: int = 0,
) -> Heatmap:
    """Generate one heatmap for a (3, H, W) condition array."""
    if condition.ndim != 3 or condition.shape[0] != 3:
        raise ContractError(f"condition must be (3, H, W), got {condition.shape}")
    tensor = torch.from_numpy(np.ascontiguousarray(condition, dtype=np.float32))[None]
    x0 = sample_tensor(model, schedule, tensor, seed=seed)
    pixels = unit_to_heatmap(x0[0, 0].numpy())
    return Heatmap(pixels=pixels, provenance="surrogate")


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainResult:
    state_dict: dict
    config: DenoiserConfig
    schedule: NoiseSchedule
    training: TrainingConfig
    loss_curve: list = field(default_factory=list)
    val_history: list = field(default_factory=list)  # (epoch, mean ssim)
    best_epoch: int = -1
    best_val_ssim: float = float("nan")
    val_entry_ids: list = field(default_factory=list)
    sampler_seed: int = 0
    manifest_hash: str = ""
    wall_clock_s: float = 0.0


def load_training_arrays(manifest, split: str, representation: str, image_size: int):
    """Stack a split's conditions and unit-scaled heatmaps into tensors."""
    from .container import read_tensor
    from .oracle import load_heatmap_png

    entries = manifest.split_entries(split)
    conditions, targets, ids = [], [], []
    for entry in entries:
        if representation == "feature":
            cond = read_tensor(manifest.resolve(entry.feature_path))
        else:
            import cv2

            bgr = cv2.imread(str(manifest.resolve(entry.rgb_path)))
            cond = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB).transpose(2, 0, 1) / 255.0
        heat = load_heatmap_png(manifest.resolve(entry.heatmap_path))
        if cond.shape[-1] != image_size or heat.shape[-1] != image_size:
            raise ContractError(
                f"{entry.entry_id}: dataset images are {heat.shape}, "
                f"model wants {image_size}"
            )
        conditions.append(np.asarray(cond, dtype=np.float32))
        targets.append(heatmap_to_unit(heat)[None])
        ids.append(entry.entry_id)
    if not entries:
        raise ConfigError(f"split {split!r} is empty")
    return (
        torch.from_numpy(np.stack(conditions)),
        torch.from_numpy(np.stack(targets)),
        ids,
    )


def _validation_ssim(model, schedule, conditions, targets, ids, cap, seed):
    """Mean global SSIM over up to ``cap`` sampled validation items."""
    take = min(cap, len(ids))
    scores = []
    for i in range(take):
        x0 = sample_tensor(model, schedule, conditions[i : i + 1], seed=seed + i)
        pred = unit_to_heatmap(x0[0, 0].numpy())
        truth = unit_to_heatmap(targets[i, 0].numpy())
        scores.append(ssim_metric(pred, truth))
    return float(np.mean(scores)), ids[:take]


def train(
    manifest,
    dcfg: DenoiserConfig,
    tcfg: TrainingConfig,
    schedule: NoiseSchedule | None = None,
    log=None,
) -> TrainResult:
    """Fit the conditional denoiser on a dataset manifest.

    Validation runs every ``validation_interval_epochs`` (and at the
    final epoch) by fully sampling up to ``val_items`` validation
    entries; the parameters with the best validation SSIM are returned.
    """
    dcfg.validate()
    tcfg.validate()
    schedule = schedule or make_schedule()
    t_start = _time.perf_counter()

    cond_train, x0_train, _ = load_training_arrays(
        manifest, "train", dcfg.representation, dcfg.image_size
    )
    cond_val, x0_val, val_ids = load_training_arrays(
        manifest, "val", dcfg.representation, dcfg.image_size
    )

    torch.manual_seed(tcfg.seed)
    model = ConditionalDenoiser(dcfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=tcfg.learning_rate)
    generator = torch.Generator().manual_seed(tcfg.seed)

    n = x0_train.shape[0]
    result = TrainResult(
        state_dict={},
        config=dcfg,
        schedule=schedule,
        training=tcfg,
        sampler_seed=tcfg.seed + 101,
        manifest_hash=manifest.manifest_hash(),
    )
    best_state = None

    for epoch in range(1, tcfg.epochs + 1):
        model.train()
        order = torch.randperm(n, generator=generator)
        epoch_losses = []
        for start in range(0, n, tcfg.batch_size):
            idx = order[start : start + tcfg.batch_size]
            loss = training_loss(
                model, cond_train[idx], x0_train[idx], schedule, generator=generator
            )
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became {loss.item()} at epoch {epoch} "
                    f"(lr={tcfg.learning_rate}, batch={tcfg.batch_size})"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        result.loss_curve.append(float(np.mean(epoch_losses)))

        if epoch % tcfg.validation_interval_epochs == 0 or epoch == tcfg.epochs:
            score, used_ids = _validation_ssim(
                model,
                schedule,
                cond_val,
                x0_val,
                val_ids,
                tcfg.val_items,
                result.sampler_seed,
            )
            result.val_history.append((epoch, score))
            result.val_entry_ids = used_ids
            if math.isnan(result.best_val_ssim) or score > result.best_val_ssim:
                result.best_val_ssim = score
                result.best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())
            if log:
                log(
                    f"epoch {epoch}/{tcfg.epochs} loss={result.loss_curve[-1]:.4f} "
                    f"val_ssim={score:.4f} best={result.best_val_ssim:.4f}"
                )
        elif log and epoch % 10 == 0:
            log(f"epoch {epoch}/{tcfg.epochs} loss={result.loss_curve[-1]:.4f}")

    result.state_dict = best_state if best_state is not None else model.state_dict()
    result.wall_clock_s = _time.perf_counter() - t_start
    return result


def revalidate(result_or_checkpoint, manifest) -> float:
    """Recompute the stored validation score; must reproduce it exactly."""
    model = ConditionalDenoiser(result_or_checkpoint.config)
    model.load_state_dict(result_or_checkpoint.state_dict)
    cond_val, x0_val, val_ids = load_training_arrays(
        manifest,
        "val",
        result_or_checkpoint.config.representation,
        result_or_checkpoint.config.image_size,
    )
    cap = len(result_or_checkpoint.val_entry_ids)
    score, _ = _validation_ssim(
        model,
        result_or_checkpoint.schedule,
        cond_val,
        x0_val,
        val_ids,
        cap,
        result_or_checkpoint.sampler_seed,
    )
    return score
