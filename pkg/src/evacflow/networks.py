"""U-Net backbone with optional temporal encoding and self-attention.

The same encoder/decoder is used by the diffusion denoiser (with a
sinusoidal time embedding injected into every residual block) and by
the direct-regression baseline (time pathway absent). Attention, when
requested, is placed only at the level whose spatial size equals
``image_size // 8``; its inner width is ``channels // 8``.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .errors import ConfigError


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard sin/cos positional encoding of integer steps, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0)
        * torch.arange(half, dtype=torch.float64, device=t.device)
        / max(half - 1, 1)
    )
    args = t.double()[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[:, :1])], dim=1)
    return emb


class SelfAttention2d(nn.Module):
    """Single-head spatial self-attention with residual output.

    Keys/queries/values are 1x1 convolutions to ``channels // 8``; the
    attention weights for output position j are a softmax over input
    positions i of f(x_i)^T g(x_j).
    """

    def __init__(self, channels: int):
        super().__init__()
        if channels % 8:
            raise ConfigError(f"attention needs channels divisible by 8, got {channels}")
        inner = channels // 8
        self.f = nn.Conv2d(channels, inner, 1, bias=False)
        self.g = nn.Conv2d(channels, inner, 1, bias=False)
        self.h = nn.Conv2d(channels, inner, 1, bias=False)
        self.v = nn.Conv2d(inner, channels, 1, bias=False)

    def attention_map(self, x: torch.Tensor) -> torch.Tensor:
        """Attention weights beta with shape (B, N, N); column j sums to 1."""
        b, _, height, width = x.shape
        n = height * width
        f = self.f(x).reshape(b, -1, n)
        g = self.g(x).reshape(b, -1, n)
        scores = torch.einsum("bci,bcj->bij", f, g)
        return torch.softmax(scores, dim=1)  # normalize over input positions i

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, _, height, width = x.shape
        n = height * width
        beta = self.attention_map(x)
        h = self.h(x).reshape(b, -1, n)
        mixed = torch.einsum("bij,bci->bcj", beta, h)
        o = self.v(mixed.reshape(b, -1, height, width))
        return x + o


def _norm(channels: int) -> nn.GroupNorm:
    for groups in (8, 4, 2, 1):
        if channels % groups == 0:
            return nn.GroupNorm(groups, channels)
    return nn.GroupNorm(1, channels)


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, time_dim: int | None):
        super().__init__()
        self.norm1 = _norm(in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm2 = _norm(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_ch) if time_dim else None
        self.skip = (
            nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()
        )

    def forward(self, x, temb=None):
        h = self.conv1(torch.nn.functional.silu(self.norm1(x)))
        if self.time_proj is not None:
            h = h + self.time_proj(torch.nn.functional.silu(temb))[:, :, None, None]
        h = self.conv2(torch.nn.functional.silu(self.norm2(h)))
        return h + self.skip(x)


class UNet(nn.Module):
    """Encoder/decoder with skip connections.

    ``time_embedding_dim=None`` builds the plain regression backbone;
    any positive value adds the sinusoidal embedding MLP plus per-block
    projections (and the forward pass then requires ``t``).
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int = 1,
        base_width: int = 64,
        depth: int = 4,
        image_size: int = 64,
        time_embedding_dim: int | None = None,
        attention_enabled: bool = False,
    ):
        super().__init__()
        if image_size % (1 << (depth - 1)):
            raise ConfigError(
                f"image_size {image_size} not divisible by 2^{depth - 1}"
            )
        self.image_size = image_size
        self.time_embedding_dim = time_embedding_dim
        widths = [base_width * min(2**i, 4) for i in range(depth)]
        attention_res = image_size // 8
        level_res = [image_size >> i for i in range(depth)]
        if attention_enabled and attention_res not in level_res:
            raise ConfigError(
                f"attention resolution {attention_res} needs depth >= 4 "
                f"(levels: {level_res})"
            )

        time_dim = None
        if time_embedding_dim:
            time_dim = time_embedding_dim
            self.time_mlp = nn.Sequential(
                nn.Linear(time_embedding_dim, time_embedding_dim),
                nn.SiLU(),
                nn.Linear(time_embedding_dim, time_embedding_dim),
            )

        self.stem = nn.Conv2d(in_channels, widths[0], 3, padding=1)

        def maybe_attention(level):
            if attention_enabled and level_res[level] == attention_res:
                return SelfAttention2d(widths[level])
            return nn.Identity()

        self.down_blocks = nn.ModuleList()
        self.down_attn = nn.ModuleList()
        self.downsamples = nn.ModuleList()
        prev = widths[0]
        for level, width in enumerate(widths):
            self.down_blocks.append(
                nn.ModuleList(
                    [ResBlock(prev, width, time_dim), ResBlock(width, width, time_dim)]
                )
            )
            self.down_attn.append(maybe_attention(level))
            if level < depth - 1:
                self.downsamples.append(nn.Conv2d(width, width, 3, stride=2, padding=1))
            prev = width

        self.mid_block1 = ResBlock(widths[-1], widths[-1], time_dim)
        self.mid_attn = maybe_attention(depth - 1)
        self.mid_block2 = ResBlock(widths[-1], widths[-1], time_dim)

        self.up_blocks = nn.ModuleList()
        self.up_attn = nn.ModuleList()
        self.upsamples = nn.ModuleList()
        for level in reversed(range(depth - 1)):
            self.upsamples.append(
                nn.Conv2d(widths[level + 1], widths[level], 3, padding=1)
            )
            self.up_blocks.append(
                nn.ModuleList(
                    [
                        ResBlock(widths[level] * 2, widths[level], time_dim),
                        ResBlock(widths[level], widths[level], time_dim),
                    ]
                )
            )
            self.up_attn.append(maybe_attention(level))

        self.head_norm = _norm(widths[0])
        self.head = nn.Conv2d(widths[0], out_channels, 3, padding=1)

    def forward(self, x: torch.Tensor, t: torch.Tensor | None = None) -> torch.Tensor:
        temb = None
        if self.time_embedding_dim:
            if t is None:
                raise ConfigError("this network requires a step tensor t")
            temb = self.time_mlp(
                sinusoidal_embedding(t, self.time_embedding_dim).to(x.dtype)
            )

        h = self.stem(x)
        skips = []
        for level, blocks in enumerate(self.down_blocks):
            for block in blocks:
                h = block(h, temb)
            h = self.down_attn[level](h)
            skips.append(h)
            if level < len(self.downsamples):
                h = self.downsamples[level](h)

        h = self.mid_block1(h, temb)
        h = self.mid_attn(h)
        h = self.mid_block2(h, temb)

        for i, blocks in enumerate(self.up_blocks):
            h = torch.nn.functional.interpolate(h, scale_factor=2, mode="nearest")
            h = self.upsamples[i](h)
            skip = skips[-(i + 2)]
            h = torch.cat([h, skip], dim=1)
            for block in blocks:
                h = block(h, temb)
            h = self.up_attn[i](h)

        return self.head(torch.nn.functional.silu(self.head_norm(h)))


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def count_time_parameters(model: UNet) -> int:
    """Parameters that exist only because of the temporal pathway."""
    total = 0
    for name, param in model.named_parameters():
        if "time_mlp" in name or "time_proj" in name:
            total += param.numel()
    return total
