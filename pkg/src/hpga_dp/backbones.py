"""Non-geometric epsilon-prediction backbones.

Both backbones consume action sequences laid out as ``(batch, horizon, features)``
together with a flat or tokenized conditioning signal and an integer
denoising step, and return a tensor of the same shape as the noisy input.
For multivector latents the feature axis is the ``(K_a, 16)`` stack flattened
channel-major, i.e. feature ``c * 16 + blade``.
"""

from __future__ import annotations

import math

import torch
from torch import Tensor, nn


class SinusoidalEmbedding(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim
        # tracks the module dtype so .double() models embed in float64
        self.register_buffer("_probe", torch.zeros(()), persistent=False)

    def forward(self, k: Tensor) -> Tensor:
        half = self.dim // 2
        freqs = torch.exp(-math.log(10000.0) * torch.arange(half, device=k.device, dtype=self._probe.dtype)
                          / (half - 1))
        args = k.to(freqs.dtype)[:, None] * freqs[None, :]
        return torch.cat([args.sin(), args.cos()], dim=-1)


def timestep_mlp(dim: int) -> nn.Sequential:
    return nn.Sequential(SinusoidalEmbedding(dim), nn.Linear(dim, 4 * dim), nn.Mish(),
                         nn.Linear(4 * dim, dim))


class Conv1dBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, groups: int = 8):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv1d(in_ch, out_ch, kernel, padding=kernel // 2),
            nn.GroupNorm(groups, out_ch),
            nn.Mish(),
        )

    def forward(self, x: Tensor) -> Tensor:
        return self.block(x)


class FiLMResBlock(nn.Module):
    """Two conv blocks; the conditioning vector scales and shifts the first."""

    def __init__(self, in_ch: int, out_ch: int, cond_dim: int, kernel: int = 5, groups: int = 8):
        super().__init__()
        self.conv1 = Conv1dBlock(in_ch, out_ch, kernel, groups)
        self.conv2 = Conv1dBlock(out_ch, out_ch, kernel, groups)
        self.film = nn.Sequential(nn.Mish(), nn.Linear(cond_dim, 2 * out_ch))
        self.skip = nn.Conv1d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: Tensor, cond: Tensor) -> Tensor:
        h = self.conv1(x)
        scale, shift = self.film(cond).unsqueeze(-1).chunk(2, dim=1)
        h = self.conv2(scale * h + shift)
        return h + self.skip(x)


class UNet1D(nn.Module):
    """Temporal U-Net over the horizon axis with FiLM conditioning at every level."""

    def __init__(
        self,
        feature_dim: int,
        cond_dim: int,
        widths: tuple[int, ...] = (64, 128, 256),
        step_dim: int = 128,
        kernel: int = 5,
        groups: int = 8,
    ):
        super().__init__()
        self.feature_dim = feature_dim
        self.down_factor = 2 ** (len(widths) - 1)
        self.step_emb = timestep_mlp(step_dim)
        film_dim = step_dim + cond_dim
        chans = [feature_dim, *widths]
        self.down = nn.ModuleList()
        for i, (a, b) in enumerate(zip(chans[:-1], chans[1:])):
            last = i == len(widths) - 1
            self.down.append(nn.ModuleList([
                FiLMResBlock(a, b, film_dim, kernel, groups),
                FiLMResBlock(b, b, film_dim, kernel, groups),
                nn.Identity() if last else nn.Conv1d(b, b, 3, stride=2, padding=1),
            ]))
        mid = widths[-1]
        self.mid = nn.ModuleList([FiLMResBlock(mid, mid, film_dim, kernel, groups) for _ in range(2)])
        self.up = nn.ModuleList()
        for a, b in zip(reversed(widths[1:]), reversed(widths[:-1])):
            self.up.append(nn.ModuleList([
                FiLMResBlock(2 * a, b, film_dim, kernel, groups),
                FiLMResBlock(b, b, film_dim, kernel, groups),
                nn.ConvTranspose1d(b, b, 4, stride=2, padding=1),
            ]))
        self.head = nn.Sequential(Conv1dBlock(widths[0], widths[0], kernel, groups),
                                  nn.Conv1d(widths[0], feature_dim, 1))
        # linear path from the noisy input to the output; without it the
        # near-identity part of the noise estimate must pass through every norm
        self.input_skip = nn.Conv1d(feature_dim, feature_dim, 1)

    def zero_head(self) -> None:
        for layer in (self.head[-1], self.input_skip):
            nn.init.zeros_(layer.weight)
            nn.init.zeros_(layer.bias)

    def forward(self, x: Tensor, cond: Tensor, k: Tensor) -> Tensor:
        batch, horizon, feat = x.shape
        if feat != self.feature_dim:
            raise ValueError(f"expected {self.feature_dim} features, got {feat}")
        if horizon % self.down_factor:
            raise ValueError(f"horizon {horizon} not divisible by {self.down_factor}")
        film = torch.cat([self.step_emb(k), cond.reshape(batch, -1)], dim=-1)
        h = x.transpose(1, 2)
        skips = []
        for res1, res2, downsample in self.down:
            h = res2(res1(h, film), film)
            skips.append(h)
            h = downsample(h)
        for res in self.mid:
            h = res(h, film)
        for res1, res2, upsample in self.up:
            h = torch.cat([h, skips.pop()], dim=1)
            h = upsample(res2(res1(h, film), film))
        return (self.head(h) + self.input_skip(x.transpose(1, 2))).transpose(1, 2)


class TransformerDenoiser(nn.Module):
    """Pre-norm transformer over action tokens with conditioning tokens prepended."""

    def __init__(
        self,
        feature_dim: int,
        cond_token_dim: int,
        n_cond_tokens: int,
        horizon: int,
        dim: int = 128,
        n_layers: int = 4,
        n_heads: int = 4,
    ):
        super().__init__()
        self.feature_dim, self.horizon = feature_dim, horizon
        self.n_cond_tokens, self.cond_token_dim = n_cond_tokens, cond_token_dim
        self.step_emb = timestep_mlp(dim)
        self.in_proj = nn.Linear(feature_dim, dim)
        self.cond_proj = nn.Linear(cond_token_dim, dim)
        self.pos = nn.Parameter(0.02 * torch.randn(n_cond_tokens + horizon, dim))
        layer = nn.TransformerEncoderLayer(dim, n_heads, 4 * dim, dropout=0.0,
                                           activation="gelu", batch_first=True, norm_first=True)
        self.encoder = nn.TransformerEncoder(layer, n_layers, enable_nested_tensor=False)
        self.norm = nn.LayerNorm(dim)
        self.head = nn.Linear(dim, feature_dim)
        self.input_skip = nn.Linear(feature_dim, feature_dim)

    def zero_head(self) -> None:
        for layer in (self.head, self.input_skip):
            nn.init.zeros_(layer.weight)
            nn.init.zeros_(layer.bias)

    def forward(self, x: Tensor, cond: Tensor, k: Tensor) -> Tensor:
        batch, horizon, feat = x.shape
        if feat != self.feature_dim or horizon != self.horizon:
            raise ValueError(f"expected (B, {self.horizon}, {self.feature_dim}), got {tuple(x.shape)}")
        cond = cond.reshape(batch, self.n_cond_tokens, self.cond_token_dim)
        tokens = torch.cat([self.cond_proj(cond), self.in_proj(x)], dim=1)
        tokens = tokens + self.pos + self.step_emb(k).unsqueeze(1)
        h = self.encoder(tokens)
        return self.head(self.norm(h[:, self.n_cond_tokens:])) + self.input_skip(x)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def unet_denoise(net: UNet1D, z_noisy: Tensor, cond: Tensor, k: Tensor) -> Tensor:
    """Epsilon prediction for a multivector stack ``(B, H_p, K_a, 16)``."""
    flat = z_noisy.flatten(-2)
    return net(flat, cond.flatten(1), k).reshape(z_noisy.shape)


def transformer_denoise(net: TransformerDenoiser, z_noisy: Tensor, cond: Tensor, k: Tensor) -> Tensor:
    flat = z_noisy.flatten(-2)
    return net(flat, cond.flatten(1), k).reshape(z_noisy.shape)


__all__ = [
    "UNet1D", "TransformerDenoiser", "SinusoidalEmbedding", "count_parameters",
    "unet_denoise", "transformer_denoise",
]
