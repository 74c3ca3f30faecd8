"""Policy variants: multivector encoder/denoiser/decoder and raw-vector baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import Tensor, nn

from hpga_dp import policy as pol
from hpga_dp.backbones import TransformerDenoiser, UNet1D, count_parameters
from hpga_dp.pga import conversions as cv
from hpga_dp.pgatr import PgatrConfig, StackCoder

VARIANTS = ("hpga_u", "hpga_t", "baseline_u", "baseline_t")


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "hpga_u"
    h_o: int = pol.H_O
    h_p: int = pol.H_P
    n_objects: int = 1
    encoder: PgatrConfig = field(default_factory=PgatrConfig)
    decoder: PgatrConfig = field(default_factory=PgatrConfig)
    unet_widths: tuple[int, ...] = (64, 128, 256)
    step_dim: int = 128
    tf_dim: int = 128
    tf_layers: int = 4
    tf_heads: int = 4

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if min(self.h_o, self.h_p, self.n_objects) < 1:
            raise ValueError("horizons and object count must be >= 1")

    @property
    def k_o(self) -> int:
        return pol.k_obs(self.n_objects)

    @property
    def backbone(self) -> str:
        return self.variant.split("_")[1]


def _arrays(batch: dict, keys) -> list[Tensor]:
    return [torch.as_tensor(batch[k]) for k in keys]


class HybridPolicy(nn.Module):
    """P-GATr encoder, plain denoiser over flattened multivectors, P-GATr decoder.

    Positions are centered on the workspace and divided by one global length so
    rigid structure is kept; the gripper scalar is mapped from [0, 1] to [-1, 1].
    """

    has_decoder = True
    sample_clip = 1.0

    def __init__(self, cfg: ModelConfig, center, scale: float):
        super().__init__()
        self.cfg = cfg
        self.center = torch.as_tensor(center, dtype=torch.float64)
        self.scale = float(scale)
        self.encoder = StackCoder(cfg.encoder, cfg.h_o, cfg.k_o)
        self.decoder = StackCoder(cfg.decoder, cfg.h_p, pol.K_A)
        feat = pol.K_A * 16
        if cfg.backbone == "u":
            self.denoiser = UNet1D(feat, cfg.h_o * cfg.k_o * 16, cfg.unet_widths, cfg.step_dim)
        else:
            self.denoiser = TransformerDenoiser(feat, cfg.k_o * 16, cfg.h_o, cfg.h_p,
                                                cfg.tf_dim, cfg.tf_layers, cfg.tf_heads)

    @property
    def action_shape(self) -> tuple[int, ...]:
        return (self.cfg.h_p, pol.K_A, 16)

    def groups(self) -> dict[str, nn.Module]:
        return {"encoder": self.encoder, "denoiser": self.denoiser, "decoder": self.decoder}

    def extra_state(self) -> dict:
        return {"center": self.center.tolist(), "scale": self.scale}

    def _norm_p(self, p: Tensor) -> Tensor:
        return (p - self.center.to(p.dtype)) / self.scale

    def obs_tensor(self, batch: dict) -> Tensor:
        p, q, g, op, oq = _arrays(batch, ["p", "q", "g", "obj_p", "obj_q"])
        return pol.pack_arrays(self._norm_p(p), q, 2 * g - 1, self._norm_p(op), oq, check=False)

    def action_tensor(self, batch: dict) -> Tensor:
        p, q, g = _arrays(batch, ["act_p", "act_q", "act_g"])
        return pol.pack_action_arrays(self._norm_p(p), q, 2 * g - 1, check=False)

    def action_arrays(self, x_a: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        x_a = x_a.double()
        p = cv.extract_point(x_a[..., 0, :]) * self.scale + self.center
        q = cv.extract_quaternion(x_a[..., 1, :])
        g = ((cv.extract_scalar(x_a[..., 2, :]) + 1) / 2).clamp(0.0, 1.0)
        return p, q, g

    def encode(self, obs: Tensor) -> Tensor:
        return self.encoder(obs)

    def denoise(self, z: Tensor, cond: Tensor, k: Tensor) -> Tensor:
        flat = z.flatten(-2)
        return self.denoiser(flat, cond.flatten(1), k).reshape(z.shape)

    def decode(self, z: Tensor) -> Tensor:
        return self.decoder(z)

    def encode_actions(self, x_a: Tensor) -> Tensor:
        return x_a


class BaselinePolicy(nn.Module):
    """Same backbones on raw vectors ``[p, q, g]`` min-max normalized to [-1, 1]."""

    has_decoder = False
    sample_clip = 1.0
    ACT_DIM = 8

    def __init__(self, cfg: ModelConfig, obs_min, obs_max, act_min, act_max):
        super().__init__()
        self.cfg = cfg
        self.obs_dim = 8 + 7 * cfg.n_objects
        self.stats = {k: torch.as_tensor(v, dtype=torch.float64) for k, v in
                      dict(obs_min=obs_min, obs_max=obs_max, act_min=act_min, act_max=act_max).items()}
        if cfg.backbone == "u":
            self.denoiser = UNet1D(self.ACT_DIM, cfg.h_o * self.obs_dim, cfg.unet_widths,
                                   cfg.step_dim)
        else:
            self.denoiser = TransformerDenoiser(self.ACT_DIM, self.obs_dim, cfg.h_o, cfg.h_p,
                                                cfg.tf_dim, cfg.tf_layers, cfg.tf_heads)

    @property
    def action_shape(self) -> tuple[int, ...]:
        return (self.cfg.h_p, self.ACT_DIM)

    def groups(self) -> dict[str, nn.Module]:
        return {"denoiser": self.denoiser}

    def extra_state(self) -> dict:
        return {k: v.tolist() for k, v in self.stats.items()}

    @staticmethod
    def _scale(x: Tensor, lo: Tensor, hi: Tensor) -> Tensor:
        span = (hi - lo).clamp(min=1e-6).to(x.dtype)
        return 2 * (x - lo.to(x.dtype)) / span - 1

    @staticmethod
    def raw_obs(batch: dict) -> Tensor:
        p, q, g, op, oq = _arrays(batch, ["p", "q", "g", "obj_p", "obj_q"])
        objs = torch.cat([op, oq], dim=-1).flatten(-2)
        return torch.cat([p, q, g.unsqueeze(-1), objs], dim=-1)

    @staticmethod
    def raw_actions(batch: dict) -> Tensor:
        p, q, g = _arrays(batch, ["act_p", "act_q", "act_g"])
        return torch.cat([p, q, g.unsqueeze(-1)], dim=-1)

    def obs_tensor(self, batch: dict) -> Tensor:
        return self._scale(self.raw_obs(batch), self.stats["obs_min"], self.stats["obs_max"])

    def action_tensor(self, batch: dict) -> Tensor:
        return self._scale(self.raw_actions(batch), self.stats["act_min"], self.stats["act_max"])

    def action_arrays(self, x: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        lo, hi = self.stats["act_min"], self.stats["act_max"]
        raw = (x.double() + 1) / 2 * (hi - lo).clamp(min=1e-6) + lo
        q = raw[..., 3:7]
        norm = q.norm(dim=-1, keepdim=True)
        if float(norm.min()) < cv.DEGENERATE_TOL:
            raise cv.DegenerateOrientationError("predicted quaternion has ~zero norm")
        return raw[..., :3], q / norm, raw[..., 7].clamp(0.0, 1.0)

    def encode(self, obs: Tensor) -> Tensor:
        return obs

    def denoise(self, z: Tensor, cond: Tensor, k: Tensor) -> Tensor:
        return self.denoiser(z, cond.flatten(1), k)

    def decode(self, z: Tensor) -> Tensor:
        return z

    def encode_actions(self, x: Tensor) -> Tensor:
        return x


def workspace_normalization(low, high) -> tuple[np.ndarray, float]:
    low, high = np.asarray(low, float), np.asarray(high, float)
    return (low + high) / 2, float((high - low).max() / 2)


def dataset_stats(obs: Tensor, act: Tensor) -> dict[str, Tensor]:
    o, a = obs.reshape(-1, obs.shape[-1]), act.reshape(-1, act.shape[-1])
    return dict(obs_min=o.min(0).values, obs_max=o.max(0).values,
                act_min=a.min(0).values, act_max=a.max(0).values)


def build_model(cfg: ModelConfig, extra: dict) -> HybridPolicy | BaselinePolicy:
    """``extra`` carries normalization: center/scale or the min/max statistics."""
    if cfg.variant.startswith("hpga"):
        return HybridPolicy(cfg, extra["center"], extra["scale"])
    return BaselinePolicy(cfg, extra["obs_min"], extra["obs_max"], extra["act_min"],
                          extra["act_max"])


def matched_baseline_widths(cfg: ModelConfig, target: int, tol: float = 0.1) -> tuple[int, ...]:
    """Scale U-Net widths (multiples of 8) until the baseline denoiser count is within ``tol``."""
    obs_dim = (8 + 7 * cfg.n_objects) * cfg.h_o
    best, best_err = cfg.unet_widths, math.inf
    for mult in np.linspace(0.5, 2.0, 61):
        widths = tuple(max(8, int(round(w * mult / 8)) * 8) for w in cfg.unet_widths)
        n = count_parameters(UNet1D(BaselinePolicy.ACT_DIM, obs_dim, widths, cfg.step_dim))
        err = abs(n - target) / target
        if err < best_err:
            best, best_err = widths, err
        if err <= tol / 2:
            break
    return best


__all__ = ["ModelConfig", "HybridPolicy", "BaselinePolicy", "build_model", "VARIANTS",
           "workspace_normalization", "dataset_stats", "matched_baseline_widths"]
