"""Forward noising, epsilon-prediction losses, staged decoder supervision, DDPM sampling.

Policies plug in through three callables: ``encode(obs) -> cond``,
``denoise(z_k, cond, k) -> eps_hat`` and an optional ``decode(z0_hat) -> x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Protocol

import torch
from torch import Tensor

ScheduleKind = Literal["cosine", "linear_beta"]
ALPHA_GUARD = 1e-12


class DiffusionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    k_max: int
    alpha_bar: Tensor  # (k_max + 1,), float64
    kind: str = "cosine"

    def __post_init__(self):
        ab = self.alpha_bar
        if ab.shape != (self.k_max + 1,):
            raise DiffusionError(f"alpha_bar needs {self.k_max + 1} entries, got {tuple(ab.shape)}")
        if not (0.99 < float(ab[0]) <= 1.0):
            raise DiffusionError(f"alpha_bar[0]={float(ab[0])} outside (0.99, 1]")
        if not bool((ab[1:] < ab[:-1]).all()):
            raise DiffusionError("alpha_bar must be strictly decreasing")
        if float(ab[-1]) < 0:
            raise DiffusionError("alpha_bar must be non-negative")
        if self.kind == "cosine" and float(ab[-1]) >= 0.05:
            raise DiffusionError(f"alpha_bar[K]={float(ab[-1])} is not below 0.05")

    @property
    def betas(self) -> Tensor:
        return 1 - self.alpha_bar[1:] / self.alpha_bar[:-1]


def make_schedule(k_max: int, kind: ScheduleKind = "cosine", beta_start: float = 1e-4,
                  beta_end: float = 0.02, s: float = 0.008) -> NoiseSchedule:
    if k_max < 1:
        raise DiffusionError("k_max must be >= 1")
    if kind == "linear_beta":
        betas = torch.linspace(beta_start, beta_end, k_max, dtype=torch.float64)
    elif kind == "cosine":
        t = torch.arange(k_max + 1, dtype=torch.float64) / k_max
        f = torch.cos((t + s) / (1 + s) * math.pi / 2) ** 2
        betas = (1 - f[1:] / f[:-1]).clamp(max=0.999)
    else:
        raise DiffusionError(f"unknown schedule kind {kind!r}")
    alpha_bar = torch.cat([torch.ones(1, dtype=torch.float64), torch.cumprod(1 - betas, 0)])
    return NoiseSchedule(k_max, alpha_bar, kind)


def _alpha(s: NoiseSchedule, k, like: Tensor) -> Tensor:
    """``alpha_bar[k]`` broadcast against ``like``; ``k`` is an int or a per-sample tensor."""
    k = torch.as_tensor(k)
    if bool(((k < 0) | (k > s.k_max)).any()):
        raise DiffusionError(f"step out of range [0, {s.k_max}]")
    a = s.alpha_bar[k].to(like.dtype)
    return a.reshape(a.shape + (1,) * (like.dim() - a.dim()))


def forward_noise(z0: Tensor, k, eps: Tensor, s: NoiseSchedule) -> Tensor:
    if z0.shape != eps.shape:
        raise DiffusionError(f"shape mismatch {tuple(z0.shape)} vs {tuple(eps.shape)}")
    a = _alpha(s, k, z0)
    return a.sqrt() * z0 + (1 - a).sqrt() * eps


def recover_z0(zk: Tensor, eps_hat: Tensor, k, s: NoiseSchedule) -> Tensor:
    a = _alpha(s, k, zk)
    if float(a.min()) <= ALPHA_GUARD:
        raise DiffusionError("alpha_bar too close to zero to invert")
    return (zk - (1 - a).sqrt() * eps_hat) / a.sqrt()


def k_threshold(eta: float, k_max: int) -> int:
    if not 0.0 <= eta <= 1.0:
        raise DiffusionError(f"eta={eta} outside [0, 1]")
    return k_max - math.floor(eta * k_max)


@dataclass(frozen=True)
class StagedLossConfig:
    eta: float
    k_max: int

    def __post_init__(self):
        k_threshold(self.eta, self.k_max)

    @property
    def k_thresh(self) -> int:
        return k_threshold(self.eta, self.k_max)


def _mse(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DiffusionError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    return ((a - b) ** 2).mean()


def loss_encode_denoise(eps_hat: Tensor, eps: Tensor) -> Tensor:
    return _mse(eps_hat, eps)


def loss_decoder(decoded: Tensor, target: Tensor, k: int,
                 k_thresh: int | StagedLossConfig) -> Tensor:
    """MSE when ``k >= k_thresh``, otherwise an exact zero disconnected from ``decoded``."""
    if isinstance(k_thresh, StagedLossConfig):
        k_thresh = k_thresh.k_thresh
    if decoded.shape != target.shape:
        raise DiffusionError(f"shape mismatch {tuple(decoded.shape)} vs {tuple(target.shape)}")
    if k < k_thresh:
        return torch.zeros((), dtype=decoded.dtype)
    return _mse(decoded, target)


def total_loss(l_ed, l_dec):
    return l_ed + l_dec


class Denoiser(Protocol):
    def encode(self, obs: Tensor) -> Tensor: ...
    def denoise(self, z: Tensor, cond: Tensor, k: Tensor) -> Tensor: ...
    def decode(self, z: Tensor) -> Tensor: ...


@dataclass
class StepLosses:
    l_ed: Tensor
    l_dec: Tensor
    total: Tensor
    noise_level: Tensor
    k: Tensor


def progress_index(noise_level, k_max: int):
    """Reverse steps already taken when the sampler holds ``z_{noise_level}``.

    The decoder indicator ``k >= K_thresh`` is evaluated on this index, so the
    decoder is supervised on the last ``floor(eta * K)`` (least noisy) levels.
    """
    return k_max - noise_level


def compute_losses(model, obs: Tensor, target: Tensor, s: NoiseSchedule, k_thresh: int,
                   gen: torch.Generator, use_decoder: bool = True,
                   noise_latent: bool = False) -> StepLosses:
    """Per-batch losses with the noise level uniform in ``[1, K]`` per element.

    The decoder term is the batch mean of per-sample squared errors masked by
    ``progress_index >= k_thresh``; the decoder only runs on the unmasked samples.
    """
    if obs.shape[0] == 0:
        raise DiffusionError("empty batch")
    batch = target.shape[0]
    n = torch.randint(1, s.k_max + 1, (batch,), generator=gen)
    eps = torch.randn(target.shape, generator=gen, dtype=target.dtype)
    cond = model.encode(obs)
    z0 = model.encode_actions(target) if noise_latent else target
    zn = forward_noise(z0, n, eps, s)
    eps_hat = model.denoise(zn, cond, n)
    l_ed = loss_encode_denoise(eps_hat, eps)
    l_dec = torch.zeros((), dtype=target.dtype)
    k = progress_index(n, s.k_max)
    active = k >= k_thresh
    if use_decoder and bool(active.any()):
        idx = active.nonzero().squeeze(-1)
        z0_hat = recover_z0(zn[idx], eps_hat[idx], n[idx], s)
        err = (model.decode(z0_hat) - target[idx]) ** 2
        l_dec = err.flatten(1).mean(1).sum() / batch
    return StepLosses(l_ed, l_dec, total_loss(l_ed, l_dec), n, k)


def train_step(model, optimizer: torch.optim.Optimizer, obs: Tensor, target: Tensor,
               s: NoiseSchedule, k_thresh: int, gen: torch.Generator,
               use_decoder: bool = True, noise_latent: bool = False) -> StepLosses:
    optimizer.zero_grad(set_to_none=True)
    losses = compute_losses(model, obs, target, s, k_thresh, gen, use_decoder, noise_latent)
    losses.total.backward()
    optimizer.step()
    return losses


def posterior_step(zk: Tensor, eps_hat: Tensor, k: int, s: NoiseSchedule,
                   noise: Tensor | None, clip: float | None = None) -> Tensor:
    """One ancestral step ``z_k -> z_{k-1}`` with the standard posterior variance."""
    ab_k, ab_prev = s.alpha_bar[k], s.alpha_bar[k - 1]
    beta = 1 - ab_k / ab_prev
    z0 = recover_z0(zk, eps_hat, k, s)
    if clip is not None:
        z0 = z0.clamp(-clip, clip)
    c0 = (ab_prev.sqrt() * beta / (1 - ab_k)).to(zk.dtype)
    ck = ((1 - beta).sqrt() * (1 - ab_prev) / (1 - ab_k)).to(zk.dtype)
    mean = c0 * z0 + ck * zk
    if k == 1 or noise is None:
        return mean
    var = beta * (1 - ab_prev) / (1 - ab_k)
    return mean + var.sqrt().to(zk.dtype) * noise


@torch.no_grad()
def sample(denoise: Callable[[Tensor, Tensor, Tensor], Tensor], cond: Tensor,
           shape: tuple[int, ...], s: NoiseSchedule, seed: int,
           decode: Callable[[Tensor], Tensor] | None = None, dtype=torch.float32,
           clip: float | None = None) -> Tensor:
    """DDPM ancestral sampling from ``K`` down to 1, then the optional decoder."""
    gen = torch.Generator().manual_seed(seed)
    z = torch.randn(shape, generator=gen, dtype=dtype)
    for k in range(s.k_max, 0, -1):
        kk = torch.full((shape[0],), k, dtype=torch.long)
        eps_hat = denoise(z, cond, kk)
        noise = torch.randn(shape, generator=gen, dtype=dtype) if k > 1 else None
        z = posterior_step(z, eps_hat, k, s, noise, clip)
    return decode(z) if decode is not None else z


def sample_actions(model, obs: Tensor, s: NoiseSchedule, seed: int) -> Tensor:
    """Batched ``(B, H_p, ...)`` action latents for observation stacks ``obs``."""
    with torch.no_grad():
        cond = model.encode(obs)
        shape = (obs.shape[0], *model.action_shape)
        decode = model.decode if model.has_decoder else None
        return sample(model.denoise, cond, shape, s, seed, decode, dtype=obs.dtype,
                      clip=model.sample_clip)
