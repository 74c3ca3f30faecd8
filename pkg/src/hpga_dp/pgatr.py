"""E(3)-equivariant transformer layers acting on multivector channels.

Every layer takes tensors shaped ``(..., tokens, channels, 16)`` and commutes
with rigid motions applied to all multivectors by sandwich products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from hpga_dp.pga import ops
from hpga_dp.pga.codegen import BLADES

EPS_NUM = 1e-8
_EUCLIDEAN_IDX = tuple(i for i, b in enumerate(BLADES) if 0 not in b)


def _basis_maps() -> Tensor:
    """The 9 equivariant linear maps on a single multivector, as 16x16 matrices.

    Maps 0..4 are grade projections; maps 5..8 are ``x -> e0 <x>_k`` for k = 0..3.
    """
    eye = torch.eye(16, dtype=torch.float64)
    grades = torch.tensor(ops.GRADES)
    maps = [torch.diag((grades == k).double()) for k in range(5)]
    e0 = torch.zeros(16, dtype=torch.float64)
    e0[1] = 1.0
    # column b of the left-multiplication matrix is e0 * basis_b
    left_e0 = ops.geometric_product(e0.expand(16, 16), eye).T
    maps += [left_e0 @ maps[k] for k in range(4)]
    return torch.stack(maps)


_BASIS_MAPS = _basis_maps()


_GRADE_OF = torch.tensor(ops.GRADES)
# left multiplication by e0 sends each e0-free blade to the blade with e0 prepended, sign +1
_E0_SRC = torch.tensor(_EUCLIDEAN_IDX)
_E0_DST = torch.tensor([BLADES.index((0,) + BLADES[i]) for i in _EUCLIDEAN_IDX])
_E0_SRC_GRADE = _GRADE_OF[_E0_SRC]


def equi_linear(weight: Tensor, x: Tensor) -> Tensor:
    """Grade-wise channel mixing ``sum_k w_k <x>_k + sum_k v_k e0 <x>_k``.

    ``weight`` has shape ``(out_channels, in_channels, 9)``: entries ``[..., :5]``
    are the grade weights ``w_0..w_4`` and ``[..., 5:]`` the e0 weights ``v_0..v_3``.
    Computed blade by blade as 16 + 8 small matmuls.
    """
    out_ch, in_ch, _ = weight.shape
    if x.shape[-2] != in_ch or x.shape[-1] != 16:
        raise ValueError(f"expected (..., {in_ch}, 16), got {tuple(x.shape)}")
    lead = x.shape[:-2]
    w = weight[..., :5][..., _GRADE_OF].permute(2, 1, 0)  # (16, in, out)
    v = weight[..., 5:][..., _E0_SRC_GRADE].permute(2, 1, 0)  # (8, in, out)
    xt = x.movedim(-1, 0).reshape(16, -1, in_ch)
    y = torch.bmm(xt, w).index_add(0, _E0_DST, torch.bmm(xt[_E0_SRC], v))
    return y.reshape(16, *lead, out_ch).movedim(0, -1)


def equi_linear_dense(weight: Tensor, x: Tensor) -> Tensor:
    """Reference form of :func:`equi_linear` through the 9 basis-map matrices."""
    out_ch, in_ch, _ = weight.shape
    maps = _BASIS_MAPS.to(dtype=x.dtype, device=x.device)
    full = torch.einsum("oim,mab->oaib", weight, maps).reshape(out_ch * 16, in_ch * 16)
    y = x.reshape(*x.shape[:-2], in_ch * 16) @ full.T
    return y.reshape(*x.shape[:-2], out_ch, 16)


def bilinear_features(x: Tensor, y: Tensor, ref: Tensor) -> Tensor:
    """Channel concat of ``x y`` and ``ref_0123 * join(x, y)``."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    gp = ops.geometric_product(x, y)
    jn = ref[..., 15:16] * ops.join(x, y)
    return torch.cat([gp, jn], dim=-2)


def geometric_bilinear(x: Tensor, y: Tensor, ref: Tensor, weight: Tensor) -> Tensor:
    """Bilinear features projected back to ``weight.shape[0]`` channels."""
    return equi_linear(weight, bilinear_features(x, y, ref))


def attention_weights(q: Tensor, k: Tensor, n_heads: int = 1) -> Tensor:
    """Softmax over keys of the invariant inner products, ``(..., heads, Tq, Tk)``."""
    qh, kh = _split_heads(q, n_heads), _split_heads(k, n_heads)
    idx = list(_EUCLIDEAN_IDX)
    qe, ke = qh[..., idx].flatten(-2), kh[..., idx].flatten(-2)
    per_head = q.shape[-2] // n_heads
    logits = qe @ ke.transpose(-1, -2) / math.sqrt(8 * per_head)
    return logits.softmax(-1)


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    # (..., T, C, 16) -> (..., H, T, C/H, 16)
    *lead, t, c, _ = x.shape
    if c % n_heads:
        raise ValueError(f"{c} channels not divisible by {n_heads} heads")
    return x.reshape(*lead, t, n_heads, c // n_heads, 16).movedim(-3, -4)


def mv_attention(q: Tensor, k: Tensor, v: Tensor, n_heads: int = 1) -> Tensor:
    if q.shape[-2:] != k.shape[-2:] or k.shape[:-2] != v.shape[:-2]:
        raise ValueError("q, k, v token/channel dims disagree")
    w = attention_weights(q, k, n_heads)
    vh = _split_heads(v, n_heads)
    out = (w @ vh.flatten(-2)).unflatten(-1, vh.shape[-2:])
    # (..., H, T, C/H, 16) -> (..., T, C, 16)
    return out.movedim(-4, -3).flatten(-3, -2)


def gated_gelu(x: Tensor) -> Tensor:
    return F.gelu(x[..., 0:1], approximate="none") * x


def equi_layernorm(x: Tensor, eps: float = EPS_NUM) -> Tensor:
    """Divide each token by the RMS over channels of the invariant norm."""
    sq = ops.inner_product(x, x).mean(dim=-1, keepdim=True)
    return x / torch.sqrt(sq + eps).unsqueeze(-1)


# ---------------------------------------------------------------------- modules


class EquiLinear(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, zero_init: bool = False):
        super().__init__()
        self.in_channels, self.out_channels = in_channels, out_channels
        w = torch.randn(out_channels, in_channels, 9) / math.sqrt(in_channels)
        w[..., 5:] *= 0.5
        self.weight = nn.Parameter(torch.zeros_like(w) if zero_init else w)

    def forward(self, x: Tensor) -> Tensor:
        return equi_linear(self.weight, x)


class GeometricBilinear(nn.Module):
    """Projects the input twice, takes geometric products and joins, projects back.

    Half of ``hidden`` channels feed the geometric product and half the join.
    """

    def __init__(self, channels: int, hidden: int | None = None, zero_init: bool = False):
        super().__init__()
        hidden = hidden or channels
        self.left = EquiLinear(channels, hidden)
        self.right = EquiLinear(channels, hidden)
        self.out = EquiLinear(2 * hidden, channels, zero_init=zero_init)

    def forward(self, x: Tensor, ref: Tensor) -> Tensor:
        return geometric_bilinear(self.left(x), self.right(x), ref, self.out.weight)


@dataclass(frozen=True)
class PgatrConfig:
    n_blocks: int = 4
    channels: int = 16
    n_heads: int = 4
    hidden: int | None = None  # bilinear hidden channels; defaults to channels // 2

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if self.channels % self.n_heads:
            raise ValueError("channels must be divisible by n_heads")


class PgatrBlock(nn.Module):
    """Pre-norm residual block: attention branch then geometric MLP branch.

    The reference multivector for the join gate is channel 0 of the block input.
    """

    def __init__(self, cfg: PgatrConfig, zero_init: bool = False):
        super().__init__()
        c = cfg.channels
        self.cfg = cfg
        self.qkv = EquiLinear(c, 3 * c)
        self.attn_out = EquiLinear(c, c, zero_init=zero_init)
        self.bilinear = GeometricBilinear(c, cfg.hidden or max(c // 2, 1))
        self.mlp_out = EquiLinear(c, c, zero_init=zero_init)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-2] != self.cfg.channels:
            raise ValueError(f"expected {self.cfg.channels} channels, got {x.shape[-2]}")
        ref = x[..., :1, :]
        h = self.qkv(equi_layernorm(x))
        q, k, v = h.chunk(3, dim=-2)
        x = x + self.attn_out(mv_attention(q, k, v, self.cfg.n_heads))
        h = gated_gelu(self.bilinear(equi_layernorm(x), ref))
        return x + self.mlp_out(h)


class Pgatr(nn.Module):
    """Token-wise P-GATr mapping ``(..., T, 1, 16)`` to ``(..., T, 1, 16)``.

    Input multivectors are lifted to ``cfg.channels`` channels, tagged with
    learned per-token scalars in the grade-0 slot, passed through the blocks,
    projected back to one channel and added to the input.
    """

    def __init__(self, cfg: PgatrConfig, n_tokens: int, zero_init_out: bool = True):
        super().__init__()
        self.cfg, self.n_tokens = cfg, n_tokens
        self.lift = EquiLinear(1, cfg.channels)
        self.pos = nn.Parameter(torch.randn(n_tokens, cfg.channels))
        self.blocks = nn.ModuleList(PgatrBlock(cfg) for _ in range(cfg.n_blocks))
        self.out = EquiLinear(cfg.channels, 1, zero_init=zero_init_out)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-3:] != (self.n_tokens, 1, 16):
            raise ValueError(f"expected (..., {self.n_tokens}, 1, 16), got {tuple(x.shape)}")
        h = self.lift(x)
        h = h + F.pad(self.pos.to(h.dtype).unsqueeze(-1), (0, 15))
        for block in self.blocks:
            h = block(h)
        return x + self.out(h)


class StackCoder(nn.Module):
    """P-GATr over a multivector stack ``(..., T, K, 16)``, flattened to T*K tokens.

    Serves as the observation encoder and the action decoder.
    """

    def __init__(self, cfg: PgatrConfig, horizon: int, n_channels: int):
        super().__init__()
        self.horizon, self.n_channels = horizon, n_channels
        self.net = Pgatr(cfg, horizon * n_channels)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-3:] != (self.horizon, self.n_channels, 16):
            raise ValueError(
                f"expected (..., {self.horizon}, {self.n_channels}, 16), got {tuple(x.shape)}")
        lead = x.shape[:-3]
        tokens = x.reshape(*lead, self.horizon * self.n_channels, 1, 16)
        return self.net(tokens).reshape(x.shape)


def encode_obs(encoder: StackCoder, x_o: Tensor) -> Tensor:
    return encoder(x_o)


def decode_actions(decoder: StackCoder, z_hat: Tensor) -> Tensor:
    return decoder(z_hat)
