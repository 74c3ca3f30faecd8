"""Constructors for rotors, translators and general rigid-motion versors."""

from __future__ import annotations

import math

import torch
from torch import Tensor

from hpga_dp.pga.conversions import embed_quaternion
from hpga_dp.pga.ops import geometric_product

E01, E02, E03 = 5, 6, 7


def rotor(axis, angle: float) -> Tensor:
    """Rotation by ``angle`` radians about the unit ``axis`` through the origin."""
    axis = torch.as_tensor(axis, dtype=torch.float64)
    axis = axis / axis.norm()
    half = 0.5 * angle
    q = torch.cat([torch.tensor([math.cos(half)], dtype=axis.dtype), math.sin(half) * axis])
    return embed_quaternion(q)


def translator(t) -> Tensor:
    """Translation by the vector ``t``.

    With the dual point form, ``1 - (t/2) . (e01, e02, e03)`` moves points by ``+t``.
    """
    t = torch.as_tensor(t, dtype=torch.float64)
    v = torch.zeros(*t.shape[:-1], 16, dtype=t.dtype)
    v[..., 0] = 1.0
    v[..., E01] = -0.5 * t[..., 0]
    v[..., E02] = -0.5 * t[..., 1]
    v[..., E03] = -0.5 * t[..., 2]
    return v


def motor(q, t) -> Tensor:
    """Rigid motion that rotates by unit quaternion ``q`` and then translates by ``t``."""
    return geometric_product(translator(t), embed_quaternion(q))


def random_quaternion(gen: torch.Generator, shape=()) -> Tensor:
    q = torch.randn(*shape, 4, generator=gen, dtype=torch.float64)
    q = q / q.norm(dim=-1, keepdim=True)
    return torch.where(q[..., :1] < 0, -q, q)


def random_motor(gen: torch.Generator, scale: float = 1.0, kind: str = "motor") -> Tensor:
    """Random rotor, translator, or their product, for equivariance testing."""
    q = random_quaternion(gen)
    t = scale * torch.randn(3, generator=gen, dtype=torch.float64)
    if kind == "rotor":
        return embed_quaternion(q)
    if kind == "translator":
        return translator(t)
    return motor(q, t)
