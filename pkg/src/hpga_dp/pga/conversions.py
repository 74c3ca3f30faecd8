"""Embedding of scalars, directions, points and unit quaternions as multivectors.

Points use the dual (trivector) form::

    (x1, x2, x3)  ->  -x3 e012 + x2 e013 - x1 e023 + e123

Unit quaternions ``(w, x, y, z)`` map to the even element
``w - z e12 + y e13 - x e23``.
"""

from __future__ import annotations

from typing import Literal

import torch
from torch import Tensor

from hpga_dp.pga.errors import (
    DegenerateOrientationError,
    NormalizationError,
    PointAtInfinityError,
)

Kind = Literal["scalar", "direction", "point", "quaternion"]

S, E1, E2, E3 = 0, 2, 3, 4
E12, E13, E23 = 8, 9, 10
E012, E013, E023, E123 = 11, 12, 13, 14

UNIT_TOL = 1e-6
DEGENERATE_TOL = 1e-9


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x if x.is_floating_point() else x.double()
    return torch.as_tensor(x, dtype=torch.float64)


def _zeros(batch: torch.Size, like: Tensor) -> Tensor:
    return torch.zeros(*batch, 16, dtype=like.dtype, device=like.device)


def embed_scalar(s) -> Tensor:
    s = _as_tensor(s)
    mv = _zeros(s.shape, s)
    mv[..., S] = s
    return mv


def embed_direction(v) -> Tensor:
    v = _as_tensor(v)
    mv = _zeros(v.shape[:-1], v)
    mv[..., E1:E3 + 1] = v
    return mv


def embed_point(p) -> Tensor:
    p = _as_tensor(p)
    mv = _zeros(p.shape[:-1], p)
    mv[..., E012] = -p[..., 2]
    mv[..., E013] = p[..., 1]
    mv[..., E023] = -p[..., 0]
    mv[..., E123] = 1.0
    return mv


def embed_quaternion(q, check: bool = True) -> Tensor:
    q = _as_tensor(q)
    if check:
        err = (q.detach().norm(dim=-1) - 1.0).abs()
        if err.numel() and float(err.max()) > UNIT_TOL:
            raise NormalizationError(f"quaternion norm deviates from 1 by {float(err.max()):.3g}")
    mv = _zeros(q.shape[:-1], q)
    mv[..., S] = q[..., 0]
    mv[..., E23] = -q[..., 1]
    mv[..., E13] = q[..., 2]
    mv[..., E12] = -q[..., 3]
    return mv


def extract_scalar(mv: Tensor) -> Tensor:
    return _as_tensor(mv)[..., S]


def extract_direction(mv: Tensor) -> Tensor:
    return _as_tensor(mv)[..., E1:E3 + 1]


def extract_point(mv: Tensor) -> Tensor:
    """Euclidean coordinates of a dual-form point, dividing out its homogeneous weight."""
    mv = _as_tensor(mv)
    weight = mv[..., E123]
    if weight.numel() and float(weight.detach().abs().min()) < DEGENERATE_TOL:
        raise PointAtInfinityError("e123 weight is (numerically) zero")
    coords = torch.stack([-mv[..., E023], mv[..., E013], -mv[..., E012]], dim=-1)
    return coords / weight.unsqueeze(-1)


def extract_quaternion(mv: Tensor) -> Tensor:
    """Unit quaternion ``(w, x, y, z)`` from the normalized {1, e12, e13, e23} part."""
    mv = _as_tensor(mv)
    q = torch.stack([mv[..., S], -mv[..., E23], mv[..., E13], -mv[..., E12]], dim=-1)
    norm = q.norm(dim=-1, keepdim=True)
    if norm.numel() and float(norm.detach().min()) < DEGENERATE_TOL:
        raise DegenerateOrientationError("even part {1, e12, e13, e23} has ~zero norm")
    return q / norm


_EMBED = {
    "scalar": embed_scalar,
    "direction": embed_direction,
    "point": embed_point,
    "quaternion": embed_quaternion,
}
_EXTRACT = {
    "scalar": extract_scalar,
    "direction": extract_direction,
    "point": extract_point,
    "quaternion": extract_quaternion,
}


def embed(value, kind: Kind) -> Tensor:
    try:
        return _EMBED[kind](value)
    except KeyError:
        raise ValueError(f"unknown entity kind {kind!r}") from None


def extract(mv: Tensor, kind: Kind) -> Tensor:
    try:
        fn = _EXTRACT[kind]
    except KeyError:
        raise ValueError(f"unknown entity kind {kind!r}") from None
    return fn(mv)
