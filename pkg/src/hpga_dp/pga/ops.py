"""Batched multivector arithmetic on tensors of shape ``(..., 16)``.

All functions are pure and accept any leading batch shape. Coefficients follow
the layout ``[1, e0, e1, e2, e3, e01, e02, e03, e12, e13, e23, e012, e013,
e023, e123, e0123]``.
"""

from __future__ import annotations

from functools import lru_cache

import torch
from torch import Tensor

from hpga_dp.pga import _tables
from hpga_dp.pga.errors import InvalidGradeError, InvalidVersorError

GRADES = _tables.GRADES
BLADE_NAMES = _tables.BLADE_NAMES
# blades without an e0 factor; the only ones seen by the invariant inner product
EUCLIDEAN_MASK = tuple(0 not in b for b in _tables.BLADES)


def _dense(table) -> list[list[list[float]]]:
    out = [[[0.0] * 16 for _ in range(16)] for _ in range(16)]
    for i, row in enumerate(table):
        for j, (k, s) in enumerate(row):
            if s:
                out[i][j][k] = float(s)
    return out


_GP_DENSE = _dense(_tables.GEOMETRIC)
_OP_DENSE = _dense(_tables.OUTER)


@lru_cache(maxsize=None)
def _table(name: str, dtype: torch.dtype, device: torch.device) -> Tensor:
    if name == "gp":
        data = _GP_DENSE
    elif name == "op":
        data = _OP_DENSE
    elif name == "reverse":
        data = _tables.REVERSE_SIGN
    elif name == "euclidean":
        data = [float(m) for m in EUCLIDEAN_MASK]
    elif name == "dual_sign":
        data = _tables.DUAL_SIGN
    else:  # pragma: no cover
        raise KeyError(name)
    return torch.tensor(data, dtype=dtype, device=device)


def _bilinear(a: Tensor, b: Tensor, table: Tensor) -> Tensor:
    a, b = torch.broadcast_tensors(a, b)
    # (..., i) @ (i, j*k) -> (..., j, k), then contract j with b
    t = (a @ table.reshape(16, 256)).reshape(*a.shape[:-1], 16, 16)
    return (t * b.unsqueeze(-1)).sum(-2)


def geometric_product(a: Tensor, b: Tensor) -> Tensor:
    return _bilinear(a, b, _table("gp", a.dtype, a.device))


def outer_product(a: Tensor, b: Tensor) -> Tensor:
    return _bilinear(a, b, _table("op", a.dtype, a.device))


def inner_product(a: Tensor, b: Tensor) -> Tensor:
    """Invariant inner product: sum of coefficient products over blades without e0."""
    return (a * b * _table("euclidean", a.dtype, a.device)).sum(-1)


def reverse(a: Tensor) -> Tensor:
    return a * _table("reverse", a.dtype, a.device)


def dual(a: Tensor) -> Tensor:
    """Basis-complement dual, signed so that ``blade ^ dual(blade) == e0123``."""
    return a.flip(-1) * _table("dual_sign", a.dtype, a.device).flip(-1)


def join(a: Tensor, b: Tensor) -> Tensor:
    return dual(outer_product(dual(a), dual(b)))


def grade_project(a: Tensor, k: int) -> Tensor:
    if not 0 <= k <= 4:
        raise InvalidGradeError(f"grade must be in 0..4, got {k}")
    mask = torch.tensor([g == k for g in GRADES], dtype=a.dtype, device=a.device)
    return a * mask


def versor_defect(v: Tensor) -> Tensor:
    """Max abs deviation of ``v * reverse(v)`` from the unit scalar, per versor."""
    vv = geometric_product(v, reverse(v))
    one = torch.zeros_like(vv)
    one[..., 0] = 1.0
    return (vv - one).abs().amax(-1)


def sandwich(v: Tensor, a: Tensor, check: bool = True) -> Tensor:
    """Apply the rigid motion encoded by the unit versor ``v`` to ``a``."""
    if check:
        defect = versor_defect(v.detach())
        if defect.numel() and float(defect.max()) > 1e-6:
            raise InvalidVersorError(f"versor is not unit: |v~v - 1| = {float(defect.max()):.3g}")
    return geometric_product(geometric_product(v, a), reverse(v))
