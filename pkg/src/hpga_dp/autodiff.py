"""Tapes, parameter groups, finite-difference gradchecks and checkpoints.

The reverse-mode engine underneath is torch autograd. :class:`Tape` adds the
explicit forward/backward protocol with shape and ordering checks that the
training code relies on, and :class:`ModelParams` gives the named flat views
used for optimisation and serialization.

Checkpoint format (little-endian throughout)::

    magic   8 bytes   b"HPGACKPT"
    version u32       currently 1
    meta    u32 length + UTF-8 JSON  {"groups": [[group, [[name, shape], ...]], ...], "extra": {...}}
    data    float32 values for every tensor, in the order listed in meta
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import torch
from torch import Tensor, nn

from hpga_dp import pgatr
from hpga_dp.pga import ops

MAGIC = b"HPGACKPT"
VERSION = 1


class TapeOrderError(RuntimeError):
    pass


class TapeShapeError(ValueError):
    pass


class Tape:
    """A recorded computation ``fn(*inputs, *params)`` with a single backward pass."""

    def __init__(self, fn: Callable[..., Tensor], input_shapes: Sequence[tuple[int, ...]],
                 params: Sequence[Tensor] = ()):
        self.fn = fn
        self.input_shapes = [tuple(s) for s in input_shapes]
        self.params = list(params)
        self._inputs: list[Tensor] | None = None
        self._output: Tensor | None = None

    def forward(self, *inputs: Tensor) -> Tensor:
        if len(inputs) != len(self.input_shapes):
            raise TapeShapeError(f"expected {len(self.input_shapes)} inputs, got {len(inputs)}")
        for x, shape in zip(inputs, self.input_shapes):
            if tuple(x.shape) != shape:
                raise TapeShapeError(f"input shape {tuple(x.shape)} does not match {shape}")
        self._inputs = [x.detach().requires_grad_(True) for x in inputs]
        self._output = self.fn(*self._inputs, *self.params)
        return self._output.detach()

    def backward(self, seed: Tensor | None = None) -> tuple[list[Tensor], list[Tensor]]:
        """Vector-Jacobian product with ``seed``; returns (input grads, param grads)."""
        if self._output is None:
            raise TapeOrderError("backward called before forward")
        out = self._output
        if seed is None:
            seed = torch.ones_like(out)
        if seed.shape != out.shape:
            raise TapeShapeError(f"seed shape {tuple(seed.shape)} does not match {tuple(out.shape)}")
        leaves = self._inputs + self.params
        grads = torch.autograd.grad(out, leaves, seed, allow_unused=True)
        grads = [torch.zeros_like(l) if g is None else g for l, g in zip(leaves, grads)]
        self._output = None
        n = len(self._inputs)
        return grads[:n], grads[n:]


# ------------------------------------------------------------------ parameters


GROUPS = ("encoder", "denoiser", "decoder")


class ModelParams:
    """Named parameter groups over one or more modules."""

    def __init__(self, groups: Mapping[str, nn.Module | None]):
        self.modules = {name: mod for name, mod in groups.items() if mod is not None}

    def named(self, group: str) -> list[tuple[str, nn.Parameter]]:
        return list(self.modules[group].named_parameters())

    def groups(self) -> list[str]:
        return list(self.modules)

    def parameters(self, group: str | None = None) -> list[nn.Parameter]:
        names = [group] if group else self.groups()
        return [p for g in names for _, p in self.named(g)]

    def count(self, group: str | None = None) -> int:
        return sum(p.numel() for p in self.parameters(group))

    def flat(self, group: str) -> Tensor:
        return torch.cat([p.detach().reshape(-1) for p in self.parameters(group)])

    def flat_grad(self, group: str) -> Tensor:
        return torch.cat([
            (torch.zeros_like(p) if p.grad is None else p.grad).reshape(-1)
            for p in self.parameters(group)
        ])

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


def make_optimizer(params: ModelParams, lr: float = 1e-4, betas=(0.9, 0.999),
                   weight_decay: float = 1e-6) -> torch.optim.AdamW:
    return torch.optim.AdamW(params.parameters(), lr=lr, betas=betas, weight_decay=weight_decay)


# ------------------------------------------------------------------ checkpoints


def save_checkpoint(path: str | Path, params: ModelParams, extra: dict | None = None) -> None:
    layout = [[g, [[name, list(p.shape)] for name, p in params.named(g)]] for g in params.groups()]
    meta = json.dumps({"groups": layout, "extra": extra or {}}, sort_keys=True).encode()
    chunks = [MAGIC, struct.pack("<II", VERSION, len(meta)), meta]
    for g in params.groups():
        for _, p in params.named(g):
            chunks.append(p.detach().cpu().numpy().astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_checkpoint(path: str | Path) -> tuple[dict[str, dict[str, np.ndarray]], dict]:
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint")
    version, n_meta = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    meta = json.loads(blob[16:16 + n_meta])
    offset = 16 + n_meta
    groups: dict[str, dict[str, np.ndarray]] = {}
    for g, entries in meta["groups"]:
        groups[g] = {}
        for name, shape in entries:
            n = math.prod(shape)
            groups[g][name] = np.frombuffer(blob, "<f4", n, offset).reshape(shape)
            offset += 4 * n
    if offset != len(blob):
        raise ValueError(f"{path}: trailing bytes")
    return groups, meta["extra"]


def load_checkpoint(path: str | Path, params: ModelParams) -> dict:
    groups, extra = read_checkpoint(path)
    with torch.no_grad():
        for g in params.groups():
            stored = groups[g]
            for name, p in params.named(g):
                if name not in stored or tuple(stored[name].shape) != tuple(p.shape):
                    raise ValueError(f"checkpoint mismatch at {g}.{name}")
                p.copy_(torch.from_numpy(stored[name].copy()))
    return extra


# ------------------------------------------------------------------ gradcheck


@dataclass(frozen=True)
class GradReport:
    op: str
    max_rel_err: float
    passed: bool


@dataclass
class _Op:
    fn: Callable[[list[Tensor]], Tensor]
    sample: Callable[[torch.Generator], list[Tensor]]


_REGISTRY: dict[str, _Op] = {}


def register(name: str, sample: Callable[[torch.Generator], list[Tensor]]):
    """Decorator registering ``fn(*tensors) -> Tensor`` with a sampler of smooth inputs."""

    def deco(fn):
        _REGISTRY[name] = _Op(lambda xs: fn(*xs), sample)
        return fn

    return deco


def registered() -> list[str]:
    return sorted(_REGISTRY)


def numeric_vjp(fn: Callable[[list[Tensor]], Tensor], xs: list[Tensor], seed: Tensor,
                h: float = 1e-6, max_coords: int | None = None,
                gen: torch.Generator | None = None) -> list[tuple[Tensor, Tensor]]:
    """Central differences of ``<seed, fn(xs)>``; returns (coordinate indices, values) per input."""
    out = []
    with torch.no_grad():
        for x in xs:
            flat = x.view(-1)
            idx = torch.arange(flat.numel())
            if max_coords is not None and flat.numel() > max_coords:
                idx = torch.randperm(flat.numel(), generator=gen)[:max_coords].sort().values
            vals = torch.empty(len(idx), dtype=x.dtype)
            for n, i in enumerate(idx.tolist()):
                orig = flat[i].item()
                flat[i] = orig + h
                plus = fn(xs).clone()
                flat[i] = orig - h
                minus = fn(xs).clone()
                # the exactly representable step actually taken
                step = (orig + h) - (orig - h)
                flat[i] = orig
                vals[n] = ((plus - minus) / step * seed).sum()
            out.append((idx, vals))
    return out


def compare_gradients(fn: Callable[[list[Tensor]], Tensor], xs: list[Tensor],
                      gen: torch.Generator, h: float = 1e-6,
                      max_coords: int | None = 64) -> float:
    """Relative error ``|g_ad - g_fd| / max(|g_fd|, 1e-8)`` over sampled coordinates, normwise."""
    xs = [x.detach().clone().requires_grad_(True) for x in xs]
    y = fn(xs)
    seed = torch.randn(y.shape, generator=gen, dtype=y.dtype)
    analytic = torch.autograd.grad(y, xs, seed, allow_unused=True)
    analytic = [torch.zeros_like(x) if g is None else g for x, g in zip(xs, analytic)]
    plain = [x.detach().clone() for x in xs]
    numeric = numeric_vjp(fn, plain, seed, h, max_coords, gen)
    num_sq = diff_sq = 0.0
    for g_ad, (idx, g_fd) in zip(analytic, numeric):
        a = g_ad.reshape(-1)[idx]
        diff_sq += float(((a - g_fd) ** 2).sum())
        num_sq += float((g_fd ** 2).sum())
    return math.sqrt(diff_sq) / max(math.sqrt(num_sq), 1e-8)


def gradcheck(op_name: str, trials: int = 20, tol: float = 1e-4, seed: int = 0) -> GradReport:
    if op_name not in _REGISTRY:
        raise KeyError(f"unknown op {op_name!r}; registered: {registered()}")
    op = _REGISTRY[op_name]
    gen = torch.Generator().manual_seed(seed)
    worst = 0.0
    for _ in range(trials):
        worst = max(worst, compare_gradients(op.fn, op.sample(gen), gen))
    return GradReport(op_name, worst, worst <= tol)


# ------------------------------------------------------------------ registered primitives

F64 = torch.float64


def _mv(gen, *shape):
    return torch.randn(*shape, 16, generator=gen, dtype=F64)


def _weights(gen, out_ch, in_ch):
    return torch.randn(out_ch, in_ch, 9, generator=gen, dtype=F64) / math.sqrt(in_ch)


def _smooth_gelu_input(gen, *shape):
    # rejection: keep the gating scalar away from the GELU kink region
    while True:
        x = _mv(gen, *shape)
        if x[..., 0].abs().min() > 0.1:
            return x


def _nondegenerate(gen, *shape):
    while True:
        x = _mv(gen, *shape)
        if ops.inner_product(x, x).mean(-1).min() > 0.1:
            return x


register("identity", lambda g: [_mv(g, 3)])(lambda x: x)
register("geometric_product", lambda g: [_mv(g, 4), _mv(g, 4)])(ops.geometric_product)
register("outer_product", lambda g: [_mv(g, 4), _mv(g, 4)])(ops.outer_product)
register("join", lambda g: [_mv(g, 4), _mv(g, 4)])(ops.join)
register("dual", lambda g: [_mv(g, 4)])(ops.dual)
register("reverse", lambda g: [_mv(g, 4)])(ops.reverse)
register("inner_product", lambda g: [_mv(g, 4), _mv(g, 4)])(ops.inner_product)
register("grade_project", lambda g: [_mv(g, 4)])(lambda x: ops.grade_project(x, 2))
register("sandwich", lambda g: [_mv(g, 4), _mv(g, 4)])(
    lambda v, x: ops.sandwich(v, x, check=False))
register("equi_linear", lambda g: [_weights(g, 3, 2), _mv(g, 2, 2)])(pgatr.equi_linear)
register("geometric_bilinear",
         lambda g: [_mv(g, 2, 2), _mv(g, 2, 2), _mv(g, 2, 1), _weights(g, 2, 4)])(
    pgatr.geometric_bilinear)
register("mv_attention", lambda g: [_mv(g, 3, 4), _mv(g, 3, 4), _mv(g, 3, 4)])(
    lambda q, k, v: pgatr.mv_attention(q, k, v, n_heads=2))
register("gated_gelu", lambda g: [_smooth_gelu_input(g, 2, 3)])(pgatr.gated_gelu)
register("equi_layernorm", lambda g: [_nondegenerate(g, 2, 3)])(pgatr.equi_layernorm)


def module_fn(module: nn.Module) -> tuple[Callable[[list[Tensor]], Tensor], list[Tensor]]:
    """Wrap a module as ``fn([x, *params])`` for gradchecks over inputs and weights."""
    names = [n for n, _ in module.named_parameters()]
    values = [p.detach().clone() for _, p in module.named_parameters()]

    def fn(xs: list[Tensor]) -> Tensor:
        return torch.func.functional_call(module, dict(zip(names, xs[1:])), (xs[0],))

    return fn, values


def check_module(module: nn.Module, inputs: Iterable[Tensor], seed: int = 0,
                 max_coords: int = 32) -> float:
    """Worst gradcheck error of ``module`` over a sequence of input tensors."""
    fn, values = module_fn(module)
    gen = torch.Generator().manual_seed(seed)
    return max(compare_gradients(fn, [x, *values], gen, max_coords=max_coords) for x in inputs)
