"""Observation/action packing and receding-horizon execution."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
import torch
from torch import Tensor

from hpga_dp import envs
from hpga_dp.pga import conversions as cv
from hpga_dp.pga.errors import DegenerateOrientationError, PointAtInfinityError

K_A = 3
H_O, H_P, H_A = 2, 16, 8


def k_obs(n_objects: int) -> int:
    return 3 + 2 * n_objects


@dataclass(frozen=True, eq=False)
class ObservationFrame:
    p: np.ndarray
    q: np.ndarray
    g: float
    objects: tuple[tuple[np.ndarray, np.ndarray], ...] = ()

    @classmethod
    def from_record(cls, rec: dict) -> "ObservationFrame":
        objs = tuple((np.asarray(o["p"], float), np.asarray(o["q"], float))
                     for o in rec["objects"])
        return cls(np.asarray(rec["p"], float), np.asarray(rec["q"], float), float(rec["g"]), objs)


@dataclass(frozen=True, eq=False)
class ActionFrame:
    p: np.ndarray
    q: np.ndarray
    g: float

    def to_env(self) -> envs.Action:
        return envs.Action(self.p, self.q, self.g)


# ------------------------------------------------------------------ packing


def pack_arrays(p: Tensor, q: Tensor, g: Tensor, obj_p: Tensor, obj_q: Tensor,
                check: bool = True) -> Tensor:
    """Batched packing: ``p (...,3), q (...,4), g (...), obj_p (...,J,3), obj_q (...,J,4)``
    to ``(..., 3 + 2J, 16)``."""
    robot = [cv.embed_point(p), cv.embed_quaternion(q, check), cv.embed_scalar(g)]
    objs = torch.stack([cv.embed_point(obj_p), cv.embed_quaternion(obj_q, check)], dim=-2)
    return torch.cat([torch.stack(robot, dim=-2), objs.flatten(-3, -2)], dim=-2)


def pack_action_arrays(p: Tensor, q: Tensor, g: Tensor, check: bool = True) -> Tensor:
    return torch.stack([cv.embed_point(p), cv.embed_quaternion(q, check), cv.embed_scalar(g)],
                       dim=-2)


def pack_observation(history: Sequence[ObservationFrame], h_o: int | None = None,
                     n_objects: int | None = None) -> Tensor:
    """``(H_o, 3 + 2J, 16)`` stack from the last ``H_o`` frames."""
    if h_o is not None and len(history) != h_o:
        raise ValueError(f"expected {h_o} frames, got {len(history)}")
    if not history:
        raise ValueError("empty history")
    n_obj = len(history[0].objects) if n_objects is None else n_objects
    if any(len(f.objects) != n_obj for f in history):
        raise ValueError(f"every frame must carry {n_obj} objects")
    t = lambda xs: torch.as_tensor(np.array(xs), dtype=torch.float64)
    return pack_arrays(
        t([f.p for f in history]), t([f.q for f in history]), t([f.g for f in history]),
        t([[o[0] for o in f.objects] for f in history]).reshape(len(history), n_obj, 3),
        t([[o[1] for o in f.objects] for f in history]).reshape(len(history), n_obj, 4),
    )


def pack_actions(actions: Sequence[ActionFrame]) -> Tensor:
    t = lambda xs: torch.as_tensor(np.array(xs), dtype=torch.float64)
    return pack_action_arrays(t([a.p for a in actions]), t([a.q for a in actions]),
                              t([a.g for a in actions]))


def unpack_action_arrays(x_a: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    if x_a.shape[-2:] != (K_A, 16):
        raise ValueError(f"expected (..., {K_A}, 16), got {tuple(x_a.shape)}")
    p = cv.extract_point(x_a[..., 0, :])
    q = cv.extract_quaternion(x_a[..., 1, :])
    g = cv.extract_scalar(x_a[..., 2, :]).clamp(0.0, 1.0)
    return p, q, g


def unpack_actions(x_a: Tensor) -> list[ActionFrame]:
    p, q, g = unpack_action_arrays(x_a)
    return [ActionFrame(pi.numpy(), qi.numpy(), float(gi))
            for pi, qi, gi in zip(p.double(), q.double(), g.double())]


# ------------------------------------------------------------------ rollouts


class Policy(Protocol):
    def act(self, histories: list[list[ObservationFrame]], seed: int) -> list[list[ActionFrame]]:
        """One action chunk per history."""


@dataclass
class RolloutResult:
    success: bool
    steps: int
    observations: list[dict] = field(default_factory=list)
    actions: list[dict] = field(default_factory=list)


def _frame(state: envs.EnvState) -> ObservationFrame:
    return ObservationFrame.from_record(envs.observe(state))


def rollout_batch(policy: Policy, spec: envs.TaskSpec, seeds: Sequence[int], h_o: int = H_O,
                  h_a: int = H_A, max_steps: int | None = None, policy_seed: int = 0,
                  h_p: int | None = None) -> list[RolloutResult]:
    """Lock-step receding-horizon rollouts of independent environments.

    Every ``h_a`` steps the still-running environments are replanned together;
    each replan uses a seed derived from ``policy_seed`` and the replan index.
    """
    if h_p is not None and h_a > h_p:
        raise ValueError(f"H_a={h_a} exceeds H_p={h_p}")
    max_steps = spec.max_steps if max_steps is None else max_steps
    states = [envs.env_reset(spec, s) for s in seeds]
    hist = [deque([_frame(s)] * h_o, maxlen=h_o) for s in states]
    results = [RolloutResult(False, 0) for _ in seeds]
    running = list(range(len(seeds)))
    replan = 0
    while running:
        chunks = policy.act([list(hist[i]) for i in running], policy_seed * 100_003 + replan)
        replan += 1
        still = []
        for i, chunk in zip(running, chunks):
            res = results[i]
            for a in chunk[:h_a]:
                res.observations.append(envs.observe(states[i]))
                res.actions.append({"p": list(map(float, a.p)), "q": list(map(float, a.q)),
                                    "g": float(a.g)})
                states[i] = envs.env_step(states[i], spec, a.to_env())
                hist[i].append(_frame(states[i]))
                res.steps += 1
                if envs.check_success(states[i], spec):
                    res.success = True
                    break
                if res.steps >= max_steps:
                    break
            if not res.success and res.steps < max_steps:
                still.append(i)
        running = still
    return results


def rollout(policy: Policy, spec: envs.TaskSpec, seed: int, h_o: int = H_O, h_a: int = H_A,
            max_steps: int | None = None, policy_seed: int = 0) -> RolloutResult:
    return rollout_batch(policy, spec, [seed], h_o, h_a, max_steps, policy_seed)[0]


class ExpertPolicy:
    """Scripted expert driven from observations alone (reconstructs the task state)."""

    def __init__(self, spec: envs.TaskSpec, h_p: int = H_P):
        self.spec, self.h_p = spec, h_p

    def _state(self, f: ObservationFrame) -> envs.EnvState:
        obj_p = np.array([o[0] for o in f.objects])
        obj_q = np.array([o[1] for o in f.objects])
        if self.spec.name == "point_reach":
            return envs.EnvState(f.p, f.q, f.g, obj_p, obj_q, obj_p[0], obj_q[0])
        z0 = envs.CUBE_HALF + self.spec.low[2]
        attached = f.g < 0.5 and np.linalg.norm(obj_p[0] - f.p) < self.spec.grasp_radius
        return envs.EnvState(f.p, f.q, f.g, obj_p, obj_q, obj_p[0], obj_q[0],
                             attached=attached, obj_z0=z0)

    def act(self, histories, seed):
        out = []
        for h in histories:
            state = self._state(h[-1])
            chunk = []
            for _ in range(self.h_p):
                a = envs.scripted_expert(state, self.spec)
                chunk.append(ActionFrame(a.p, a.q, a.g))
                state = envs.env_step(state, self.spec, a)
            out.append(chunk)
        return out


def safe_unpack(x_a: Tensor, fallback: Callable[[], list[ActionFrame]]) -> list[ActionFrame]:
    """Unpack, or use ``fallback`` when a predicted point or orientation is degenerate."""
    try:
        return unpack_actions(x_a)
    except (PointAtInfinityError, DegenerateOrientationError):
        return fallback()
