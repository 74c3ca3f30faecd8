"""Kinematic toy manipulation tasks, scripted experts and demonstration files.

States are immutable; ``env_step`` returns a new state and depends only on
its arguments. Quaternions are ``(w, x, y, z)`` arrays, positions are meters.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
TASKS = ("point_reach", "lift_toy")

CUBE_HALF = 0.02
PREGRASP_HEIGHT = 0.08
LIFT_MARGIN = 0.03


@dataclass(frozen=True)
class TaskSpec:
    name: str
    eps_p: float = 0.02
    eps_q: float = 0.2
    lift_h: float = 0.10
    grasp_radius: float = 0.03
    step_cap: float = 0.02
    rot_cap: float = 0.1
    max_steps: int = 200
    low: tuple[float, float, float] = (-0.25, -0.25, 0.0)
    high: tuple[float, float, float] = (0.25, 0.25, 0.3)

    def __post_init__(self):
        if self.name not in TASKS:
            raise ValueError(f"unknown task {self.name!r}; expected one of {TASKS}")
        if min(self.eps_p, self.eps_q, self.lift_h, self.grasp_radius, self.step_cap,
               self.rot_cap) <= 0:
            raise ValueError("tolerances and caps must be positive")
        if any(h <= l for l, h in zip(self.low, self.high)):
            raise ValueError("workspace bounds are degenerate")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @property
    def n_objects(self) -> int:
        return 1


def make_task(name: str, **overrides) -> TaskSpec:
    return TaskSpec(name, **overrides)


@dataclass(frozen=True, eq=False)
class EnvState:
    ee_p: np.ndarray
    ee_q: np.ndarray
    g: float
    obj_p: np.ndarray  # (J, 3)
    obj_q: np.ndarray  # (J, 4)
    target_p: np.ndarray
    target_q: np.ndarray
    step: int = 0
    attached: bool = False
    # object pose in the end-effector frame while attached
    grip_p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    grip_q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))
    obj_z0: float = 0.0

    def same_pose(self, other: "EnvState") -> bool:
        pairs = [(self.ee_p, other.ee_p), (self.ee_q, other.ee_q), (self.obj_p, other.obj_p),
                 (self.obj_q, other.obj_q), (self.target_p, other.target_p),
                 (self.target_q, other.target_q)]
        return (all(np.array_equal(a, b) for a, b in pairs) and self.g == other.g
                and self.attached == other.attached)


@dataclass(frozen=True)
class Action:
    p: np.ndarray
    q: np.ndarray
    g: float


# ------------------------------------------------------------------ quaternions


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return q * np.array([1.0, -1, -1, -1])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return quat_mul(quat_mul(q, np.concatenate([[0.0], v])), quat_conj(q))[1:]


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def canonical(q: np.ndarray) -> np.ndarray:
    q = q / np.linalg.norm(q)
    return -q if q[0] < 0 else q


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic rotation angle between two orientations, in [0, pi]."""
    d = min(abs(float(np.dot(a, b))), 1.0)
    return 2.0 * float(np.arccos(d))


def slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    d = float(np.dot(a, b))
    if d < 0:
        b, d = -b, -d
    if d > 1 - 1e-12:
        out = a + t * (b - a)
    else:
        theta = np.arccos(d)
        out = (np.sin((1 - t) * theta) * a + np.sin(t * theta) * b) / np.sin(theta)
    return canonical(out)


def rotate_toward(a: np.ndarray, b: np.ndarray, cap: float) -> np.ndarray:
    ang = quat_angle(a, b)
    if ang <= cap:
        return canonical(b)
    return slerp(a, b, cap / ang)


def move_toward(p: np.ndarray, goal: np.ndarray, cap: float) -> np.ndarray:
    delta = goal - p
    dist = float(np.linalg.norm(delta))
    if dist <= cap:
        return goal.copy()
    return p + delta * (cap / dist)


# ------------------------------------------------------------------ dynamics


def _random_orientation(rng: np.random.Generator, tilt: float) -> np.ndarray:
    yaw = rng.uniform(-np.pi / 2, np.pi / 2)
    q = quat_from_axis_angle([0, 0, 1], yaw)
    if tilt > 0:
        axis = np.array([*rng.normal(size=2), 0.0])
        q = quat_mul(quat_from_axis_angle(axis, rng.uniform(0, tilt)), q)
    return canonical(q)


def env_reset(spec: TaskSpec, seed: int) -> EnvState:
    rng = np.random.default_rng(seed)
    low, high = np.array(spec.low), np.array(spec.high)
    ee_p = rng.uniform(low + [0, 0, 0.1], high)
    ee_q = canonical(quat_from_axis_angle([0, 0, 1], rng.uniform(-0.3, 0.3)))
    if spec.name == "point_reach":
        target_p = rng.uniform(low + [0, 0, 0.05], high)
        target_q = _random_orientation(rng, 0.3)
        return EnvState(ee_p, ee_q, 1.0, target_p[None].copy(), target_q[None].copy(),
                        target_p, target_q)
    cube_p = np.array([*rng.uniform(low[:2] + 0.05, high[:2] - 0.05), low[2] + CUBE_HALF])
    cube_q = _random_orientation(rng, 0.0)
    target_p = cube_p + [0, 0, spec.lift_h]
    return EnvState(ee_p, ee_q, 1.0, cube_p[None], cube_q[None], target_p, cube_q,
                    obj_z0=float(cube_p[2]))


def env_step(state: EnvState, spec: TaskSpec, action: Action) -> EnvState:
    g = float(np.clip(action.g, 0.0, 1.0))
    ee_p = np.clip(move_toward(state.ee_p, np.asarray(action.p, float), spec.step_cap),
                   spec.low, spec.high)
    ee_q = rotate_toward(state.ee_q, canonical(np.asarray(action.q, float)), spec.rot_cap)
    obj_p, obj_q = state.obj_p, state.obj_q
    attached, grip_p, grip_q = state.attached, state.grip_p, state.grip_q
    if spec.name == "lift_toy":
        if attached and g >= 0.5:
            attached = False
        elif (not attached and g < 0.5
              and np.linalg.norm(obj_p[0] - ee_p) < spec.grasp_radius):
            attached = True
            inv = quat_conj(ee_q)
            grip_p = quat_rotate(inv, obj_p[0] - ee_p)
            grip_q = quat_mul(inv, obj_q[0])
        if attached:
            obj_p = (ee_p + quat_rotate(ee_q, grip_p))[None]
            obj_q = canonical(quat_mul(ee_q, grip_q))[None]
    return replace(state, ee_p=ee_p, ee_q=ee_q, g=g, obj_p=obj_p, obj_q=obj_q,
                   step=state.step + 1, attached=attached, grip_p=grip_p, grip_q=grip_q)


def check_success(state: EnvState, spec: TaskSpec) -> bool:
    if spec.name == "point_reach":
        return bool(np.linalg.norm(state.ee_p - state.target_p) < spec.eps_p
                    and quat_angle(state.ee_q, state.target_q) < spec.eps_q)
    return bool(state.obj_p[0, 2] - state.obj_z0 > spec.lift_h)


def scripted_expert(state: EnvState, spec: TaskSpec) -> Action:
    """Capped straight-line waypoint toward the current subgoal with slerped orientation."""
    if spec.name == "point_reach":
        goal_p, goal_q, g = state.target_p, state.target_q, 1.0
    else:
        cube_p, cube_q = state.obj_p[0], state.obj_q[0]
        above = cube_p + [0, 0, PREGRASP_HEIGHT]
        aligned = quat_angle(state.ee_q, cube_q) < 1e-6
        over = np.linalg.norm(state.ee_p[:2] - cube_p[:2]) < 1e-6
        if state.attached:
            goal_p = np.array([*state.ee_p[:2], state.obj_z0 + spec.lift_h + LIFT_MARGIN])
            goal_q, g = state.ee_q, 0.0
        elif np.linalg.norm(state.ee_p - cube_p) < 1e-6 and aligned:
            goal_p, goal_q, g = cube_p, cube_q, 0.0
        elif over and aligned:
            goal_p, goal_q, g = cube_p, cube_q, 1.0
        else:
            goal_p, goal_q, g = above, cube_q, 1.0
    p = move_toward(state.ee_p, np.asarray(goal_p, float), spec.step_cap)
    q = rotate_toward(state.ee_q, goal_q, spec.rot_cap)
    return Action(p, q, g)


# ------------------------------------------------------------------ episodes


def observe(state: EnvState) -> dict:
    return {
        "p": state.ee_p.tolist(),
        "q": canonical(state.ee_q).tolist(),
        "g": float(state.g),
        "objects": [{"p": p.tolist(), "q": canonical(q).tolist()}
                    for p, q in zip(state.obj_p, state.obj_q)],
    }


def _action_record(a: Action) -> dict:
    return {"p": np.asarray(a.p, float).tolist(), "q": canonical(np.asarray(a.q, float)).tolist(),
            "g": float(a.g)}


def hold_action(state: EnvState) -> Action:
    return Action(state.ee_p.copy(), state.ee_q.copy(), state.g)


def run_expert(spec: TaskSpec, seed: int, min_length: int = 18) -> dict:
    """One expert episode, padded with hold frames up to ``min_length``."""
    state = env_reset(spec, seed)
    obs, act = [], []
    success = False
    while state.step < spec.max_steps and not success:
        a = scripted_expert(state, spec)
        obs.append(observe(state))
        act.append(_action_record(a))
        state = env_step(state, spec, a)
        success = check_success(state, spec)
    while len(act) < min_length:
        a = hold_action(state)
        obs.append(observe(state))
        act.append(_action_record(a))
        state = env_step(state, spec, a)
    return {"seed": seed, "success": success, "obs": obs, "act": act}


def replay(spec: TaskSpec, episode: dict) -> bool:
    """Open-loop replay of stored actions; true if success is reached at any step."""
    state = env_reset(spec, episode["seed"])
    for a in episode["act"]:
        state = env_step(state, spec, Action(np.array(a["p"]), np.array(a["q"]), a["g"]))
        if check_success(state, spec):
            return True
    return False


def episode_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.default_rng(seed).integers(0, 2**31 - 1, size=n)]


def generate_dataset(spec: TaskSpec, n_episodes: int, seed: int, out_path: str | Path,
                     min_length: int = 18) -> Path:
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    header = {"schema": SCHEMA_VERSION, "task": spec.name, "seed": seed,
              "episodes": n_episodes, "spec": asdict(spec)}
    lines = [json.dumps(header, sort_keys=True)]
    for s in episode_seeds(seed, n_episodes):
        lines.append(json.dumps(run_expert(spec, s, min_length), sort_keys=True))
    out = Path(out_path)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def load_dataset(path: str | Path) -> tuple[dict, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if not records or records[0].get("schema") != SCHEMA_VERSION:
        raise ValueError(f"{path}: missing or unsupported header")
    header, episodes = records[0], records[1:]
    if len(episodes) != header["episodes"]:
        raise ValueError(f"{path}: header says {header['episodes']} episodes, found {len(episodes)}")
    return header, episodes


def spec_from_header(header: dict) -> TaskSpec:
    fields = dict(header["spec"])
    fields["low"], fields["high"] = tuple(fields["low"]), tuple(fields["high"])
    return TaskSpec(**fields)
