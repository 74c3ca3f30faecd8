"""Training windows cut from demonstration episodes.

Every time step ``t`` of an episode gives one window: observations
``t - H_o + 1 .. t`` (repeating the first frame before the start) and actions
``t .. t + H_p - 1`` (repeating the last action past the end).
"""

from __future__ import annotations

import numpy as np


def episode_arrays(ep: dict) -> dict[str, np.ndarray]:
    obs, act = ep["obs"], ep["act"]
    return {
        "p": np.array([o["p"] for o in obs]),
        "q": np.array([o["q"] for o in obs]),
        "g": np.array([o["g"] for o in obs]),
        "obj_p": np.array([[b["p"] for b in o["objects"]] for o in obs]),
        "obj_q": np.array([[b["q"] for b in o["objects"]] for o in obs]),
        "act_p": np.array([a["p"] for a in act]),
        "act_q": np.array([a["q"] for a in act]),
        "act_g": np.array([a["g"] for a in act]),
    }


OBS_KEYS = ("p", "q", "g", "obj_p", "obj_q")
ACT_KEYS = ("act_p", "act_q", "act_g")


def windows(episodes: list[dict], h_o: int, h_p: int) -> dict[str, np.ndarray]:
    """Stacked windows, keyed like :func:`episode_arrays` with leading ``(N, H)`` axes."""
    parts: dict[str, list[np.ndarray]] = {k: [] for k in OBS_KEYS + ACT_KEYS}
    for ep in episodes:
        arr = episode_arrays(ep)
        n = len(arr["act_g"])
        t = np.arange(n)[:, None]
        obs_idx = np.clip(t + np.arange(-h_o + 1, 1), 0, n - 1)
        act_idx = np.clip(t + np.arange(h_p), 0, n - 1)
        for k in OBS_KEYS:
            parts[k].append(arr[k][obs_idx])
        for k in ACT_KEYS:
            parts[k].append(arr[k][act_idx])
    return {k: np.concatenate(v) for k, v in parts.items()}


def history_arrays(histories) -> dict[str, np.ndarray]:
    """Arrays for a batch of observation-frame histories (policy inference)."""
    return {
        "p": np.array([[f.p for f in h] for h in histories]),
        "q": np.array([[f.q for f in h] for h in histories]),
        "g": np.array([[f.g for f in h] for h in histories]),
        "obj_p": np.array([[[o[0] for o in f.objects] for f in h] for h in histories]),
        "obj_q": np.array([[[o[1] for o in f.objects] for f in h] for h in histories]),
    }
