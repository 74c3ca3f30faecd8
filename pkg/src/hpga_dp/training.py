"""Training loop, metrics files and success-rate evaluation."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from hpga_dp import autodiff, dataset, diffusion, envs
from hpga_dp import policy as pol
from hpga_dp.backbones import count_parameters
from hpga_dp.config import RunConfig
from hpga_dp.models import (
    BaselinePolicy,
    build_model,
    dataset_stats,
    matched_baseline_widths,
    workspace_normalization,
)

METRIC_COLUMNS = ("epoch", "l_ed", "l_dec", "l_total", "wall_s")
EVAL_COLUMNS = ("variant", "eta", "trial", "success_rate", "epochs_trained")

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def normalization_extra(cfg: RunConfig, spec: envs.TaskSpec, win: dict) -> dict:
    if cfg.variant.startswith("hpga"):
        center, scale = workspace_normalization(spec.low, spec.high)
        return {"center": center.tolist(), "scale": scale}
    stats = dataset_stats(BaselinePolicy.raw_obs(win), BaselinePolicy.raw_actions(win))
    return {k: v.tolist() for k, v in stats.items()}


def build_for_run(cfg: RunConfig, extra: dict, seed: int):
    """Model for ``cfg`` with deterministic initialization from ``seed``."""
    mcfg = cfg.model_config()
    if cfg.variant.startswith("baseline") and cfg.variant.endswith("_u") and cfg.match_params:
        ref_cfg = mcfg.__class__(**{**mcfg.__dict__, "variant": "hpga_u"})
        torch.manual_seed(seed)
        ref = build_model(ref_cfg, {"center": [0, 0, 0], "scale": 1.0})
        widths = matched_baseline_widths(mcfg, count_parameters(ref.denoiser))
        mcfg = mcfg.__class__(**{**mcfg.__dict__, "unet_widths": widths})
    torch.manual_seed(seed)
    model = build_model(mcfg, extra)
    return model.to(_DTYPES[cfg.dtype])


class ModelPolicy:
    """Adapter from a trained model to :class:`hpga_dp.policy.Policy`."""

    def __init__(self, model, schedule: diffusion.NoiseSchedule, dtype=torch.float32):
        self.model, self.schedule, self.dtype = model, schedule, dtype

    def act(self, histories, seed):
        arrays = dataset.history_arrays(histories)
        obs = self.model.obs_tensor(arrays).to(self.dtype)
        x = diffusion.sample_actions(self.model, obs, self.schedule, seed)
        out = []
        for i, h in enumerate(histories):
            try:
                p, q, g = self.model.action_arrays(x[i])
                out.append([pol.ActionFrame(pi.numpy(), qi.numpy(), float(gi))
                            for pi, qi, gi in zip(p, q, g)])
            except (ValueError, ArithmeticError):
                last = h[-1]
                out.append([pol.ActionFrame(last.p, last.q, last.g)])
        return out


def evaluate(model, cfg: RunConfig, schedule: diffusion.NoiseSchedule, n_rollouts: int,
             seed: int) -> float:
    spec = envs.make_task(cfg.task)
    seeds = envs.episode_seeds(seed, n_rollouts)
    model.eval()
    policy = ModelPolicy(model, schedule, _DTYPES[cfg.dtype])
    results = pol.rollout_batch(policy, spec, seeds, cfg.h_o, cfg.h_a, policy_seed=seed,
                                h_p=cfg.h_p)
    model.train()
    return sum(r.success for r in results) / n_rollouts


@dataclass
class RunResult:
    model: object
    params: autodiff.ModelParams
    metrics: list[dict] = field(default_factory=list)
    evals: list[tuple[int, float]] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def train(cfg: RunConfig, episodes: list[dict], seed: int, epochs: int | None = None,
          eval_every: int | None = None, log=None, stop_at: float | None = None) -> RunResult:
    """Train one model; optionally evaluate every ``eval_every`` epochs.

    With ``stop_at`` set, training ends at the first evaluation reaching that
    success rate.
    """
    epochs = cfg.epochs if epochs is None else epochs
    eval_every = cfg.eval_every if eval_every is None else eval_every
    dtype = _DTYPES[cfg.dtype]
    spec = envs.make_task(cfg.task)
    win = dataset.windows(episodes, cfg.h_o, cfg.h_p)
    extra = normalization_extra(cfg, spec, win)
    model = build_for_run(cfg, extra, seed)
    obs = model.obs_tensor(win).to(dtype)
    target = model.action_tensor(win).to(dtype)
    params = autodiff.ModelParams(model.groups())
    opt = autodiff.make_optimizer(params, cfg.lr, weight_decay=cfg.weight_decay)
    schedule = diffusion.make_schedule(cfg.k_max, cfg.schedule)
    k_thresh = diffusion.k_threshold(cfg.eta, cfg.k_max)
    gen = torch.Generator().manual_seed(seed)
    result = RunResult(model, params, extra=extra)
    n = obs.shape[0]
    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        perm = torch.randperm(n, generator=gen)
        sums = np.zeros(3)
        steps = 0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            losses = diffusion.train_step(model, opt, obs[idx], target[idx], schedule, k_thresh,
                                          gen, use_decoder=model.has_decoder,
                                          noise_latent=cfg.noise_latent)
            sums += [losses.l_ed.item(), losses.l_dec.item(), losses.total.item()]
            steps += 1
        l_ed, l_dec, l_total = sums / steps
        row = {"epoch": epoch, "l_ed": l_ed, "l_dec": l_dec, "l_total": l_total,
               "wall_s": time.perf_counter() - t0}
        result.metrics.append(row)
        if log:
            log(f"epoch {epoch} l_ed={l_ed:.5f} l_dec={l_dec:.5f} ({row['wall_s']:.1f}s)")
        if eval_every and epoch % eval_every == 0:
            rate = evaluate(model, cfg, schedule, cfg.eval_rollouts, cfg.eval_seed)
            result.evals.append((epoch, rate))
            if log:
                log(f"epoch {epoch} success={rate:.2f}")
            if stop_at is not None and rate >= stop_at:
                break
    return result


def metrics_csv(cfg: RunConfig, rows: list[dict]) -> str:
    """CSV text with the effective config echoed as ``#`` comment lines."""
    buf = io.StringIO()
    for line in cfg.to_toml().splitlines():
        buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, METRIC_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.8g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def read_metrics_csv(path: str | Path) -> tuple[str, list[dict]]:
    """Config echo (TOML text) and metric rows of a metrics file."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    echo = "\n".join(l[2:] for l in lines if l.startswith("# "))
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return echo, rows
