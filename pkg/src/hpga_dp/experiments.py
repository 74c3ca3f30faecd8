"""Desk-scale studies: epochs-to-success per variant and the eta sweep."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from hpga_dp import diffusion, training
from hpga_dp.config import RunConfig

# Desk-scale settings shared by both studies: a compact encoder/decoder, a
# first U-Net level wider than the 48-channel hybrid latent, and lr 1e-3.
DESK = dict(task="point_reach", batch_size=64, lr=1e-3, unet_widths=[128, 128, 256],
            step_dim=64, enc_blocks=2, enc_channels=8, enc_heads=2, dec_blocks=2,
            dec_channels=8, dec_heads=2, eval_rollouts=50, eval_seed=10_000)
CONVERGENCE_PROTOCOL = dict(target=0.9, eval_every=10, hpga_cap=50, baseline_factor=3.0)
ETA_PROTOCOL = dict(variant="hpga_u", epochs=40, seeds=[0])


def desk_config(**overrides) -> RunConfig:
    return RunConfig(**{**DESK, **overrides})


@dataclass
class ConvergenceRun:
    variant: str
    seed: int
    target: float
    epochs_run: int
    evals: list[tuple[int, float]]
    wall_s: float

    @property
    def reached(self) -> int | None:
        """First evaluated epoch whose success rate meets the target."""
        return next((e for e, rate in self.evals if rate >= self.target), None)


def epochs_to_success(cfg: RunConfig, episodes: list[dict], seed: int, target: float,
                      max_epochs: int, eval_every: int, log=None) -> ConvergenceRun:
    t0 = time.perf_counter()
    result = training.train(cfg, episodes, seed, epochs=max_epochs, eval_every=eval_every,
                            log=log, stop_at=target)
    return ConvergenceRun(cfg.variant, seed, target, len(result.metrics), result.evals,
                          time.perf_counter() - t0)


@dataclass
class ConvergenceVerdict:
    passed: bool
    hpga_mean: float | None
    baseline_mean: float
    baseline_censored: bool
    ratio: float | None
    detail: list[str] = field(default_factory=list)


def convergence_verdict(hpga: list[ConvergenceRun], baseline: list[ConvergenceRun],
                        min_ratio: float = 1.5) -> ConvergenceVerdict:
    """Compare mean epochs-to-target; baseline runs that never reach it count at their cap.

    A censored baseline mean is a lower bound, so it can still confirm the ratio.
    """
    detail = [f"{r.variant} seed={r.seed} reached={r.reached} epochs_run={r.epochs_run} "
              f"wall={r.wall_s:.0f}s evals={r.evals}" for r in (*hpga, *baseline)]
    base_epochs = [r.reached if r.reached is not None else r.epochs_run for r in baseline]
    censored = any(r.reached is None for r in baseline)
    base_mean = sum(base_epochs) / len(base_epochs)
    if any(r.reached is None for r in hpga):
        return ConvergenceVerdict(False, None, base_mean, censored, None, detail)
    hpga_mean = sum(r.reached for r in hpga) / len(hpga)
    ratio = base_mean / hpga_mean
    return ConvergenceVerdict(ratio >= min_ratio, hpga_mean, base_mean, censored, ratio, detail)


def convergence_study(cfg: RunConfig, episodes: list[dict], seeds: list[int],
                      target: float = 0.9, eval_every: int = 5, hpga_cap: int = 60,
                      baseline_factor: float = 3.0, log=None):
    """Train ``hpga_u`` then the parameter-matched ``baseline_u`` on each seed.

    The baseline is capped at ``baseline_factor`` times the hybrid's mean
    epochs-to-target, which is enough to settle the comparison either way.
    """
    hpga = [epochs_to_success(cfg.replace(variant="hpga_u"), episodes, s, target, hpga_cap,
                              eval_every, log) for s in seeds]
    reached = [r.reached for r in hpga if r.reached is not None]
    mean = sum(reached) / len(reached) if reached else hpga_cap
    cap = max(eval_every, math.ceil(baseline_factor * mean / eval_every) * eval_every)
    baseline = [epochs_to_success(cfg.replace(variant="baseline_u", match_params=True), episodes,
                                  s, target, cap, eval_every, log) for s in seeds]
    return hpga, baseline, convergence_verdict(hpga, baseline)


def ablate_eta(cfg: RunConfig, episodes: list[dict], grid: list[float], trials: int,
               log=None) -> list[dict]:
    """Train and evaluate one model per ``(eta, trial)``; trial ``t`` uses seed ``seeds[0] + t``."""
    rows = []
    for eta in grid:
        run_cfg = cfg.replace(eta=eta)
        schedule = diffusion.make_schedule(run_cfg.k_max, run_cfg.schedule)
        for trial in range(trials):
            result = training.train(run_cfg, episodes, cfg.seeds[0] + trial, eval_every=0)
            rate = training.evaluate(result.model, run_cfg, schedule, run_cfg.eval_rollouts,
                                     run_cfg.eval_seed)
            rows.append({"variant": cfg.variant, "eta": eta, "trial": trial,
                         "success_rate": rate, "epochs_trained": len(result.metrics)})
            if log:
                log(f"eta={eta:g} trial={trial} success={rate:.2f}")
    return rows


def eta_spread(rows: list[dict]) -> tuple[float, dict[float, float]]:
    """Spread (max - min) of the per-eta mean success rate, plus those means."""
    by_eta: dict[float, list[float]] = {}
    for row in rows:
        by_eta.setdefault(float(row["eta"]), []).append(float(row["success_rate"]))
    means = {eta: sum(v) / len(v) for eta, v in sorted(by_eta.items())}
    return max(means.values()) - min(means.values()), means
