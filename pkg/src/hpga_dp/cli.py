"""``hpga-dp`` command line: generate, train, eval, ablate-eta, export-metrics."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import torch

from hpga_dp import autodiff, diffusion, envs, experiments, training
from hpga_dp.config import ConfigError, RunConfig, from_dict, load_config


class CliError(Exception):
    pass


def _episodes(cfg: RunConfig) -> list[dict]:
    path = Path(cfg.dataset)
    if not path.is_file():
        raise CliError(f"dataset not found: {path}")
    header, episodes = envs.load_dataset(path)
    if header["task"] != cfg.task:
        raise CliError(f"dataset task {header['task']!r} does not match config task {cfg.task!r}")
    return episodes


def run_dir(cfg: RunConfig, seed: int) -> Path:
    return Path(cfg.out_dir) / f"{cfg.variant}_eta{cfg.eta:g}_s{seed}"


def save_run(cfg: RunConfig, seed: int, result: training.RunResult) -> Path:
    out = run_dir(cfg, seed)
    out.mkdir(parents=True, exist_ok=True)
    extra = {"config": cfg.to_dict(), "seed": seed, "norm": result.extra,
             "epochs_trained": len(result.metrics)}
    autodiff.save_checkpoint(out / "model.ckpt", result.params, extra)
    (out / "metrics.csv").write_text(training.metrics_csv(cfg, result.metrics), encoding="utf-8")
    return out


def load_run(path: str | Path):
    """Rebuild ``(cfg, model, extra)`` from a checkpoint written by ``train``."""
    path = Path(path)
    if not path.is_file():
        raise CliError(f"checkpoint not found: {path}")
    _, extra = autodiff.read_checkpoint(path)
    cfg = from_dict(extra["config"])
    model = training.build_for_run(cfg, extra["norm"], extra["seed"])
    autodiff.load_checkpoint(path, autodiff.ModelParams(model.groups()))
    return cfg, model.to(training._DTYPES[cfg.dtype]), extra


def eval_rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, training.EVAL_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    spec = envs.make_task(args.task)
    path = envs.generate_dataset(spec, args.episodes, args.seed, args.out)
    _, episodes = envs.load_dataset(path)
    failed = [i for i, ep in enumerate(episodes) if not envs.replay(spec, ep)]
    if failed:
        raise CliError(f"episodes {failed} do not replay to success")
    print(f"wrote {len(episodes)} episodes to {path}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    episodes = _episodes(cfg)
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    for seed in seeds:
        result = training.train(cfg, episodes, seed, log=None if args.quiet else print)
        out = save_run(cfg, seed, result)
        print(f"seed {seed}: final l_total={result.metrics[-1]['l_total']:.6f} -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg, model, extra = load_run(args.checkpoint)
    n = args.rollouts or cfg.eval_rollouts
    seed = cfg.eval_seed if args.seed is None else args.seed
    rate = training.evaluate(model, cfg, diffusion.make_schedule(cfg.k_max, cfg.schedule), n, seed)
    row = {"variant": cfg.variant, "eta": cfg.eta, "trial": extra["seed"],
           "success_rate": rate, "epochs_trained": extra["epochs_trained"]}
    print(f"success_rate={rate:.4f} over {n} rollouts")
    out = Path(args.out) if args.out else Path(args.checkpoint).with_name("eval.csv")
    out.write_text(eval_rows_csv([row]), encoding="utf-8")
    return 0


def _grid(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"bad grid {text!r}") from None
    if not values or any(not 0 <= v <= 1 for v in values):
        raise CliError("grid values must lie in [0, 1]")
    return values


def cmd_ablate_eta(args) -> int:
    cfg = load_config(args.config)
    if args.trials < 1:
        raise CliError("--trials must be >= 1")
    rows = experiments.ablate_eta(cfg, _episodes(cfg), _grid(args.grid), args.trials,
                                   log=None if args.quiet else print)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / f"ablate_eta_{cfg.variant}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(eval_rows_csv(rows), encoding="utf-8")
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def merge_csvs(paths: list[Path]) -> str:
    """Concatenate metrics or eval CSVs, tagging each row with its source file."""
    header, rows = None, []
    for path in paths:
        if not path.is_file():
            raise CliError(f"metrics file not found: {path}")
        lines = [l for l in path.read_text(encoding="utf-8").splitlines() if not l.startswith("#")]
        reader = csv.DictReader(lines)
        if header is None:
            header = reader.fieldnames
        elif reader.fieldnames != header:
            raise CliError(f"{path}: columns {reader.fieldnames} differ from {header}")
        rows.extend({"source": str(path), **row} for row in reader)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, ["source", *header], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_export_metrics(args) -> int:
    text = merge_csvs([Path(p) for p in args.inputs])
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hpga-dp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write scripted demonstrations")
    p.add_argument("--task", required=True, choices=envs.TASKS)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override the config's seed list")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="success rate of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--rollouts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate-eta", help="sweep the decoder supervision fraction")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", default="0.25,0.5,0.75")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--out")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_ablate_eta)

    p = sub.add_parser("export-metrics", help="merge CSV files for plotting")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    torch.set_num_threads(1)
    try:
        return args.func(args)
    except (CliError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
