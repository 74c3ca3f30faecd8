"""Run configuration, loaded from and echoed as TOML."""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from hpga_dp import envs
from hpga_dp.diffusion import k_threshold
from hpga_dp.models import VARIANTS, ModelConfig
from hpga_dp.pgatr import PgatrConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str = "point_reach"
    variant: str = "hpga_u"
    h_o: int = 2
    h_p: int = 16
    h_a: int = 8
    k_max: int = 100
    eta: float = 0.25
    schedule: str = "cosine"
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-4
    weight_decay: float = 1e-6
    seeds: list[int] = field(default_factory=lambda: [0])
    dtype: str = "float32"
    noise_latent: bool = False
    # model sizes
    enc_blocks: int = 4
    enc_channels: int = 16
    enc_heads: int = 4
    dec_blocks: int = 4
    dec_channels: int = 16
    dec_heads: int = 4
    unet_widths: list[int] = field(default_factory=lambda: [64, 128, 256])
    step_dim: int = 128
    tf_dim: int = 128
    tf_layers: int = 4
    tf_heads: int = 4
    match_params: bool = True
    # evaluation
    eval_every: int = 0
    eval_rollouts: int = 50
    eval_seed: int = 10_000
    # paths
    dataset: str = "data.jsonl"
    out_dir: str = "runs"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        try:
            envs.make_task(self.task)
            k_threshold(self.eta, self.k_max)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.schedule not in ("cosine", "linear_beta"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if min(self.h_o, self.h_p, self.h_a, self.k_max, self.epochs, self.batch_size) < 1:
            raise ConfigError("horizons, k_max, epochs and batch_size must be >= 1")
        if self.h_a > self.h_p:
            raise ConfigError(f"h_a={self.h_a} exceeds h_p={self.h_p}")
        if self.variant.endswith("_u") and self.h_p % 2 ** (len(self.unet_widths) - 1):
            raise ConfigError(
                f"h_p={self.h_p} not divisible by the U-Net downsampling {2 ** (len(self.unet_widths) - 1)}")
        if any(w % 8 for w in self.unet_widths):
            raise ConfigError("unet_widths must be multiples of 8")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ConfigError("lr must be > 0 and weight_decay >= 0")
        try:
            PgatrConfig(self.enc_blocks, self.enc_channels, self.enc_heads)
            PgatrConfig(self.dec_blocks, self.dec_channels, self.dec_heads)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            variant=self.variant, h_o=self.h_o, h_p=self.h_p,
            n_objects=envs.make_task(self.task).n_objects,
            encoder=PgatrConfig(self.enc_blocks, self.enc_channels, self.enc_heads),
            decoder=PgatrConfig(self.dec_blocks, self.dec_channels, self.dec_heads),
            unet_widths=tuple(self.unet_widths), step_dim=self.step_dim,
            tf_dim=self.tf_dim, tf_layers=self.tf_layers, tf_heads=self.tf_heads,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def replace(self, **changes) -> "RunConfig":
        return RunConfig(**{**self.to_dict(), **changes})


PATH_ENV = {"dataset": "HPGA_DATASET", "out_dir": "HPGA_OUT_DIR"}


def from_dict(data: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path, env: dict | None = None) -> RunConfig:
    """Read a TOML run config; ``HPGA_DATASET`` / ``HPGA_OUT_DIR`` override its paths."""
    env = os.environ if env is None else env
    try:
        data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for key, var in PATH_ENV.items():
        if env.get(var):
            data[key] = env[var]
    return from_dict(data)
