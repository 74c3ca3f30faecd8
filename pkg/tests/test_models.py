import numpy as np
import pytest
import torch

from hpga_dp import autodiff, dataset, diffusion, envs
from hpga_dp.config import RunConfig
from hpga_dp.training import build_for_run, normalization_extra

F64 = torch.float64


@pytest.fixture(scope="module")
def windows():
    spec = envs.make_task("lift_toy")
    episodes = [envs.run_expert(spec, s) for s in range(3)]
    return dataset.windows(episodes, 2, 4)


def test_windows_shapes_and_edge_padding():
    spec = envs.make_task("point_reach")
    ep = envs.run_expert(spec, 0)
    win = dataset.windows([ep], 2, 16)
    n = len(ep["act"])
    assert win["p"].shape == (n, 2, 3) and win["act_p"].shape == (n, 16, 3)
    # first window repeats the first observation; the last repeats the final action
    assert np.array_equal(win["p"][0, 0], win["p"][0, 1])
    assert np.array_equal(win["act_p"][-1, 0], win["act_p"][-1, -1])


class _Loss(torch.nn.Module):
    """Whole training objective as a module of (obs) with a fixed noise draw."""

    def __init__(self, model, target):
        super().__init__()
        self.model, self.target = model, target
        self.sched = diffusion.make_schedule(10)

    def forward(self, obs):
        gen = torch.Generator().manual_seed(0)
        return diffusion.compute_losses(self.model, obs, self.target, self.sched, 0, gen).total


@pytest.mark.parametrize("variant", ["hpga_u", "hpga_t", "baseline_u", "baseline_t"])
def test_train_step_end_to_end_gradcheck(variant, windows):
    cfg = RunConfig(task="lift_toy", variant=variant, h_p=4, h_a=4, k_max=10, eta=1.0, dtype="float64",
                    enc_blocks=2, enc_channels=4, enc_heads=1, dec_blocks=2, dec_channels=4,
                    dec_heads=1, unet_widths=[48, 56], step_dim=16, tf_dim=16, tf_layers=1,
                    tf_heads=2)
    spec = envs.make_task("lift_toy")
    win = {k: v[:2] for k, v in windows.items()}
    model = build_for_run(cfg, normalization_extra(cfg, spec, windows), 0)
    obs = model.obs_tensor(win).to(F64)
    target = model.action_tensor(win).to(F64)
    fn, values = autodiff.module_fn(_Loss(model, target))
    err = autodiff.compare_gradients(fn, [obs, *values], torch.Generator().manual_seed(1),
                                     max_coords=6)
    assert err <= 1e-3


def test_hybrid_shapes(windows):
    cfg = RunConfig(task="lift_toy", h_p=4, h_a=4, enc_blocks=1, enc_channels=4, enc_heads=1,
                    dec_blocks=1, dec_channels=4, dec_heads=1, unet_widths=[48, 56], step_dim=16)
    model = build_for_run(cfg, normalization_extra(cfg, envs.make_task("lift_toy"), windows), 0)
    obs = model.obs_tensor(windows).float()
    assert obs.shape == (len(windows["p"]), 2, 5, 16)
    assert model.encode(obs).shape == obs.shape
    assert model.action_tensor(windows).shape == (len(windows["p"]), 4, 3, 16)
    assert model.action_shape == (4, 3, 16)
