import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from hpga_dp import diffusion, envs
from hpga_dp import policy as pol
from hpga_dp.config import RunConfig
from hpga_dp.pga import conversions as cv
from hpga_dp.pga.errors import NormalizationError
from hpga_dp.training import ModelPolicy, build_for_run

F64 = torch.float64


def frame(rng, n_obj):
    q = lambda: envs.canonical(rng.normal(size=4))
    return pol.ObservationFrame(rng.uniform(-1, 1, 3), q(), float(rng.uniform()),
                                tuple((rng.uniform(-1, 1, 3), q()) for _ in range(n_obj)))


def test_channel_count_from_schema():
    assert pol.k_obs(2) == 7
    rng = np.random.default_rng(0)
    assert pol.pack_observation([frame(rng, 2), frame(rng, 2)], 2).shape == (2, 7, 16)


def test_identity_pose_channels():
    f = pol.ObservationFrame(np.zeros(3), np.array([1.0, 0, 0, 0]), 0.0,
                             ((np.zeros(3), np.array([1.0, 0, 0, 0])),))
    x = pol.pack_observation([f], 1)[0]
    expected = torch.zeros(3, 16, dtype=F64)
    expected[0, 14] = 1.0  # e123
    expected[1, 0] = 1.0
    assert torch.equal(x[:3], expected)


def test_pack_extract_roundtrip():
    rng = np.random.default_rng(1)
    hist = [frame(rng, 2) for _ in range(2)]
    x = pol.pack_observation(hist, 2)
    for t, f in enumerate(hist):
        assert np.allclose(cv.extract_point(x[t, 0]).numpy(), f.p, atol=1e-12, rtol=0)
        assert np.allclose(cv.extract_quaternion(x[t, 1]).numpy(), f.q, atol=1e-12, rtol=0)
        assert float(cv.extract_scalar(x[t, 2])) == f.g
        for j, (p, q) in enumerate(f.objects):
            assert np.allclose(cv.extract_point(x[t, 3 + 2 * j]).numpy(), p, atol=1e-12, rtol=0)
            assert np.allclose(cv.extract_quaternion(x[t, 4 + 2 * j]).numpy(), q, atol=1e-12,
                               rtol=0)


def test_pack_errors():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        pol.pack_observation([frame(rng, 1)], 2)
    bad = pol.ObservationFrame(np.zeros(3), np.array([2.0, 0, 0, 0]), 0.0, ())
    with pytest.raises(NormalizationError):
        pol.pack_observation([bad], 1)
    with pytest.raises(ValueError):
        pol.pack_observation([frame(rng, 1), frame(rng, 2)], 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_action_roundtrip(seed):
    rng = np.random.default_rng(seed)
    acts = [pol.ActionFrame(rng.uniform(-1, 1, 3), envs.canonical(rng.normal(size=4)),
                            float(rng.uniform())) for _ in range(16)]
    back = pol.unpack_actions(pol.pack_actions(acts))
    for a, b in zip(acts, back):
        assert np.allclose(a.p, b.p, atol=1e-9) and np.allclose(a.q, b.q, atol=1e-9)
        assert abs(a.g - b.g) <= 1e-9


def test_unpack_normalizes_orientation_and_clamps_gripper():
    a = pol.ActionFrame(np.array([0.1, 0.2, 0.3]), envs.canonical(np.array([1.0, 2, 3, 4])), 0.5)
    x = pol.pack_actions([a])
    x[:, 1] *= 2
    x[:, 2, 0] = 1.3
    (b,) = pol.unpack_actions(x)
    assert np.allclose(b.q, a.q, atol=1e-12)
    assert b.g == 1.0
    with pytest.raises(ValueError):
        pol.unpack_actions(torch.zeros(4, 2, 16, dtype=F64))


@pytest.mark.parametrize("task", envs.TASKS)
def test_expert_policy_rollouts_succeed(task):
    spec = envs.make_task(task)
    results = pol.rollout_batch(pol.ExpertPolicy(spec), spec, range(20))
    assert all(r.success for r in results)
    assert all(r.steps <= spec.max_steps and len(r.actions) == r.steps for r in results)


def test_rollout_respects_step_cap_and_horizon_limit():
    spec = envs.make_task("point_reach")

    class Still:
        def act(self, histories, seed):
            return [[pol.ActionFrame(h[-1].p, h[-1].q, h[-1].g)] * 16 for h in histories]

    r = pol.rollout(Still(), spec, 0, max_steps=30)
    assert not r.success and r.steps == 30
    with pytest.raises(ValueError):
        pol.rollout_batch(Still(), spec, [0], h_a=17, h_p=16)


def test_random_weights_policy_rarely_succeeds():
    cfg = RunConfig(variant="hpga_u", k_max=10, enc_blocks=1, enc_channels=4, enc_heads=1,
                    dec_blocks=1, dec_channels=4, dec_heads=1, unet_widths=[64, 64], step_dim=32)
    spec = envs.make_task("point_reach")
    model = build_for_run(cfg, {"center": [0, 0, 0.15], "scale": 0.25}, seed=0)
    policy = ModelPolicy(model, diffusion.make_schedule(10))
    results = pol.rollout_batch(policy, spec, envs.episode_seeds(1, 50), max_steps=80)
    assert sum(r.success for r in results) / 50 <= 0.1
    again = pol.rollout_batch(policy, spec, envs.episode_seeds(1, 3), max_steps=16)
    first = pol.rollout_batch(policy, spec, envs.episode_seeds(1, 3), max_steps=16)
    assert [r.actions for r in again] == [r.actions for r in first]
