import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from hpga_dp import diffusion as dm

F64 = torch.float64


@pytest.fixture(scope="module")
def sched():
    return dm.make_schedule(100)


def test_schedule_shape_and_monotonicity(sched):
    ab = sched.alpha_bar
    assert ab.shape == (101,)
    assert bool((ab[1:] < ab[:-1]).all())
    assert 0.99 < float(ab[0]) <= 1.0 and float(ab[-1]) < 0.05
    assert float(ab[0]) > float(ab[-1])


def test_linear_beta_matches_cumulative_product():
    s = dm.make_schedule(100, "linear_beta")
    betas = [1e-4 + (0.02 - 1e-4) * i / 99 for i in range(100)]
    expected = math.prod(1 - b for b in betas)
    assert float(s.alpha_bar[-1]) == pytest.approx(expected, rel=1e-12)
    assert float(s.alpha_bar[-1]) == pytest.approx(0.3636, abs=1e-4)


def test_schedule_errors():
    with pytest.raises(dm.DiffusionError):
        dm.make_schedule(0)
    with pytest.raises(dm.DiffusionError):
        dm.make_schedule(10, "quadratic")
    with pytest.raises(dm.DiffusionError):
        dm.NoiseSchedule(2, torch.tensor([1.0, 0.5, 0.6], dtype=F64))


def test_forward_noise_endpoints():
    z0, eps = torch.randn(2, 4, 3, 16, dtype=F64)
    s = dm.NoiseSchedule(2, torch.tensor([1.0, 0.5, 0.0], dtype=F64), kind="custom")
    assert torch.equal(dm.forward_noise(z0, 0, eps, s), z0)
    assert torch.equal(dm.forward_noise(z0, 2, eps, s), eps)
    with pytest.raises(dm.DiffusionError):
        dm.forward_noise(z0, 3, eps, s)
    with pytest.raises(dm.DiffusionError):
        dm.recover_z0(z0, eps, 2, s)


def test_forward_noise_variance_monte_carlo(sched):
    gen = torch.Generator().manual_seed(0)
    eps = torch.randn(10_000, 16, generator=gen, dtype=F64)
    for k in (10, 50, 90):
        out = dm.forward_noise(torch.zeros_like(eps), k, eps, sched)
        target = 1 - float(sched.alpha_bar[k])
        assert float(out.var()) == pytest.approx(target, rel=0.05)


def test_recover_inverts_forward_noise_for_all_valid_k(sched):
    gen = torch.Generator().manual_seed(1)
    z0, eps = torch.randn(2, 3, 16, 3, 16, generator=gen, dtype=F64)
    for k in range(sched.k_max + 1):
        if float(sched.alpha_bar[k]) <= 1e-6:
            continue
        zk = dm.forward_noise(z0, k, eps, sched)
        assert float((dm.recover_z0(zk, eps, k, sched) - z0).abs().max()) <= 1e-10
    assert torch.equal(dm.recover_z0(z0, eps, 0, sched), z0)


def test_recover_with_wrong_noise_scales_error(sched):
    gen = torch.Generator().manual_seed(2)
    z0, eps, eps_hat = torch.randn(3, 16, 3, 16, generator=gen, dtype=F64)
    k = 40
    a = float(sched.alpha_bar[k])
    z0_hat = dm.recover_z0(dm.forward_noise(z0, k, eps, sched), eps_hat, k, sched)
    expected = math.sqrt(1 - a) / math.sqrt(a) * float((eps - eps_hat).norm())
    assert float((z0_hat - z0).norm()) == pytest.approx(expected, abs=1e-9)


@given(st.floats(0, 1), st.integers(1, 1000))
def test_k_threshold_formula(eta, k_max):
    k = dm.k_threshold(eta, k_max)
    assert k == k_max - math.floor(eta * k_max)
    assert 0 <= k <= k_max


def test_k_threshold_examples_and_errors():
    assert dm.k_threshold(0.25, 100) == 75
    assert dm.k_threshold(0.0, 37) == 37
    assert dm.k_threshold(1.0, 37) == 0
    for bad in (-0.1, 1.5):
        with pytest.raises(dm.DiffusionError):
            dm.k_threshold(bad, 100)
    assert dm.StagedLossConfig(0.25, 100).k_thresh == 75


def test_encode_denoise_loss():
    gen = torch.Generator().manual_seed(3)
    a, b = torch.randn(2, 4, 16, 3, 16, generator=gen, dtype=F64)
    assert float(dm.loss_encode_denoise(a, a)) == 0.0
    assert float(dm.loss_encode_denoise(a + 0.3, a)) == pytest.approx(0.09, abs=1e-15)
    direct = sum(float(x - y) ** 2 for x, y in zip(a.reshape(-1), b.reshape(-1))) / a.numel()
    assert float(dm.loss_encode_denoise(a, b)) == pytest.approx(direct, abs=1e-12)
    with pytest.raises(dm.DiffusionError):
        dm.loss_encode_denoise(a, b[..., :2])


def test_decoder_loss_indicator():
    gen = torch.Generator().manual_seed(4)
    a, b = torch.randn(2, 16, 3, 16, generator=gen, dtype=F64)
    cfg = dm.StagedLossConfig(0.25, 100)
    assert float(dm.loss_decoder(a, b, cfg.k_thresh - 1, cfg)) == 0.0
    assert float(dm.loss_decoder(a, a, cfg.k_thresh, cfg)) == 0.0
    assert float(dm.loss_decoder(a, b, 100, cfg)) == float(((a - b) ** 2).mean())
    a.requires_grad_(True)
    assert not dm.loss_decoder(a, b, 10, cfg).requires_grad


def test_total_loss():
    assert dm.total_loss(0.5, 0.25) == 0.75
    assert dm.total_loss(1.3, 0) == 1.3


def test_progress_index_selects_least_noisy_levels():
    n = torch.arange(1, 101)
    k = dm.progress_index(n, 100)
    assert set(n[k >= dm.k_threshold(0.25, 100)].tolist()) == set(range(1, 26))
    assert not (k >= dm.k_threshold(0.0, 100)).any()
    assert (k >= dm.k_threshold(1.0, 100)).all()


# ---------------------------------------------------------------- training and sampling


class _Toy(torch.nn.Module):
    """Tiny model with encoder/denoiser/decoder hooks for the diffusion loop."""

    has_decoder = True
    sample_clip = None
    action_shape = (4, 2, 16)

    def __init__(self):
        super().__init__()
        self.enc = torch.nn.Linear(8, 8).double()
        self.den = torch.nn.Linear(128 + 8 + 1, 128).double()
        self.dec = torch.nn.Linear(16, 16).double()

    def encode(self, obs):
        return self.enc(obs)

    def denoise(self, z, cond, k):
        h = torch.cat([z.flatten(1), cond, k[:, None].double() / 100], dim=-1)
        return self.den(h).reshape(z.shape)

    def decode(self, z):
        return self.dec(z)

    def encode_actions(self, x):
        return x


def _batch(gen, n=8):
    return (torch.randn(n, 8, generator=gen, dtype=F64),
            torch.randn(n, 4, 2, 16, generator=gen, dtype=F64))


def test_train_step_is_deterministic(sched):
    losses = []
    for _ in range(2):
        torch.manual_seed(0)
        model = _Toy()
        opt = torch.optim.AdamW(model.parameters(), 1e-3)
        gen = torch.Generator().manual_seed(5)
        obs, target = _batch(torch.Generator().manual_seed(9))
        losses.append([dm.train_step(model, opt, obs, target, sched, 75, gen).total.item()
                       for _ in range(3)])
    assert losses[0] == losses[1]


def test_train_step_rejects_empty_batch(sched):
    model = _Toy()
    opt = torch.optim.AdamW(model.parameters())
    with pytest.raises(dm.DiffusionError):
        dm.train_step(model, opt, torch.zeros(0, 8, dtype=F64), torch.zeros(0, 4, 2, 16, dtype=F64),
                      sched, 75, torch.Generator())


def test_decoder_gradient_zero_below_threshold(sched):
    torch.manual_seed(0)
    model = _Toy()
    obs, target = _batch(torch.Generator().manual_seed(1), n=1)
    seen = set()
    for seed in range(40):
        losses = dm.compute_losses(model, obs, target, sched, 75, torch.Generator().manual_seed(seed))
        model.zero_grad()
        losses.total.backward()
        grad = model.dec.weight.grad
        masked = int(losses.k) < 75
        seen.add(masked)
        if masked:
            assert grad is None or float(grad.abs().max()) == 0.0
        else:
            assert grad is not None and float(grad.abs().max()) > 0.0
    assert seen == {True, False}


def test_decoder_gradient_zero_when_every_sample_is_masked(sched):
    torch.manual_seed(0)
    model = _Toy()
    obs, target = _batch(torch.Generator().manual_seed(1))
    losses = dm.compute_losses(model, obs, target, sched, 101, torch.Generator().manual_seed(0))
    losses.total.backward()
    assert float(losses.l_dec) == 0.0
    assert model.dec.weight.grad is None


def test_total_gradient_is_sum_of_term_gradients(sched):
    torch.manual_seed(0)
    model = _Toy()
    obs, target = _batch(torch.Generator().manual_seed(1), n=32)

    def grads(term):
        model.zero_grad()
        losses = dm.compute_losses(model, obs, target, sched, 50, torch.Generator().manual_seed(3))
        getattr(losses, term).backward()
        return [p.grad.clone() if p.grad is not None else torch.zeros_like(p)
                for p in model.parameters()]

    for t, a, b in zip(grads("total"), grads("l_ed"), grads("l_dec")):
        assert torch.allclose(t, a + b, atol=1e-13)


def test_overfit_loss_decreases(sched):
    torch.manual_seed(0)
    model = _Toy()
    opt = torch.optim.AdamW(model.parameters(), 3e-3)
    obs, target = _batch(torch.Generator().manual_seed(1), n=10)
    gen = torch.Generator().manual_seed(2)
    hist = [dm.train_step(model, opt, obs, target, sched, 75, gen).l_ed.item() for _ in range(200)]
    assert sum(hist[-20:]) / 20 < 0.8 * sum(hist[:20]) / 20


def test_sampler_recovers_planted_z0(sched):
    gen = torch.Generator().manual_seed(6)
    z0 = torch.randn(2, 16, 3, 16, generator=gen, dtype=F64)

    def oracle(z, cond, k):
        a = sched.alpha_bar[k].reshape(-1, 1, 1, 1)
        return (z - a.sqrt() * z0) / (1 - a).sqrt()

    out = dm.sample(oracle, torch.zeros(2, 1), z0.shape, sched, seed=0, dtype=F64)
    assert float((out - z0).abs().max()) <= 1e-6


def test_sample_actions_shape_and_seeding(sched):
    torch.manual_seed(0)
    model = _Toy()
    obs = torch.randn(3, 8, dtype=F64)
    a = dm.sample_actions(model, obs, sched, seed=11)
    assert a.shape == (3, 4, 2, 16)
    assert torch.equal(a, dm.sample_actions(model, obs, sched, seed=11))
    assert not torch.equal(a, dm.sample_actions(model, obs, sched, seed=12))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100), st.floats(-3, 3), st.floats(-3, 3))
def test_inversion_property(k, z, e):
    s = dm.make_schedule(100)
    if float(s.alpha_bar[k]) <= 1e-6:
        return
    z0 = torch.full((4,), z, dtype=F64)
    eps = torch.full((4,), e, dtype=F64)
    back = dm.recover_z0(dm.forward_noise(z0, k, eps, s), eps, k, s)
    assert float((back - z0).abs().max()) <= 1e-10
