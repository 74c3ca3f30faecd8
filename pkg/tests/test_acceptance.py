"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import time

import pytest
import torch

from blade_oracle import blade_mul
from hpga_dp import autodiff, diffusion, envs, experiments, pga, pgatr
from hpga_dp.pga import ops, versors
from hpga_dp.pgatr import PgatrConfig

F64 = torch.float64


def report(n: int, title: str, passed: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {n} [{'PASS' if passed else 'FAIL'}] {title}: {detail}", flush=True)
    assert passed, detail


def basis(name):
    v = torch.zeros(16, dtype=F64)
    v[pga.BLADE_NAMES.index(name)] = 1.0
    return v


# published Cayley table entries, spot-checked independently of the oracle
REFERENCE_ENTRIES = [
    ("e1", "e2", 1, "e12"), ("e2", "e1", -1, "e12"), ("e0", "e0", 0, None),
    ("e1", "e1", 1, "1"), ("e12", "e12", -1, "1"), ("e123", "e123", -1, "1"),
    ("e0", "e1", 1, "e01"), ("e12", "e23", 1, "e13"), ("e01", "e1", 1, "e0"),
    ("e123", "e0", -1, "e0123"),
]


def test_1_algebra_exactness():
    t0 = time.perf_counter()
    table = pga.build_cayley_table()
    mismatches = 0
    for i in range(16):
        for j in range(16):
            k, s = blade_mul(i, j)
            mismatches += table[i][j] != ((-1, 0) if k is None else (k, s))
    spot = 0
    for a, b, sign, target in REFERENCE_ENTRIES:
        k, s = table[pga.BLADE_NAMES.index(a)][pga.BLADE_NAMES.index(b)]
        spot += s == sign and (sign == 0 or pga.BLADE_NAMES[k] == target)
    elapsed = time.perf_counter() - t0
    report(1, "algebra exactness", mismatches == 0 and spot == 10 and elapsed < 1.0,
           f"{256 - mismatches}/256 entries match oracle, {spot}/10 reference entries, {elapsed:.3f}s")


def test_2_conversions():
    t0 = time.perf_counter()
    checks = [
        torch.equal(pga.embed_point([1.0, 2.0, 3.0]),
                    -3 * basis("e012") + 2 * basis("e013") - basis("e023") + basis("e123")),
        torch.equal(pga.embed_quaternion([0.5, 0.5, -0.5, 0.5]),
                    0.5 * basis("1") - 0.5 * basis("e12") - 0.5 * basis("e13") - 0.5 * basis("e23")),
        torch.equal(pga.embed_scalar(0.75), 0.75 * basis("1")),
        torch.equal(pga.embed_direction([0.25, -1.5, 4.0]),
                    0.25 * basis("e1") - 1.5 * basis("e2") + 4.0 * basis("e3")),
    ]
    gen = torch.Generator().manual_seed(0)
    n = 1000
    p = torch.randn(n, 3, generator=gen, dtype=F64)
    q = versors.random_quaternion(gen, (n,))
    s = torch.randn(n, generator=gen, dtype=F64)
    v = torch.randn(n, 3, generator=gen, dtype=F64)
    err = max(float((pga.extract(pga.embed(x, kind), kind) - x).abs().max())
              for x, kind in [(p, "point"), (q, "quaternion"), (s, "scalar"), (v, "direction")])
    elapsed = time.perf_counter() - t0
    report(2, "conversions", all(checks) and err <= 1e-12 and elapsed < 1.0,
           f"{sum(checks)}/4 formulas exact, roundtrip max err {err:.2e}, {elapsed:.3f}s")


class _Bilinear(torch.nn.Module):
    def __init__(self, c):
        super().__init__()
        self.layer = pgatr.GeometricBilinear(c)

    def forward(self, x):
        return self.layer(x, x[..., :1, :])


class _Attention(torch.nn.Module):
    def __init__(self, c, heads):
        super().__init__()
        self.qkv = pgatr.EquiLinear(c, 3 * c)
        self.heads = heads

    def forward(self, x):
        q, k, v = self.qkv(x).chunk(3, dim=-2)
        return pgatr.mv_attention(q, k, v, self.heads)


def _layers():
    torch.manual_seed(0)
    encoder = pgatr.StackCoder(PgatrConfig(), 2, 5)
    torch.nn.init.normal_(encoder.net.out.weight)  # exercise the blocks, not just the skip
    return {
        "equi_linear": (pgatr.EquiLinear(4, 4).double(), (3, 4)),
        "geometric_bilinear": (_Bilinear(4).double(), (3, 4)),
        "mv_attention": (_Attention(4, 2).double(), (3, 4)),
        "gated_gelu": (pgatr.gated_gelu, (3, 4)),
        "equi_layernorm": (pgatr.equi_layernorm, (3, 4)),
        "pgatr_block": (pgatr.PgatrBlock(PgatrConfig(1, 4, 2)).double(), (3, 4)),
        "encoder_n4": (encoder.double(), (2, 5)),
    }


def test_3_equivariance():
    t0 = time.perf_counter()
    gen = torch.Generator().manual_seed(3)
    kinds = ["rotor", "translator", "motor"]
    motions = [versors.random_motor(gen, scale=2.0, kind=kinds[i % 3]) for i in range(100)]
    worst = {}
    with torch.no_grad():
        for name, (layer, shape) in _layers().items():
            x = torch.randn(*shape, 16, generator=gen, dtype=F64)
            y = layer(x)
            worst[name] = max(
                float((layer(ops.sandwich(v, x, check=False)) - ops.sandwich(v, y, check=False)).norm()
                      / (1 + y.norm())) for v in motions)
    elapsed = time.perf_counter() - t0
    bad = {k: v for k, v in worst.items() if v > 1e-5}
    report(3, "equivariance", not bad and elapsed < 60,
           f"{len(worst)} layers x 100 motions, worst {max(worst.values()):.2e}, "
           f"failures {bad or 'none'}, {elapsed:.1f}s")


def test_4_gradients():
    t0 = time.perf_counter()
    errors = {name: autodiff.gradcheck(name, trials=20).max_rel_err for name in autodiff.registered()}
    for name, (layer, shape) in _layers().items():
        if isinstance(layer, torch.nn.Module):
            gen = torch.Generator().manual_seed(4)
            x = torch.randn(*shape, 16, generator=gen, dtype=F64)
            errors[f"layer:{name}"] = autodiff.check_module(layer, [x], max_coords=32)
    elapsed = time.perf_counter() - t0
    bad = {k: v for k, v in errors.items() if not v <= 1e-4}
    report(4, "gradients", not bad and elapsed < 300,
           f"{len(errors)} checks, worst {max(errors.values()):.2e}, failures {bad or 'none'}, "
           f"{elapsed:.1f}s")


class _TinyHybrid(torch.nn.Module):
    has_decoder = True

    def __init__(self):
        super().__init__()
        self.den = torch.nn.Linear(16, 16).double()
        self.dec = torch.nn.Linear(16, 16).double()

    def encode(self, obs):
        return obs

    def denoise(self, z, cond, k):
        return self.den(z)

    def decode(self, z):
        return self.dec(z)


def test_5_diffusion_algebra():
    s = diffusion.make_schedule(100)
    gen = torch.Generator().manual_seed(5)
    z0, eps = torch.randn(2, 8, 16, 3, 16, generator=gen, dtype=F64)
    inversion = max(
        float((diffusion.recover_z0(diffusion.forward_noise(z0, k, eps, s), eps, k, s) - z0).abs().max())
        for k in range(101) if float(s.alpha_bar[k]) > 1e-6)
    k_thresh = diffusion.k_threshold(0.25, 100)
    # decoder gradient for every progress index below and at/above the threshold
    model = _TinyHybrid()
    obs, target = torch.randn(2, 1, 2, 16, generator=gen, dtype=F64)
    zero_below = nonzero_above = True
    for seed in range(60):
        model.zero_grad()
        losses = diffusion.compute_losses(model, obs, target, s, k_thresh,
                                          torch.Generator().manual_seed(seed))
        losses.total.backward()
        g = model.dec.weight.grad
        if int(losses.k) < k_thresh:
            zero_below &= g is None or float(g.abs().max()) == 0.0
        else:
            nonzero_above &= g is not None and float(g.abs().max()) > 0.0
    direct = diffusion.loss_decoder(z0.requires_grad_(), eps, k_thresh - 1, k_thresh)
    zero_below &= float(direct) == 0.0 and not direct.requires_grad
    passed = inversion <= 1e-10 and k_thresh == 75 and zero_below and nonzero_above
    report(5, "diffusion algebra", passed,
           f"inversion max err {inversion:.2e}, K_thresh(0.25,100)={k_thresh}, "
           f"decoder grad zero below threshold: {zero_below}, nonzero above: {nonzero_above}")


@pytest.fixture(scope="module")
def demos(tmp_path_factory):
    path = tmp_path_factory.mktemp("accept") / "point_reach.jsonl"
    envs.generate_dataset(envs.make_task("point_reach"), 200, 7, path)
    return envs.load_dataset(path)[1]


def test_6_convergence_trend(demos):
    cfg = experiments.desk_config()
    t0 = time.perf_counter()
    hpga, base, verdict = experiments.convergence_study(
        cfg, demos, seeds=[0, 1, 2], **experiments.CONVERGENCE_PROTOCOL, log=print)
    for line in verdict.detail:
        print("  " + line)
    wall = {v: sum(r.wall_s for r in runs) for v, runs in (("hpga_u", hpga), ("baseline_u", base))}
    within = all(w <= 45 * 60 for w in wall.values())
    hpga_txt = "not reached" if verdict.hpga_mean is None else f"{verdict.hpga_mean:.1f}"
    ratio_txt = "n/a" if verdict.ratio is None else f"{verdict.ratio:.2f}"
    report(6, "convergence trend", verdict.passed and within,
           f"hpga_u mean epochs to 0.90 = {hpga_txt}, baseline_u = {verdict.baseline_mean:.1f}"
           f"{' (censored lower bound)' if verdict.baseline_censored else ''}, ratio {ratio_txt} "
           f"(need >= 1.5), wall hpga {wall['hpga_u'] / 60:.1f} min / baseline "
           f"{wall['baseline_u'] / 60:.1f} min (budget 45 each), total {(time.perf_counter() - t0) / 60:.1f} min")


def test_7_eta_robustness(demos):
    cfg = experiments.desk_config(**experiments.ETA_PROTOCOL)
    rows = experiments.ablate_eta(cfg, demos, [0.25, 0.5, 0.75], trials=3, log=print)
    spread, means = experiments.eta_spread(rows)
    txt = ", ".join(f"eta={e:g}: {m:.2f}" for e, m in means.items())
    report(7, "eta robustness", spread <= 0.10,
           f"mean final success {txt}; spread {spread:.2f} (need <= 0.10)")


def test_8_dataset_integrity(tmp_path):
    failures, identical = [], True
    for name in envs.TASKS:
        spec = envs.make_task(name)
        a = envs.generate_dataset(spec, 200, 7, tmp_path / f"{name}_a.jsonl")
        b = envs.generate_dataset(spec, 200, 7, tmp_path / f"{name}_b.jsonl")
        identical &= a.read_bytes() == b.read_bytes()
        _, episodes = envs.load_dataset(a)
        failures += [f"{name}:{i}" for i, ep in enumerate(episodes) if not envs.replay(spec, ep)]
    report(8, "dataset integrity", not failures and identical,
           f"{2 * 200 - len(failures)}/400 episodes replay to success, byte-identical regeneration: "
           f"{identical}")
