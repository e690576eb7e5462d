import math

import numpy as np
import pytest
import torch

from evacflow.diffusion import (
    ConditionalDenoiser,
    DenoiserConfig,
    NoiseSchedule,
    TrainingConfig,
    forward_sample,
    heatmap_to_unit,
    make_rescaled_schedule,
    make_schedule,
    sample,
    sample_tensor,
    training_loss,
    unit_to_heatmap,
)
from evacflow.errors import ConfigError, ContractError, StepError


class TestSchedule:
    def test_endpoints_bit_exact(self):
        s = make_schedule(1000)
        assert s.beta(1) == 1e-6
        assert s.beta(1000) == 0.01

    def test_t3_midpoint(self):
        s = make_schedule(3)
        assert s.beta(2) == pytest.approx(0.0050005, abs=1e-12)

    def test_alpha_bar_strictly_decreasing(self):
        s = make_schedule(1000)
        bars = s.alpha_bars
        assert (np.diff(bars) < 0).all()

    def test_terminal_alpha_bar_matches_independent_product(self):
        s = make_schedule(1000)
        # independent route: plain Python product over the same betas
        product = 1.0
        for beta in s.betas:
            product *= 1.0 - beta
        assert abs(s.alpha_bar(1000) - product) < 1e-12
        assert abs(product - 0.0067) < 1e-3
        assert s.alpha_bar(1000) < 0.01

    def test_too_short_rejected(self):
        with pytest.raises(ConfigError):
            make_schedule(1)

    def test_step_accessor_bounds(self):
        s = make_schedule(10)
        with pytest.raises(StepError):
            s.beta(0)
        with pytest.raises(StepError):
            s.alpha_bar(11)

    def test_rescaled_schedule_preserves_total(self):
        ref = make_schedule(1000)
        short = make_rescaled_schedule(200)
        assert short.betas.sum() == pytest.approx(ref.betas.sum(), rel=1e-12)
        assert short.beta(1) == 1e-6
        # terminal signal-to-noise stays near zero
        assert short.alpha_bar(200) < 0.05


class TestForwardSample:
    def test_eps_zero_scales_x0(self):
        s = make_schedule(100)
        x0 = torch.randn(1, 1, 8, 8)
        x_t = forward_sample(x0, 50, torch.zeros_like(x0), s)
        assert torch.allclose(x_t, math.sqrt(s.alpha_bar(50)) * x0)

    def test_near_identity_at_first_step(self):
        s = make_schedule(1000)
        x0 = torch.randn(1, 1, 4, 4)
        eps = torch.randn(1, 1, 4, 4)
        x_1 = forward_sample(x0, 1, eps, s)
        # alpha_bar(1) = 1 - 1e-6: virtually the identity on x0
        expected = x0 * math.sqrt(1 - 1e-6) + eps * math.sqrt(1e-6)
        assert torch.allclose(x_1, expected, atol=1e-6)

    def test_step_out_of_range(self):
        s = make_schedule(10)
        x0 = torch.zeros(1, 1, 4, 4)
        with pytest.raises(StepError):
            forward_sample(x0, 11, torch.zeros_like(x0), s)
        with pytest.raises(StepError):
            forward_sample(x0, 0, torch.zeros_like(x0), s)

    def test_shape_mismatch(self):
        s = make_schedule(10)
        with pytest.raises(ContractError):
            forward_sample(torch.zeros(1, 1, 4, 4), 1, torch.zeros(1, 1, 8, 8), s)

    def test_monte_carlo_moments(self):
        s = make_schedule(500)
        rng = torch.Generator().manual_seed(0)
        x0 = torch.rand((4, 4), generator=rng) * 2 - 1
        n = 100_000
        for t in (10, 250, 500):
            eps = torch.randn((n, 4, 4), generator=rng)
            x_t = forward_sample(x0[None].expand(n, -1, -1), torch.full((n,), t), eps, s)
            target_mean = math.sqrt(s.alpha_bar(t)) * x0
            target_var = 1.0 - s.alpha_bar(t)
            assert (x_t.mean(0) - target_mean).abs().max() < 0.02
            assert (x_t.var(0) - target_var).abs().max() < 0.02 * max(target_var, 0.05)


class TinyDenoiser(torch.nn.Module):
    """Minimal conv denoiser for gradient checks; well under 1k parameters."""

    def __init__(self):
        super().__init__()
        self.conv1 = torch.nn.Conv2d(4, 4, 3, padding=1)
        self.time = torch.nn.Linear(8, 4)
        self.conv2 = torch.nn.Conv2d(4, 1, 3, padding=1)

    def forward(self, x_t, t, condition):
        from evacflow.networks import sinusoidal_embedding

        h = self.conv1(torch.cat([x_t, condition], dim=1))
        temb = self.time(sinusoidal_embedding(t, 8).to(h.dtype))
        h = torch.nn.functional.silu(h + temb[:, :, None, None])
        return self.conv2(h)


class TestTrainingLoss:
    def _batch(self, seed=0, n=4, size=8):
        g = torch.Generator().manual_seed(seed)
        cond = torch.rand((n, 3, size, size), generator=g)
        x0 = torch.rand((n, 1, size, size), generator=g) * 2 - 1
        return cond, x0

    def test_perfect_denoiser_zero_loss(self):
        s = make_schedule(50)
        cond, x0 = self._batch()
        captured = {}

        def perfect(x_t, t, condition):
            return captured["eps"]

        # capture the eps the loss draws by replaying the generator
        g1 = torch.Generator().manual_seed(9)
        t = torch.randint(1, s.T + 1, (x0.shape[0],), generator=g1)
        captured["eps"] = torch.randn(x0.shape, generator=g1)
        loss = training_loss(
            perfect, cond, x0, s, generator=torch.Generator().manual_seed(9)
        )
        assert float(loss) == pytest.approx(0.0, abs=1e-12)

    def test_zero_predictor_loss_near_one(self):
        s = make_schedule(50)
        g = torch.Generator().manual_seed(1)
        cond = torch.rand((64, 3, 8, 8), generator=g)
        x0 = torch.rand((64, 1, 8, 8), generator=g) * 2 - 1
        zero = lambda x_t, t, c: torch.zeros_like(x_t)
        losses = [
            float(
                training_loss(
                    zero, cond, x0, s, generator=torch.Generator().manual_seed(k)
                )
            )
            for k in range(40)
        ]
        assert np.mean(losses) == pytest.approx(1.0, rel=0.05)

    def test_loss_nonnegative(self):
        s = make_schedule(20)
        cond, x0 = self._batch(3)
        model = TinyDenoiser()
        loss = training_loss(
            model, cond, x0, s, generator=torch.Generator().manual_seed(0)
        )
        assert float(loss.detach()) >= 0.0

    def test_condition_shape_mismatch(self):
        s = make_schedule(20)
        with pytest.raises(ContractError):
            training_loss(
                TinyDenoiser(), torch.zeros(2, 3, 8, 8), torch.zeros(2, 1, 16, 16), s
            )


class TestGradientCheck:
    def test_backprop_matches_central_differences(self):
        torch.manual_seed(0)
        s = make_schedule(30)
        model = TinyDenoiser().double()
        n_params = sum(p.numel() for p in model.parameters())
        assert n_params <= 1000

        g = lambda: torch.Generator().manual_seed(1234)
        cond = torch.rand((2, 3, 8, 8), generator=g(), dtype=torch.float64)
        x0 = torch.rand((2, 1, 8, 8), generator=g()) * 2 - 1
        x0 = x0.double()

        def loss_value():
            return training_loss(model, cond, x0, s, generator=g())

        loss = loss_value()
        loss.backward()
        grads = [p.grad.clone() for p in model.parameters()]

        h = 1e-5
        for param, grad in zip(model.parameters(), grads):
            flat = param.data.view(-1)
            gflat = grad.view(-1)
            for j in range(flat.numel()):
                orig = flat[j].item()
                flat[j] = orig + h
                up = float(loss_value())
                flat[j] = orig - h
                down = float(loss_value())
                flat[j] = orig
                fd = (up - down) / (2 * h)
                bp = gflat[j].item()
                rel = abs(fd - bp) / max(abs(fd), abs(bp), 1e-4)
                assert rel < 1e-3, f"param grad mismatch: fd={fd} bp={bp}"


class TestDenoiser:
    def test_output_shape_contract(self):
        cfg = DenoiserConfig(image_size=16, base_width=8, depth=2, time_embedding_dim=8)
        model = ConditionalDenoiser(cfg)
        x_t = torch.randn(2, 1, 16, 16)
        cond = torch.rand(2, 3, 16, 16)
        out = model(x_t, torch.tensor([3, 7]), cond)
        assert out.shape == (2, 1, 16, 16)

    def test_pure_function(self):
        cfg = DenoiserConfig(image_size=16, base_width=8, depth=2, time_embedding_dim=8)
        torch.manual_seed(0)
        model = ConditionalDenoiser(cfg)
        x_t = torch.randn(1, 1, 16, 16)
        cond = torch.rand(1, 3, 16, 16)
        t = torch.tensor([5])
        a = model(x_t, t, cond)
        b = model(x_t, t, cond)
        assert torch.equal(a, b)

    def test_batch_equivariance(self):
        cfg = DenoiserConfig(image_size=16, base_width=8, depth=2, time_embedding_dim=8)
        torch.manual_seed(1)
        model = ConditionalDenoiser(cfg)
        model.eval()
        x_t = torch.randn(3, 1, 16, 16)
        cond = torch.rand(3, 3, 16, 16)
        t = torch.tensor([2, 9, 14])
        out = model(x_t, t, cond)
        perm = torch.tensor([2, 0, 1])
        out_perm = model(x_t[perm], t[perm], cond[perm])
        assert torch.allclose(out[perm], out_perm, atol=1e-6)

    def test_condition_size_mismatch(self):
        cfg = DenoiserConfig(image_size=16, base_width=8, depth=2, time_embedding_dim=8)
        model = ConditionalDenoiser(cfg)
        with pytest.raises(ContractError):
            model(torch.randn(1, 1, 16, 16), torch.tensor([1]), torch.rand(1, 3, 8, 8))

    def test_attention_requires_deep_enough_net(self):
        cfg = DenoiserConfig(
            image_size=16, base_width=8, depth=2, time_embedding_dim=8,
            attention_enabled=True,
        )
        with pytest.raises(ConfigError):
            cfg.build_network()

    def test_attention_config_builds_at_depth_4(self):
        cfg = DenoiserConfig(
            image_size=32, base_width=8, depth=4, time_embedding_dim=8,
            attention_enabled=True,
        )
        model = ConditionalDenoiser(cfg)
        out = model(torch.randn(1, 1, 32, 32), torch.tensor([1]), torch.rand(1, 3, 32, 32))
        assert out.shape == (1, 1, 32, 32)
        assert cfg.attention_resolution == 4


class TestSampler:
    def _setup(self):
        cfg = DenoiserConfig(image_size=16, base_width=8, depth=2, time_embedding_dim=8)
        torch.manual_seed(7)
        model = ConditionalDenoiser(cfg)
        schedule = make_rescaled_schedule(20)
        cond = np.random.default_rng(0).random((3, 16, 16)).astype(np.float32)
        return model, schedule, cond

    def test_deterministic_given_seed(self):
        model, schedule, cond = self._setup()
        a = sample(model, schedule, cond, seed=5)
        b = sample(model, schedule, cond, seed=5)
        assert np.array_equal(a.pixels, b.pixels)

    def test_output_contract(self):
        model, schedule, cond = self._setup()
        heatmap = sample(model, schedule, cond, seed=1)
        assert heatmap.pixels.shape == (16, 16)
        assert heatmap.pixels.dtype == np.uint8
        assert heatmap.provenance == "surrogate"

    def test_rejects_bad_condition_shape(self):
        model, schedule, _ = self._setup()
        with pytest.raises(ContractError):
            sample(model, schedule, np.zeros((16, 16), dtype=np.float32))

    def test_different_seeds_differ(self):
        model, schedule, cond = self._setup()
        a = sample(model, schedule, cond, seed=1)
        b = sample(model, schedule, cond, seed=2)
        assert not np.array_equal(a.pixels, b.pixels)


class TestUnitMapping:
    def test_round_trip(self):
        pixels = np.arange(256, dtype=np.uint8).reshape(16, 16)
        assert np.array_equal(unit_to_heatmap(heatmap_to_unit(pixels)), pixels)

    def test_clamping(self):
        assert unit_to_heatmap(np.array([[2.0, -2.0]])).tolist() == [[255, 0]]


def test_training_config_lr_grid():
    TrainingConfig(learning_rate=0.0002).validate()
    TrainingConfig(learning_rate=0.001).validate()
    with pytest.raises(ConfigError):
        TrainingConfig(learning_rate=0.01).validate()
