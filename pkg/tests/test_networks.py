import numpy as np
import pytest
import torch

from evacflow.errors import ConfigError
from evacflow.networks import (
    SelfAttention2d,
    UNet,
    count_parameters,
    count_time_parameters,
    sinusoidal_embedding,
)


def dense_attention_reference(module: SelfAttention2d, x: torch.Tensor):
    """Brute-force matmul re-implementation of the attention block."""
    b, c, height, width = x.shape
    n = height * width
    wf = module.f.weight.reshape(module.f.out_channels, c).double()
    wg = module.g.weight.reshape(module.g.out_channels, c).double()
    wh = module.h.weight.reshape(module.h.out_channels, c).double()
    wv = module.v.weight.reshape(c, module.v.in_channels).double()
    out = torch.empty_like(x, dtype=torch.float64)
    for bi in range(b):
        cols = x[bi].reshape(c, n).double()  # x_i are columns
        f = wf @ cols
        g = wg @ cols
        scores = f.T @ g  # s[i, j] = f(x_i)^T g(x_j)
        beta = torch.exp(scores) / torch.exp(scores).sum(dim=0, keepdim=True)
        h = wh @ cols
        mixed = h @ beta  # column j: sum_i beta[i, j] h(x_i)
        o = wv @ mixed
        out[bi] = (cols + o).reshape(c, height, width)
    return out.to(x.dtype)


class TestSelfAttention:
    def test_matches_dense_reference(self):
        torch.manual_seed(0)
        module = SelfAttention2d(8)
        x = torch.randn(2, 8, 2, 2)
        got = module(x)
        want = dense_attention_reference(module, x)
        assert torch.allclose(got, want, atol=1e-5)

    def test_columns_sum_to_one(self):
        torch.manual_seed(1)
        module = SelfAttention2d(16)
        x = torch.randn(1, 16, 3, 3)
        beta = module.attention_map(x)
        sums = beta.sum(dim=1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-6)

    def test_single_position(self):
        torch.manual_seed(2)
        module = SelfAttention2d(8)
        x = torch.randn(1, 8, 1, 1)
        beta = module.attention_map(x)
        assert beta.shape == (1, 1, 1)
        assert float(beta) == pytest.approx(1.0)
        expected = x + module.v(module.h(x))
        assert torch.allclose(module(x), expected, atol=1e-6)

    def test_inner_width_is_one_eighth(self):
        module = SelfAttention2d(64)
        assert module.f.out_channels == 8
        assert module.v.in_channels == 8

    def test_rejects_indivisible_channels(self):
        with pytest.raises(ConfigError):
            SelfAttention2d(12)


class TestSinusoidalEmbedding:
    def test_shape_and_determinism(self):
        t = torch.tensor([1, 5, 900])
        emb = sinusoidal_embedding(t, 32)
        assert emb.shape == (3, 32)
        assert torch.equal(emb, sinusoidal_embedding(t, 32))

    def test_distinct_steps_distinct_codes(self):
        emb = sinusoidal_embedding(torch.arange(1, 50), 16)
        dists = torch.cdist(emb.float(), emb.float())
        dists.fill_diagonal_(1.0)
        assert float(dists.min()) > 1e-4


class TestUNet:
    def test_time_pathway_is_the_only_weight_difference(self):
        kwargs = dict(in_channels=4, base_width=16, depth=3, image_size=32)
        with_time = UNet(time_embedding_dim=32, **kwargs)
        without = UNet(time_embedding_dim=None, **kwargs)
        diff = count_parameters(with_time) - count_parameters(without)
        assert diff == count_time_parameters(with_time)
        assert diff > 0

    def test_rejects_indivisible_image_size(self):
        with pytest.raises(ConfigError):
            UNet(in_channels=3, base_width=8, depth=4, image_size=20)

    def test_shapes_with_and_without_time(self):
        net_t = UNet(in_channels=4, base_width=8, depth=2, image_size=16,
                     time_embedding_dim=8)
        out = net_t(torch.randn(2, 4, 16, 16), torch.tensor([1, 3]))
        assert out.shape == (2, 1, 16, 16)
        net = UNet(in_channels=3, base_width=8, depth=2, image_size=16)
        out = net(torch.randn(2, 3, 16, 16))
        assert out.shape == (2, 1, 16, 16)

    def test_timeful_net_requires_t(self):
        net = UNet(in_channels=4, base_width=8, depth=2, image_size=16,
                   time_embedding_dim=8)
        with pytest.raises(ConfigError):
            net(torch.randn(1, 4, 16, 16))

    def test_attention_sits_at_one_eighth_resolution(self):
        net = UNet(in_channels=4, base_width=8, depth=4, image_size=32,
                   time_embedding_dim=8, attention_enabled=True)
        attn_levels = [
            i for i, m in enumerate(net.down_attn)
            if isinstance(m, SelfAttention2d)
        ]
        # levels are 32, 16, 8, 4: only the 4x4 level (= 32/8) has attention
        assert attn_levels == [3]
        assert isinstance(net.mid_attn, SelfAttention2d)
