import numpy as np
import pytest
import torch

from guided_gan.exceptions import ShapeError
from guided_gan.netcore import (
    FORGET_BIAS,
    JointDiscriminator,
    RecurrentDiscriminator,
    RecurrentEncoder,
    RecurrentGenerator,
    count_parameters,
    sample_prior,
)

B, D, W, L, H = 3, 2, 5, 4, 6


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)


def _blocks():
    return (
        RecurrentGenerator(L, D, H).double(),
        RecurrentEncoder(D, L, H).double(),
        RecurrentDiscriminator(D, H).double(),
        JointDiscriminator(D, L, H).double(),
    )


def test_output_shapes():
    G, E, Dd, Dj = _blocks()
    z = torch.randn(B, L, dtype=torch.float64)
    x = G(z, W)
    assert x.shape == (B, D, W)
    assert E(x).shape == (B, L)
    assert Dd(x).shape == (B, W)
    assert Dj(x, z).shape == (B, W)


def test_generator_output_is_bounded():
    G = RecurrentGenerator(L, D, H)
    x = G(10 * torch.randn(64, L), W)
    assert x.abs().max() <= 1.0


def test_generator_rejects_non_finite_latents():
    G = RecurrentGenerator(L, D, H)
    z = torch.zeros(1, L)
    z[0, 0] = float("nan")
    with pytest.raises(ValueError):
        G(z, W)


def test_shape_errors():
    G, E, Dd, Dj = _blocks()
    with pytest.raises(ShapeError):
        G(torch.randn(B, L + 1, dtype=torch.float64), W)
    with pytest.raises(ShapeError):
        E(torch.randn(B, D + 1, W, dtype=torch.float64))
    with pytest.raises(ShapeError):
        Dj(torch.randn(B, D, W, dtype=torch.float64), torch.randn(B + 1, L, dtype=torch.float64))


def test_encoder_is_deterministic_per_window():
    _, E, _, _ = _blocks()
    x = torch.randn(1, D, W, dtype=torch.float64).repeat(4, 1, 1)
    out = E(x)
    assert torch.equal(out, out[:1].expand_as(out))


def test_discriminator_is_causal():
    _, _, Dd, _ = _blocks()
    x = torch.randn(1, D, W, dtype=torch.float64)
    y = x.clone()
    y[:, :, 3:] += 1.0
    a, b = Dd(x), Dd(y)
    assert torch.equal(a[:, :3], b[:, :3])
    assert not torch.equal(a[:, 3:], b[:, 3:])


def test_joint_discriminator_latent_enters_every_step():
    _, _, _, Dj = _blocks()
    x = torch.randn(1, D, W, dtype=torch.float64)
    z1 = torch.randn(1, L, dtype=torch.float64)
    z2 = z1 + 1.0
    delta = Dj(x, z2) - Dj(x, z1)
    # the latent projection is added through a time-shared head, so its effect is constant over time
    assert torch.allclose(delta, delta[:, :1].expand_as(delta), atol=1e-12)
    assert delta.abs().min() > 0


def test_joint_discriminator_pairs_are_not_shuffled():
    _, _, _, Dj = _blocks()
    x = torch.randn(2, D, W, dtype=torch.float64)
    z = torch.randn(2, L, dtype=torch.float64)
    joint = Dj(x, z)
    for i in range(2):
        assert torch.allclose(joint[i], Dj(x[i:i + 1], z[i:i + 1])[0])


def test_zero_head_scores_are_logistic_of_bias():
    _, _, Dd, Dj = _blocks()
    x = torch.randn(B, D, W, dtype=torch.float64)
    z = torch.randn(B, L, dtype=torch.float64)
    expected = torch.sigmoid(torch.tensor(0.3, dtype=torch.float64))
    with torch.no_grad():
        for head in (Dd.head, Dj.head):
            head.weight.zero_()
            head.bias.fill_(0.3)
    assert torch.equal(Dd.scores(x), expected.expand(B, W))
    assert torch.equal(Dj.scores(x, z), expected.expand(B, W))


def test_joint_discriminator_without_latent_is_data_only():
    _, _, _, Dj = _blocks()
    data_only = RecurrentDiscriminator(D, H).double()
    with torch.no_grad():
        Dj.latent_proj.weight.zero_()
        Dj.latent_proj.bias.zero_()
        data_only.lstm.load_state_dict(Dj.lstm.state_dict())
        data_only.head.weight.copy_(Dj.head.weight[:, :H])
        data_only.head.bias.copy_(Dj.head.bias)
    x = torch.randn(B, D, W, dtype=torch.float64)
    z = torch.randn(B, L, dtype=torch.float64)
    assert torch.allclose(Dj(x, z), data_only(x), atol=1e-12)


def test_scores_lie_in_open_unit_interval():
    _, _, Dd, Dj = _blocks()
    x = 3 * torch.randn(16, D, W, dtype=torch.float64)
    z = 3 * torch.randn(16, L, dtype=torch.float64)
    for s in (Dd.scores(x), Dj.scores(x, z)):
        assert s.shape == (16, W)
        assert (s > 0).all() and (s < 1).all()


def test_encoder_is_order_sensitive():
    _, E, _, _ = _blocks()
    x = torch.randn(2, D, W, dtype=torch.float64)
    assert not torch.allclose(E(x), E(x.flip(-1)))


def test_generator_reacts_to_each_latent_coordinate():
    G, _, _, _ = _blocks()
    z = torch.randn(1, L, dtype=torch.float64)
    base = G(z, W)
    for k in range(L):
        moved = z.clone()
        moved[0, k] += 0.5
        assert not torch.allclose(G(moved, W), base), k


def test_forget_gate_bias_initialised():
    E = RecurrentEncoder(D, L, H)
    bias = E.lstm.bias_ih_l0.detach()
    assert torch.all(bias[H:2 * H] == FORGET_BIAS)
    assert torch.all(bias[:H] == 0) and torch.all(bias[2 * H:] == 0)
    assert torch.all(E.lstm.bias_hh_l0 == 0)


def test_recurrent_weights_orthogonal_per_gate():
    E = RecurrentEncoder(D, L, H)
    w = E.lstm.weight_hh_l0.detach()
    for gate in range(4):
        block = w[gate * H:(gate + 1) * H]
        assert torch.allclose(block @ block.T, torch.eye(H), atol=1e-5)


def test_variational_encoder_heads():
    E = RecurrentEncoder(D, L, H, variational=True).double()
    mu, log_var = E.posterior(torch.randn(B, D, W, dtype=torch.float64))
    assert mu.shape == log_var.shape == (B, L)
    assert torch.equal(E(torch.zeros(1, D, W, dtype=torch.float64)), E.posterior(torch.zeros(1, D, W, dtype=torch.float64))[0])


def test_parameter_counts_match_brute_force():
    for block in _blocks():
        assert count_parameters(block) == sum(int(np.prod(t.shape)) for t in block.state_dict().values())
    assert count_parameters(None) == 0
    # LSTM(D -> H): 4H(D + H) weights + 8H biases, head H -> D
    assert count_parameters(RecurrentEncoder(9, 100, 100)) == 4 * 100 * (9 + 100) + 8 * 100 + 100 * 100 + 100


def test_sample_prior_statistics_and_seed():
    z = sample_prior(20000, 100, seed=1)
    assert z.shape == (20000, 100)
    assert abs(z.mean().item()) < 0.01
    assert abs(z.std().item() - 1.0) < 0.01
    assert torch.equal(sample_prior(5, 100, seed=1), sample_prior(5, 100, seed=1))
    assert not torch.equal(sample_prior(5, 100, seed=1), sample_prior(5, 100, seed=2))


def test_sample_prior_rejects_negative_n():
    with pytest.raises(ValueError):
        sample_prior(-1)


# --- gradients ---------------------------------------------------------------

def _finite_difference_check(fn, tensors, eps=1e-6, tol=1e-4):
    """Compare autograd gradients of scalar fn() w.r.t. tensors against central differences."""
    out = fn()
    grads = torch.autograd.grad(out, tensors)
    for t, g in zip(tensors, grads):
        flat = t.data.view(-1)
        numeric = torch.zeros_like(flat)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            plus = fn().item()
            flat[i] = orig - eps
            minus = fn().item()
            flat[i] = orig
            numeric[i] = (plus - minus) / (2 * eps)
        analytic = g.reshape(-1)
        denom = torch.clamp(analytic.abs() + numeric.abs(), min=1e-8)
        rel = ((analytic - numeric).abs() / denom).max().item()
        assert rel < tol or (analytic - numeric).abs().max().item() < 1e-9, f"relative error {rel}"


@pytest.mark.parametrize("which", ["generator", "encoder", "discriminator", "joint"])
def test_block_gradients_match_finite_differences(which):
    torch.manual_seed(1)
    G, E, Dd, Dj = (RecurrentGenerator(3, 2, 3).double(), RecurrentEncoder(2, 3, 3).double(),
                    RecurrentDiscriminator(2, 3).double(), JointDiscriminator(2, 3, 3).double())
    x = torch.randn(2, 2, 4, dtype=torch.float64, requires_grad=True)
    z = torch.randn(2, 3, dtype=torch.float64, requires_grad=True)
    fn = {
        "generator": (lambda: (G(z, 4) ** 2).sum(), [z] + list(G.parameters())),
        "encoder": (lambda: (E(x) ** 2).sum(), [x] + list(E.parameters())),
        "discriminator": (lambda: Dd(x).sum(), [x] + list(Dd.parameters())),
        "joint": (lambda: Dj(x, z).sum(), [x, z] + list(Dj.parameters())),
    }[which]
    _finite_difference_check(*fn)


def test_gradcheck_on_inputs():
    torch.manual_seed(2)
    G = RecurrentGenerator(3, 2, 3).double()
    Dj = JointDiscriminator(2, 3, 3).double()
    z = torch.randn(2, 3, dtype=torch.float64, requires_grad=True)
    x = torch.randn(2, 2, 4, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(lambda t: G(t, 4), (z,))
    assert torch.autograd.gradcheck(lambda a, b: Dj(a, b), (x, z))
