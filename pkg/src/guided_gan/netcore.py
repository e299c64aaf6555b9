# guided_gan/netcore.py
"""
Recurrent building blocks: generator, encoder, data discriminator and joint
data-latent discriminator. Each is a single-layer unidirectional LSTM plus
linear heads.

Window batches are (batch, D, W), the same layout as SequenceWindow.values;
blocks transpose to (batch, W, D) internally for the recurrence. Latent
batches are (batch, L). Discriminators return per-timestep logits (batch, W);
``scores`` applies the logistic squashing.
"""
from __future__ import annotations

import math
from typing import Optional

import torch
import torch.nn as nn

from guided_gan.exceptions import ShapeError

LATENT_DIM = 100
HIDDEN_DIM = 100
FORGET_BIAS = 1.0


def init_linear(layer: nn.Linear) -> None:
    bound = 1.0 / math.sqrt(layer.in_features)
    nn.init.uniform_(layer.weight, -bound, bound)
    nn.init.zeros_(layer.bias)


def init_lstm(lstm: nn.LSTM) -> None:
    """Input weights uniform(+-1/sqrt(fan_in)), recurrent weights orthogonal per gate, forget bias 1."""
    H = lstm.hidden_size
    for name, param in lstm.named_parameters():
        if name.startswith("weight_ih"):
            bound = 1.0 / math.sqrt(param.shape[1])
            nn.init.uniform_(param, -bound, bound)
        elif name.startswith("weight_hh"):
            for gate in range(4):
                nn.init.orthogonal_(param.data[gate * H:(gate + 1) * H])
        elif name.startswith("bias_ih"):
            nn.init.zeros_(param)
            # gate order in nn.LSTM: input, forget, cell, output
            param.data[H:2 * H].fill_(FORGET_BIAS)
        elif name.startswith("bias_hh"):
            nn.init.zeros_(param)


def _check_windows(x: torch.Tensor, channels: int, who: str) -> None:
    if x.dim() != 3 or x.shape[1] != channels:
        raise ShapeError(f"{who} expects (batch, {channels}, W) windows, got {tuple(x.shape)}")


def _check_latents(z: torch.Tensor, latent_dim: int, who: str) -> None:
    if z.dim() != 2 or z.shape[1] != latent_dim:
        raise ShapeError(f"{who} expects (batch, {latent_dim}) latents, got {tuple(z.shape)}")


class RecurrentGenerator(nn.Module):
    """A single latent, replicated over W steps, decoded by an LSTM and a shared tanh head."""

    def __init__(self, latent_dim: int, channels: int, hidden_dim: int = HIDDEN_DIM):
        super().__init__()
        self.latent_dim = latent_dim
        self.channels = channels
        self.lstm = nn.LSTM(input_size=latent_dim, hidden_size=hidden_dim, num_layers=1, batch_first=True)
        self.head = nn.Linear(hidden_dim, channels)
        init_lstm(self.lstm)
        init_linear(self.head)

    def forward(self, z: torch.Tensor, seq_len: int) -> torch.Tensor:
        _check_latents(z, self.latent_dim, "generator")
        if not torch.isfinite(z).all():
            raise ValueError("generator received non-finite latents")
        steps = z.unsqueeze(1).expand(-1, seq_len, -1)
        hidden, _ = self.lstm(steps)
        return torch.tanh(self.head(hidden)).transpose(1, 2)


class RecurrentEncoder(nn.Module):
    """
    Reads a window and regresses the latent from the final hidden state.

    With ``variational=True`` the head emits (mu, log_var) of width L each.
    """

    def __init__(self, channels: int, latent_dim: int, hidden_dim: int = HIDDEN_DIM, variational: bool = False):
        super().__init__()
        self.channels = channels
        self.latent_dim = latent_dim
        self.variational = variational
        self.lstm = nn.LSTM(input_size=channels, hidden_size=hidden_dim, num_layers=1, batch_first=True)
        self.head = nn.Linear(hidden_dim, 2 * latent_dim if variational else latent_dim)
        init_lstm(self.lstm)
        init_linear(self.head)

    def final_state(self, x: torch.Tensor) -> torch.Tensor:
        _check_windows(x, self.channels, "encoder")
        hidden, _ = self.lstm(x.transpose(1, 2))
        return hidden[:, -1]

    def posterior(self, x: torch.Tensor):
        out = self.head(self.final_state(x))
        if not self.variational:
            return out, None
        mu, log_var = out.chunk(2, dim=1)
        return mu, log_var

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.posterior(x)[0]


class RecurrentDiscriminator(nn.Module):
    """Real-vs-fake logits at every timestep from one shared linear head."""

    def __init__(self, channels: int, hidden_dim: int = HIDDEN_DIM):
        super().__init__()
        self.channels = channels
        self.lstm = nn.LSTM(input_size=channels, hidden_size=hidden_dim, num_layers=1, batch_first=True)
        self.head = nn.Linear(hidden_dim, 1)
        init_lstm(self.lstm)
        init_linear(self.head)

    def hidden_states(self, x: torch.Tensor) -> torch.Tensor:
        _check_windows(x, self.channels, "discriminator")
        hidden, _ = self.lstm(x.transpose(1, 2))
        return hidden

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.hidden_states(x)).squeeze(-1)

    def scores(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.forward(x))


class JointDiscriminator(nn.Module):
    """
    Judges (window, latent) pairs. The window runs through the LSTM; the latent
    is linearly projected, replicated over W steps and concatenated with each
    hidden state before the shared per-timestep head.
    """

    def __init__(self, channels: int, latent_dim: int, hidden_dim: int = HIDDEN_DIM,
                 projection_dim: Optional[int] = None):
        super().__init__()
        self.channels = channels
        self.latent_dim = latent_dim
        self.hidden_dim = hidden_dim
        projection_dim = projection_dim or hidden_dim
        self.lstm = nn.LSTM(input_size=channels, hidden_size=hidden_dim, num_layers=1, batch_first=True)
        self.latent_proj = nn.Linear(latent_dim, projection_dim)
        self.head = nn.Linear(hidden_dim + projection_dim, 1)
        init_lstm(self.lstm)
        init_linear(self.latent_proj)
        init_linear(self.head)

    def hidden_states(self, x: torch.Tensor) -> torch.Tensor:
        _check_windows(x, self.channels, "joint discriminator")
        hidden, _ = self.lstm(x.transpose(1, 2))
        return hidden

    def forward(self, x: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        _check_latents(z, self.latent_dim, "joint discriminator")
        hidden = self.hidden_states(x)
        if hidden.shape[0] != z.shape[0]:
            raise ShapeError(f"batch mismatch: {hidden.shape[0]} windows vs {z.shape[0]} latents")
        proj = self.latent_proj(z).unsqueeze(1).expand(-1, hidden.shape[1], -1)
        return self.head(torch.cat([hidden, proj], dim=-1)).squeeze(-1)

    def scores(self, x: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.forward(x, z))


def sample_prior(n: int, latent_dim: int = LATENT_DIM, seed: Optional[int] = None, *,
                 generator: Optional[torch.Generator] = None, dtype=torch.float32) -> torch.Tensor:
    """n i.i.d. N(0, I) latents as an (n, L) tensor. Either ``seed`` or ``generator`` fixes the draw."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if generator is None:
        generator = torch.Generator()
        generator.manual_seed(0 if seed is None else int(seed))
    return torch.randn(n, latent_dim, generator=generator, dtype=dtype)


def count_parameters(module: Optional[nn.Module]) -> int:
    if module is None:
        return 0
    return sum(p.numel() for p in module.parameters())
