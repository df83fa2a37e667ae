"""Policy and value networks for the off-policy actor-critic learner.

The actor is a squashed-Gaussian MLP: a tanh squash maps samples onto the
environment's [0, 1] action box. Critics are twin Q MLPs over concatenated
observation and action. All hidden layers are ReLU.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0


def mlp(sizes, out_dim):
    layers = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        layers += [nn.Linear(a, b), nn.ReLU()]
    layers.append(nn.Linear(sizes[-1], out_dim))
    return nn.Sequential(*layers)


class SquashedGaussianActor(nn.Module):
    #: initial mean-head bias; tanh(-1) maps the starting policy to ~0.12
    #: excitation, near the passive (stable) region instead of mid-range
    #: co-contraction
    MU_BIAS_INIT = -1.0

    def __init__(self, obs_dim, act_dim, hidden=(256, 256)):
        super().__init__()
        self.net = mlp((obs_dim, *hidden[:-1]), hidden[-1])
        self.relu = nn.ReLU()
        self.mu = nn.Linear(hidden[-1], act_dim)
        self.log_std = nn.Linear(hidden[-1], act_dim)
        self.act_dim = act_dim
        with torch.no_grad():
            self.mu.bias.fill_(self.MU_BIAS_INIT)

    def forward(self, obs):
        h = self.relu(self.net(obs))
        mu = self.mu(h)
        log_std = torch.clamp(self.log_std(h), LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std

    def sample(self, obs, noise=None, generator=None):
        """Reparameterized action in [0, 1] and its log-probability.

        noise, when given, fixes the standard-normal draw (used for seeding
        and for finite-difference gradient checks).
        """
        mu, log_std = self(obs)
        std = log_std.exp()
        if noise is None:
            noise = torch.randn(mu.shape, generator=generator,
                                dtype=mu.dtype, device=mu.device)
        z = mu + std * noise
        action = 0.5 * (torch.tanh(z) + 1.0)
        # log N(z; mu, std) minus the log-Jacobian of 0.5*(tanh(z)+1)
        log_prob = (-0.5 * ((z - mu) / std) ** 2 - log_std
                    - 0.5 * math.log(2 * math.pi)).sum(-1)
        # log(0.5 * (1 - tanh(z)^2)) in a softplus-stable form
        log_det = (math.log(2.0) - z - torch.nn.functional.softplus(-2.0 * z)) * 2.0 \
            + math.log(0.5)
        log_prob = log_prob - log_det.sum(-1)
        return action, log_prob

    def mean_action(self, obs):
        mu, _ = self(obs)
        return 0.5 * (torch.tanh(mu) + 1.0)


class TwinQ(nn.Module):
    def __init__(self, obs_dim, act_dim, hidden=(256, 256)):
        super().__init__()
        self.q1 = mlp((obs_dim + act_dim, *hidden), 1)
        self.q2 = mlp((obs_dim + act_dim, *hidden), 1)

    def forward(self, obs, act):
        x = torch.cat([obs, act], dim=-1)
        return self.q1(x).squeeze(-1), self.q2(x).squeeze(-1)
