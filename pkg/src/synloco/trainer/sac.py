"""Soft actor-critic updates: twin critics, squashed-Gaussian actor, and an
auto-tuned entropy temperature with target entropy -dim(action).

The learning rate is supplied per update call so the trainer can apply its
linear decay exactly. Checkpoints are versioned and carry everything needed
to resume or to rebuild a deterministic evaluation policy, including the
synergy basis when one is attached.
"""

from __future__ import annotations

import math

import numpy as np
import torch

from ..errors import DataError
from .nets import SquashedGaussianActor, TwinQ

CHECKPOINT_VERSION = 1


class SacAgent:
    def __init__(self, obs_dim: int, act_dim: int,
                 policy_hidden=(256, 256), q_hidden=(256, 256),
                 lr: float = 3e-4, gamma: float = 0.99, tau: float = 0.005,
                 target_entropy: float | None = None, seed: int = 0,
                 dtype=torch.float32):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.policy_hidden = tuple(policy_hidden)
        self.q_hidden = tuple(q_hidden)
        self.gamma = gamma
        self.tau = tau
        self.dtype = dtype
        self.target_entropy = (-float(act_dim) if target_entropy is None
                               else float(target_entropy))

        torch.manual_seed(seed)
        self.generator = torch.Generator().manual_seed(seed)
        self.actor = SquashedGaussianActor(obs_dim, act_dim, self.policy_hidden).to(dtype)
        self.q = TwinQ(obs_dim, act_dim, self.q_hidden).to(dtype)
        self.q_target = TwinQ(obs_dim, act_dim, self.q_hidden).to(dtype)
        self.q_target.load_state_dict(self.q.state_dict())
        for p in self.q_target.parameters():
            p.requires_grad_(False)
        self.log_alpha = torch.zeros(1, dtype=dtype, requires_grad=True)

        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=lr)
        self.q_opt = torch.optim.Adam(self.q.parameters(), lr=lr)
        self.alpha_opt = torch.optim.Adam([self.log_alpha], lr=lr)
        self.updates = 0

    @property
    def alpha(self) -> float:
        return float(self.log_alpha.detach().exp())

    # -- acting ---------------------------------------------------------------

    def act(self, obs, deterministic: bool = False) -> np.ndarray:
        obs_t = torch.as_tensor(obs, dtype=self.dtype).unsqueeze(0)
        with torch.no_grad():
            if deterministic:
                action = self.actor.mean_action(obs_t)
            else:
                action, _ = self.actor.sample(obs_t, generator=self.generator)
        return action.squeeze(0).numpy().astype(np.float64)

    # -- losses (exposed separately for gradient verification) ----------------

    def _tensors(self, batch: dict) -> dict:
        return {k: torch.as_tensor(v, dtype=self.dtype) for k, v in batch.items()}

    def critic_loss(self, batch: dict, next_noise=None) -> torch.Tensor:
        b = self._tensors(batch)
        with torch.no_grad():
            next_action, next_logp = self.actor.sample(
                b["next_obs"], noise=next_noise, generator=self.generator)
            q1_t, q2_t = self.q_target(b["next_obs"], next_action)
            backup = b["rew"] + self.gamma * (1.0 - b["done"]) * (
                torch.minimum(q1_t, q2_t) - self.log_alpha.exp().detach() * next_logp)
        q1, q2 = self.q(b["obs"], b["act"])
        return ((q1 - backup) ** 2).mean() + ((q2 - backup) ** 2).mean()

    def actor_loss(self, batch: dict, noise=None) -> tuple:
        b = self._tensors(batch)
        action, logp = self.actor.sample(b["obs"], noise=noise,
                                         generator=self.generator)
        q1, q2 = self.q(b["obs"], action)
        q_pi = torch.minimum(q1, q2)
        loss = (self.log_alpha.exp().detach() * logp - q_pi).mean()
        return loss, logp

    # -- one gradient step ------------------------------------------------------

    def update(self, batch: dict, lr: float) -> dict:
        for opt in (self.actor_opt, self.q_opt, self.alpha_opt):
            for group in opt.param_groups:
                group["lr"] = lr

        c_loss = self.critic_loss(batch)
        self.q_opt.zero_grad()
        c_loss.backward()
        self.q_opt.step()

        for p in self.q.parameters():
            p.requires_grad_(False)
        a_loss, logp = self.actor_loss(batch)
        self.actor_opt.zero_grad()
        a_loss.backward()
        self.actor_opt.step()
        for p in self.q.parameters():
            p.requires_grad_(True)

        alpha_loss = -(self.log_alpha
                       * (logp + self.target_entropy).detach()).mean()
        self.alpha_opt.zero_grad()
        alpha_loss.backward()
        self.alpha_opt.step()

        with torch.no_grad():
            for p, p_t in zip(self.q.parameters(), self.q_target.parameters()):
                p_t.mul_(1.0 - self.tau).add_(self.tau * p)

        c_val = float(c_loss.detach())
        a_val = float(a_loss.detach())
        if not (math.isfinite(c_val) and math.isfinite(a_val)):
            raise FloatingPointError(
                f"non-finite loss at update {self.updates}: "
                f"critic={c_val}, actor={a_val}")
        self.updates += 1
        return {"critic_loss": c_val, "actor_loss": a_val,
                "alpha": self.alpha, "entropy": float(-logp.detach().mean())}

    # -- checkpoints -------------------------------------------------------------

    def save(self, path, extra: dict | None = None):
        payload = {
            "version": CHECKPOINT_VERSION,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "policy_hidden": list(self.policy_hidden),
            "q_hidden": list(self.q_hidden),
            "gamma": self.gamma,
            "tau": self.tau,
            "target_entropy": self.target_entropy,
            "updates": self.updates,
            "actor": self.actor.state_dict(),
            "q": self.q.state_dict(),
            "q_target": self.q_target.state_dict(),
            "log_alpha": self.log_alpha.detach().clone(),
            "actor_opt": self.actor_opt.state_dict(),
            "q_opt": self.q_opt.state_dict(),
            "alpha_opt": self.alpha_opt.state_dict(),
            "extra": extra or {},
        }
        torch.save(payload, path)

    @classmethod
    def load(cls, path, seed: int = 0) -> tuple:
        try:
            payload = torch.load(path, map_location="cpu", weights_only=False)
        except Exception as exc:
            raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
        if payload.get("version") != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {payload.get('version')}")
        agent = cls(payload["obs_dim"], payload["act_dim"],
                    policy_hidden=payload["policy_hidden"],
                    q_hidden=payload["q_hidden"], gamma=payload["gamma"],
                    tau=payload["tau"], target_entropy=payload["target_entropy"],
                    seed=seed)
        agent.actor.load_state_dict(payload["actor"])
        agent.q.load_state_dict(payload["q"])
        agent.q_target.load_state_dict(payload["q_target"])
        with torch.no_grad():
            agent.log_alpha.copy_(payload["log_alpha"])
        agent.actor_opt.load_state_dict(payload["actor_opt"])
        agent.q_opt.load_state_dict(payload["q_opt"])
        agent.alpha_opt.load_state_dict(payload["alpha_opt"])
        agent.updates = payload["updates"]
        return agent, payload["extra"]
