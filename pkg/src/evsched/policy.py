"""Tanh-squashed Gaussian policy head for one-dimensional bounded actions.

action = scale * tanh(mu + sigma * xi) + offset, with the network emitting
(mu, log_std). Log-densities carry the change-of-variables correction
log(1 - tanh^2 + eps) + log(scale) so they integrate to one over the
action interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import DenseNet

LOG_2PI = float(np.log(2.0 * np.pi))

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6


@dataclass
class SampleCache:
    """Intermediates from one reparameterized draw, kept for backward()."""

    net_cache: object
    xi: np.ndarray
    sigma: np.ndarray
    t: np.ndarray          # tanh(u)
    dtanh: np.ndarray      # 1 - t^2
    clamp_mask: np.ndarray
    action: np.ndarray
    log_prob: np.ndarray


class GaussianPolicyHead:
    """DenseNet backbone with a two-unit (mu, log_std) output."""

    def __init__(self, obs_dim: int, hidden_sizes, rng: np.random.Generator,
                 action_low: float, action_high: float,
                 log_std_min: float = LOG_STD_MIN, log_std_max: float = LOG_STD_MAX,
                 mean_head_scale: float = 0.01):
        if not action_low < action_high:
            raise ValueError("need action_low < action_high")
        self.net = DenseNet((obs_dim, *hidden_sizes, 2), rng, final_scale=mean_head_scale)
        self.scale = 0.5 * (action_high - action_low)
        self.offset = 0.5 * (action_high + action_low)
        self.log_std_min = float(log_std_min)
        self.log_std_max = float(log_std_max)

    @property
    def obs_dim(self) -> int:
        return self.net.sizes[0]

    def _heads(self, out):
        mu = out[:, 0]
        raw = out[:, 1]
        log_std = np.clip(raw, self.log_std_min, self.log_std_max)
        clamp_mask = (raw >= self.log_std_min) & (raw <= self.log_std_max)
        return mu, log_std, clamp_mask

    def sample_cached(self, obs: np.ndarray, xi: np.ndarray) -> SampleCache:
        """Reparameterized draw with fixed standard-normal noise ``xi``."""
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        xi = np.asarray(xi, dtype=np.float64).reshape(obs.shape[0])
        out, cache = self.net.forward_cached(obs)
        mu, log_std, clamp_mask = self._heads(out)
        sigma = np.exp(log_std)
        u = mu + sigma * xi
        t = np.tanh(u)
        dtanh = 1.0 - t * t
        action = self.scale * t + self.offset
        log_prob = (
            -0.5 * xi * xi
            - log_std
            - 0.5 * LOG_2PI
            - np.log(dtanh + SQUASH_EPS)
            - np.log(self.scale)
        )
        return SampleCache(
            net_cache=cache, xi=xi, sigma=sigma, t=t, dtanh=dtanh,
            clamp_mask=clamp_mask, action=action, log_prob=log_prob,
        )

    def sample(self, obs: np.ndarray, xi: np.ndarray):
        c = self.sample_cached(obs, xi)
        return c.action, c.log_prob

    def deterministic(self, obs: np.ndarray) -> np.ndarray:
        """The zero-noise action scale * tanh(mu) + offset."""
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        out = self.net.forward(obs)
        return self.scale * np.tanh(out[:, 0]) + self.offset

    def log_prob(self, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
        """Density of given actions under the current policy."""
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        action = np.asarray(action, dtype=np.float64).reshape(obs.shape[0])
        out = self.net.forward(obs)
        mu, log_std, _ = self._heads(out)
        sigma = np.exp(log_std)
        pre = (action - self.offset) / self.scale
        pre = np.clip(pre, -1.0 + SQUASH_EPS, 1.0 - SQUASH_EPS)
        u = np.arctanh(pre)
        z = (u - mu) / sigma
        return (
            -0.5 * z * z
            - log_std
            - 0.5 * LOG_2PI
            - np.log(1.0 - pre * pre + SQUASH_EPS)
            - np.log(self.scale)
        )

    def backward_through_sample(self, cache: SampleCache, g_action: np.ndarray,
                                g_logp: np.ndarray) -> np.ndarray:
        """Parameter gradient of sum_i [g_action_i * a_i + g_logp_i * logp_i].

        The noise xi is held fixed (reparameterization); gradients flow
        through both the action and the density term.
        """
        t, dtanh, sigma, xi = cache.t, cache.dtanh, cache.sigma, cache.xi
        da_du = self.scale * dtanh
        dlogp_du = 2.0 * t * dtanh / (dtanh + SQUASH_EPS)
        g_u = g_action * da_du + g_logp * dlogp_du
        g_mu = g_u
        g_log_std = (g_u * (sigma * xi) + g_logp * (-1.0)) * cache.clamp_mask
        upstream = np.stack([g_mu, g_log_std], axis=1)
        grads, _ = self.net.backward(cache.net_cache, upstream)
        return grads
