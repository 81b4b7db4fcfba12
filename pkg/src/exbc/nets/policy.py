"""Squashed-Gaussian policy head.

The network maps a state to (mean, raw log-std); actions are tanh of a
reparameterized Gaussian draw, so everything stays differentiable through the
noise.  Log-densities include the tanh change-of-variables correction.
"""

import numpy as np

from exbc.nets.mlp import Mlp

LOG_STD_MIN = -10.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _softplus(z):
    # max(z,0) + log1p(exp(-|z|)) avoids overflow on either tail
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _log_one_minus_tanh_sq(u):
    # log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)), exact and stable
    return 2.0 * (np.log(2.0) - u - _softplus(-2.0 * u))


class SquashedGaussianPolicy:
    """tanh(mu + sigma * eps) with per-dimension diagonal noise."""

    def __init__(self, obs_dim, act_dim, hidden, rng):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.net = Mlp(obs_dim, hidden, 2 * act_dim, rng)

    def parameters(self):
        return self.net.parameters()

    def sample(self, states, rng):
        """Draw actions; returns (actions, log_probs, cache).

        cache feeds backward(); log_probs are per-sample scalars.
        """
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        acts = self.net.forward_acts(states)
        out = acts[-1]
        d = self.act_dim
        mu = out[:, :d]
        raw = out[:, d:]
        log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        eps = rng.standard_normal(mu.shape)
        u = mu + std * eps
        actions = np.tanh(u)
        log_probs = np.sum(
            -0.5 * eps**2 - log_std - _HALF_LOG_2PI - _log_one_minus_tanh_sq(u),
            axis=1,
        )
        cache = {
            "acts": acts,
            "std": std,
            "eps": eps,
            "u": u,
            "actions": actions,
            "active": (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX),
        }
        return actions, log_probs, cache

    def mean_action(self, states):
        """Deterministic head for evaluation: tanh of the mean."""
        states = np.asarray(states, dtype=np.float64)
        out = self.net.forward(states)
        if out.ndim == 1:
            return np.tanh(out[: self.act_dim])
        return np.tanh(out[:, : self.act_dim])

    def backward(self, cache, d_actions, d_log_probs):
        """Parameter gradients of a scalar loss.

        d_actions is d(loss)/d(action) per sample and dimension; d_log_probs is
        d(loss)/d(log pi) per sample.  Returns grads aligned with parameters().
        """
        actions = cache["actions"]
        std = cache["std"]
        eps = cache["eps"]
        tanh_u = actions
        through_a = d_actions * (1.0 - actions**2)
        dlp = d_log_probs[:, None]
        g_mu = through_a + dlp * (2.0 * tanh_u)
        se = std * eps
        g_log_std = through_a * se + dlp * (2.0 * tanh_u * se - 1.0)
        g_log_std = np.where(cache["active"], g_log_std, 0.0)
        grad_out = np.concatenate([g_mu, g_log_std], axis=1)
        grads, _ = self.net.backward(cache["acts"], grad_out)
        return grads
