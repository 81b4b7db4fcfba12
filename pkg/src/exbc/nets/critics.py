"""Twin action-value networks with slow-moving target copies."""

import numpy as np

from exbc.nets.mlp import Mlp


def polyak_update(target_params, online_params, tau):
    """In-place t <- (1 - tau) t + tau * o over matched parameter lists."""
    for t, o in zip(target_params, online_params):
        t *= 1.0 - tau
        t += tau * o


class TwinCritics:
    """Two independent Q(s, a) nets; targets bootstrap from the pairwise min."""

    def __init__(self, obs_dim, act_dim, hidden, rng):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.q1 = Mlp(obs_dim + act_dim, hidden, 1, rng)
        self.q2 = Mlp(obs_dim + act_dim, hidden, 1, rng)
        self.t1 = self.q1.copy()
        self.t2 = self.q2.copy()

    def joint_input(self, states, actions):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        return np.ascontiguousarray(np.concatenate([states, actions], axis=1))

    def forward_both(self, x):
        """Online twins; returns (q1, q2, acts1, acts2) with q* shaped (n,)."""
        acts1 = self.q1.forward_acts(x)
        acts2 = self.q2.forward_acts(x)
        return acts1[-1][:, 0], acts2[-1][:, 0], acts1, acts2

    def target_min(self, states, actions):
        x = self.joint_input(states, actions)
        v1 = self.t1.forward(x)[:, 0]
        v2 = self.t2.forward(x)[:, 0]
        return np.minimum(v1, v2)

    def min_q(self, states, actions):
        x = self.joint_input(states, actions)
        v1 = self.q1.forward(x)[:, 0]
        v2 = self.q2.forward(x)[:, 0]
        return np.minimum(v1, v2)

    def min_with_action_grad(self, states, actions):
        """Pairwise-min Q and its gradient w.r.t. the action input.

        The gradient follows whichever twin attains the min per sample.
        """
        x = self.joint_input(states, actions)
        q1, q2, acts1, acts2 = self.forward_both(x)
        take1 = q1 <= q2
        g1 = take1.astype(np.float64)[:, None]
        _, dx1 = self.q1.backward(acts1, g1, need_input_grad=True)
        _, dx2 = self.q2.backward(acts2, 1.0 - g1, need_input_grad=True)
        dq_da = (dx1 + dx2)[:, self.obs_dim:]
        return np.where(take1, q1, q2), dq_da

    def polyak(self, tau):
        polyak_update(self.t1.parameters(), self.q1.parameters(), tau)
        polyak_update(self.t2.parameters(), self.q2.parameters(), tau)

    def online_parameters(self):
        return self.q1.parameters() + self.q2.parameters()
