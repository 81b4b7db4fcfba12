"""Reward models driven purely by success-state examples.

Three interchangeable signal sources:

* SqilReward: constant labels, +scale on example states and -scale on every
  collected transition.
* DacRewards: per-task discriminators trained to tell example states from
  replay states; the reward is the (clipped) discriminator logit times scale.
  Training uses a two-sided gradient penalty on interpolated states.
* rce_targets: classifier-style recursive targets for training the critic
  directly as a success classifier, no separate reward at all.
"""

from fractions import Fraction

import numpy as np

from exbc.errors import DimensionError
from exbc.nets.mlp import Mlp
from exbc.nets.optim import AdamW


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


class SqilReward:
    """Constant -scale on replay data, +scale on example states."""

    kind = "sqil"

    def __init__(self, scale=0.1):
        self.scale = float(scale)

    def replay_reward(self, n):
        return np.full(n, -self.scale)

    def example_reward(self, n):
        return np.full(n, self.scale)

    def return_bounds(self, gamma):
        """Tight (q_min, q_max) for an infinite discounted sum of the labels.

        Evaluated in exact decimal arithmetic so round configs give round
        bounds (scale 0.1 at gamma 0.99 is exactly -10/+10, not 9.99...).
        """
        span = Fraction(str(self.scale)) / (1 - Fraction(str(gamma)))
        return -float(span), float(span)


class RceClassifier:
    """Marker for the classifier-style mode: the critic is the reward model."""

    kind = "rce"


def rce_targets(v_next, gamma):
    """Recursive classifier targets and loss weights for replay transitions.

    v_next is the classifier value at the next state (in (0, 1)).  Returns
    (target, weight) where target = gamma*w / (1 + gamma*w) with w = v/(1-v)
    and weight = 1 + gamma*w.  Example states get target 1 with weight 1-gamma.
    """
    v = np.clip(np.asarray(v_next, dtype=np.float64), 1e-7, 1.0 - 1e-7)
    w = v / (1.0 - v)
    gw = gamma * w
    return gw / (1.0 + gw), 1.0 + gw


def _tangent_forward(weights, acts, direction):
    """Jacobian-vector product pass: tangent of each activation along direction.

    Returns (pre-nonlinearity tangents per layer, tangent activations with
    index 0 being the input direction itself).
    """
    s = [direction]
    pre = []
    last = len(weights) - 1
    for i, w in enumerate(weights):
        m = s[-1] @ w.T
        pre.append(m)
        if i < last:
            a = acts[i + 1]
            s.append((1.0 - a * a) * m)
        else:
            s.append(m)
    return pre, s


def gradient_penalty_grads(net, x_hat, coeff):
    """Two-sided penalty coeff * E[(||dD/dx|| - 1)^2] and its parameter grads.

    Exact double backprop: reverse pass for dD/dx, then a forward-over-reverse
    sweep for the derivative of the penalty with respect to the weights.
    Returns (penalty value, grads aligned with net.parameters()).
    """
    n = x_hat.shape[0]
    acts = net.forward_acts(x_hat)
    _, v = net.backward(acts, np.ones((n, 1)), need_input_grad=True)
    norm = np.sqrt(np.sum(v * v, axis=1) + 1e-12)
    resid = norm - 1.0
    penalty = coeff * float(np.mean(resid**2))
    direction = (2.0 * coeff / n) * (resid / norm)[:, None] * v
    pre, s = _tangent_forward(net.weights, acts, direction)
    n_layers = len(net.weights)
    g_s = np.ones((n, 1))
    g_a = np.zeros((n, 1))
    grads = [None] * (2 * n_layers)
    for i in range(n_layers - 1, -1, -1):
        if i == n_layers - 1:
            g_m = g_s
            g_z = g_a
        else:
            a = acts[i + 1]
            d = 1.0 - a * a
            g_m = g_s * d
            g_a = g_a - 2.0 * a * pre[i] * g_s
            g_z = g_a * d
        grads[2 * i] = g_m.T @ s[i] + g_z.T @ acts[i]
        grads[2 * i + 1] = g_z.sum(axis=0)
        w = net.weights[i]
        g_s = g_m @ w
        g_a = g_z @ w
    return penalty, grads


class DacRewards:
    """One discriminator head per task, first layer shared across tasks.

    Each head is trained with logistic loss (examples labeled 1, replay 0)
    plus a gradient penalty on uniform interpolants between the two batches.
    The reward for a state is scale * clip(logit, -clip, clip), which equals
    scale * (log D - log(1 - D)) for the sigmoid discriminator.
    """

    kind = "dac"

    def __init__(self, obs_dim, task_names, hidden, rng, lr=3e-4,
                 scale=0.1, grad_penalty=10.0, weight_decay=1e-2,
                 max_grad_norm=10.0, logit_clip=15.0, share_first_layer=True):
        self.obs_dim = int(obs_dim)
        self.scale = float(scale)
        self.grad_penalty = float(grad_penalty)
        self.logit_clip = float(logit_clip)
        self.nets = {}
        self.optim = {}
        shared_w = shared_b = None
        for name in task_names:
            net = Mlp(obs_dim, hidden, 1, rng)
            if share_first_layer:
                if shared_w is None:
                    shared_w, shared_b = net.weights[0], net.biases[0]
                else:
                    net.weights[0] = shared_w
                    net.biases[0] = shared_b
            self.nets[name] = net
            self.optim[name] = AdamW(
                net.parameters(), lr=lr, weight_decay=weight_decay,
                max_grad_norm=max_grad_norm, name=f"discriminator[{name}]",
            )

    def logits(self, task_name, states):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if states.shape[1] != self.obs_dim:
            raise DimensionError(
                f"discriminator expects dim {self.obs_dim}, got {states.shape[1]}"
            )
        return self.nets[task_name].forward(states)[:, 0]

    def reward(self, task_name, states):
        logit = np.clip(self.logits(task_name, states),
                        -self.logit_clip, self.logit_clip)
        return self.scale * logit

    def update(self, task_name, replay_states, example_states, rng):
        """One discriminator step; returns loss diagnostics."""
        net = self.nets[task_name]
        replay_states = np.ascontiguousarray(replay_states, dtype=np.float64)
        example_states = np.ascontiguousarray(example_states, dtype=np.float64)
        n_r = replay_states.shape[0]
        n_e = example_states.shape[0]

        acts_r = net.forward_acts(replay_states)
        acts_e = net.forward_acts(example_states)
        logit_r = acts_r[-1][:, 0]
        logit_e = acts_e[-1][:, 0]
        loss = float(np.mean(_softplus(logit_r)) + np.mean(_softplus(-logit_e)))
        g_r = (_sigmoid(logit_r) / n_r)[:, None]
        g_e = ((_sigmoid(logit_e) - 1.0) / n_e)[:, None]
        grads_r, _ = net.backward(acts_r, g_r)
        grads_e, _ = net.backward(acts_e, g_e)

        n_mix = min(n_r, n_e)
        u = rng.uniform(size=(n_mix, 1))
        x_hat = u * example_states[:n_mix] + (1.0 - u) * replay_states[:n_mix]
        gp, grads_gp = gradient_penalty_grads(
            net, np.ascontiguousarray(x_hat), self.grad_penalty
        )

        total = [a + b + c for a, b, c in zip(grads_r, grads_e, grads_gp)]
        self.optim[task_name].step(total)
        return {
            "loss": loss + gp,
            "grad_penalty": gp,
            "mean_d_replay": float(np.mean(_sigmoid(logit_r))),
            "mean_d_example": float(np.mean(_sigmoid(logit_e))),
        }

    def state_arrays(self):
        out = {}
        for name, net in self.nets.items():
            for i, p in enumerate(net.parameters()):
                out[f"disc.{name}.{i}"] = p
            opt = self.optim[name]
            for i, m in enumerate(opt.m):
                out[f"disc.{name}.optim.m.{i}"] = m
            for i, v in enumerate(opt.v):
                out[f"disc.{name}.optim.v.{i}"] = v
            out[f"disc.{name}.optim.t"] = np.array([opt.t], dtype=np.int64)
        return out

    def load_state_arrays(self, arrays):
        for name, target in self.state_arrays().items():
            if name.endswith("optim.t"):
                task = name.split(".")[1]
                self.optim[task].t = int(arrays[name][0])
            else:
                target[...] = arrays[name]
