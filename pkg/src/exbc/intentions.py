"""Per-task learner: policy, twin critics, temperature, and bounded values.

Each task ("intention") owns its own networks and optimizers; nothing is
shared across tasks.  One update() call performs, in order: bound estimation,
a critic step on replay plus example batches, a policy step on replay states,
a temperature step, and a polyak update of the target critics.
"""

from dataclasses import dataclass

import numpy as np

from exbc.errors import ConfigError
from exbc.nets.critics import TwinCritics
from exbc.nets.optim import AdamW
from exbc.nets.policy import SquashedGaussianPolicy
from exbc.penalty import (PenaltyBounds, conservative_penalty, hinge_penalty,
                          l2_penalty)
from exbc.rewards import _sigmoid, _softplus, rce_targets

PENALTY_KINDS = ("hinge", "none", "l2", "conservative")


@dataclass
class IntentionSettings:
    """Learner hyperparameters; defaults suit long manipulation runs."""

    hidden: tuple = (256, 256)
    gamma: float = 0.99
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_alpha: float = 3e-4
    init_alpha: float = 1e-2
    target_entropy: float = None  # None -> -act_dim
    polyak_tau: float = 1e-3
    max_grad_norm: float = 10.0
    weight_decay: float = 1e-2
    penalty: str = "hinge"
    penalty_lambda: float = 10.0
    bound_window: int = 50
    entropy_in_td: bool = False
    n_step: int = 1
    ood_actions: int = 4

    def __post_init__(self):
        if self.penalty not in PENALTY_KINDS:
            raise ConfigError(f"unknown penalty kind {self.penalty!r}")
        if self.n_step < 1:
            raise ConfigError("n_step must be >= 1")


class Intention:
    """Actor-critic learner for one task, fed by a shared reward model."""

    def __init__(self, task, obs_dim, act_dim, settings, reward_model, rng):
        self.task = task
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.settings = settings
        self.reward_model = reward_model
        if reward_model is not None and reward_model.kind == "rce":
            if settings.n_step != 1:
                raise ConfigError("classifier-style targets require n_step=1")
        self.policy = SquashedGaussianPolicy(obs_dim, act_dim, settings.hidden, rng)
        self.critics = TwinCritics(obs_dim, act_dim, settings.hidden, rng)
        self.log_alpha = np.array([np.log(settings.init_alpha)])
        self.target_entropy = (
            -float(act_dim) if settings.target_entropy is None
            else float(settings.target_entropy)
        )
        fixed_min = None
        if reward_model is not None and reward_model.kind == "sqil":
            fixed_min = reward_model.return_bounds(settings.gamma)[0]
        self.bounds = PenaltyBounds(
            settings.gamma, window=settings.bound_window, fixed_q_min=fixed_min
        )
        self.critic_optim = AdamW(
            self.critics.online_parameters(), lr=settings.lr_critic,
            weight_decay=settings.weight_decay,
            max_grad_norm=settings.max_grad_norm,
            name=f"critic[{task.name}]",
        )
        self.actor_optim = AdamW(
            self.policy.parameters(), lr=settings.lr_actor,
            weight_decay=settings.weight_decay,
            max_grad_norm=settings.max_grad_norm,
            name=f"actor[{task.name}]",
        )
        self.alpha_optim = AdamW(
            [self.log_alpha], lr=settings.lr_alpha, weight_decay=0.0,
            max_grad_norm=settings.max_grad_norm,
            name=f"alpha[{task.name}]",
        )
        self.updates_done = 0

    @property
    def alpha(self):
        return float(np.exp(self.log_alpha[0]))

    def act(self, state, rng, deterministic=False):
        if deterministic:
            return self.policy.mean_action(state)
        actions, _, _ = self.policy.sample(state, rng)
        return actions[0]

    def example_values(self, example_states, rng):
        """Pairwise-min Q at example states under fresh policy actions."""
        actions, _, _ = self.policy.sample(example_states, rng)
        return self.critics.min_q(example_states, actions)

    def min_q(self, states, actions):
        return self.critics.min_q(states, actions)

    # ------------------------------------------------------------------ #
    # update steps                                                       #
    # ------------------------------------------------------------------ #

    def _replay_rewards(self, states):
        rm = self.reward_model
        if rm.kind == "sqil":
            return rm.replay_reward(states.shape[0])
        return rm.reward(self.task.name, states)

    def _example_rewards(self, states):
        rm = self.reward_model
        if rm.kind == "sqil":
            return rm.example_reward(states.shape[0])
        return rm.reward(self.task.name, states)

    def _bootstrap(self, states, rng):
        actions, log_probs, _ = self.policy.sample(states, rng)
        value = self.critics.target_min(states, actions)
        if self.settings.entropy_in_td:
            value = value - self.alpha * log_probs
        return value

    def update(self, replay_batch, example_states, rng):
        """One full learner step; returns scalar diagnostics."""
        cfg = self.settings
        s_star = np.ascontiguousarray(example_states, dtype=np.float64)
        metrics = {}
        use_rce = self.reward_model is not None and self.reward_model.kind == "rce"

        # Refresh the valid-return bounds before the critic moves.
        if cfg.penalty != "none":
            v_star = self.example_values(s_star, rng)
            self.bounds.observe_example_value(float(np.mean(v_star)))

        if use_rce:
            crit = self._critic_step_rce(replay_batch, s_star, rng)
        else:
            crit = self._critic_step_td(replay_batch, s_star, rng)
        metrics.update(crit)

        states = replay_batch["states"]
        if cfg.n_step > 1 and not use_rce:
            states = replay_batch["states"][:, 0, :]
        act = self._actor_step(np.ascontiguousarray(states), rng)
        metrics.update(act)

        ent_gap = act["_mean_log_prob"] + self.target_entropy
        metrics["alpha_loss"] = -float(self.log_alpha[0]) * ent_gap
        self.alpha_optim.step([np.array([-ent_gap])])
        metrics["alpha"] = self.alpha

        self.critics.polyak(cfg.polyak_tau)
        self.updates_done += 1
        del metrics["_mean_log_prob"]
        return metrics

    def _td_targets(self, replay_batch, rng):
        """Discounted targets for the replay batch; handles n-step chains."""
        cfg = self.settings
        if cfg.n_step == 1:
            states = replay_batch["states"]
            rewards = self._replay_rewards(states)
            boot = self._bootstrap(replay_batch["next_states"], rng)
            return (states, replay_batch["actions"],
                    rewards + cfg.gamma * boot, rewards)
        chain = replay_batch["states"]           # (n, m, d)
        lengths = replay_batch["lengths"]
        n, m, d = chain.shape
        flat = chain.reshape(n * m, d)
        valid = (np.arange(m)[None, :] < lengths[:, None])
        r_flat = np.zeros(n * m)
        idx = valid.reshape(-1)
        r_flat[idx] = self._replay_rewards(np.ascontiguousarray(flat[idx]))
        r = r_flat.reshape(n, m)
        disc = cfg.gamma ** np.arange(m)
        partial = (r * valid * disc[None, :]).sum(axis=1)
        boot = self._bootstrap(replay_batch["bootstrap_states"], rng)
        y = partial + cfg.gamma ** lengths * boot
        first_states = np.ascontiguousarray(chain[:, 0, :])
        return first_states, replay_batch["first_actions"], y, r[:, 0]

    def _critic_step_td(self, replay_batch, s_star, rng):
        cfg = self.settings
        states, actions, y, rewards = self._td_targets(replay_batch, rng)
        r_star = self._example_rewards(s_star)
        boot_star = self._bootstrap(s_star, rng)
        y_star = r_star + cfg.gamma * boot_star

        if self.reward_model.kind != "sqil" and cfg.penalty != "none":
            self.bounds.observe_min_reward(
                min(float(rewards.min()), float(r_star.min()))
            )

        a_star, _, _ = self.policy.sample(s_star, rng)
        x = self.critics.joint_input(states, actions)
        x_star = self.critics.joint_input(s_star, a_star)
        q1, q2, acts1, acts2 = self.critics.forward_both(x)
        q1s, q2s, acts1s, acts2s = self.critics.forward_both(x_star)

        n_r = q1.shape[0]
        n_e = q1s.shape[0]
        td1, td2 = q1 - y, q2 - y
        td1s, td2s = q1s - y_star, q2s - y_star
        loss = float(np.mean(td1**2) + np.mean(td2**2)
                     + np.mean(td1s**2) + np.mean(td2s**2))
        g1 = 2.0 * td1 / n_r
        g2 = 2.0 * td2 / n_r
        g1s = 2.0 * td1s / n_e
        g2s = 2.0 * td2s / n_e

        pen_total, extra = self._penalty_grads(states, q1, q2, g1, g2, rng)
        grads1, _ = self.critics.q1.backward(acts1, g1[:, None])
        grads2, _ = self.critics.q2.backward(acts2, g2[:, None])
        grads1s, _ = self.critics.q1.backward(acts1s, g1s[:, None])
        grads2s, _ = self.critics.q2.backward(acts2s, g2s[:, None])
        joined = [a + b for a, b in zip(grads1 + grads2, grads1s + grads2s)]
        if extra is not None:
            joined = [a + b for a, b in zip(joined, extra)]
        norm = self.critic_optim.step(joined)
        return {
            "critic_loss": loss,
            "penalty_loss": pen_total,
            "q_mean": float(np.mean(np.minimum(q1, q2))),
            "example_q_mean": float(np.mean(np.minimum(q1s, q2s))),
            "q_min_bound": np.nan if self.bounds.q_min is None else self.bounds.q_min,
            "q_max_bound": np.nan if self.bounds.q_max is None else self.bounds.q_max,
            "critic_grad_norm": float(norm),
        }

    def _penalty_grads(self, states, q1, q2, g1, g2, rng):
        """Adds penalty gradients into g1/g2 in place; returns (loss, extra).

        extra is a parameter-gradient list for penalties that need their own
        network passes (the conservative gap), else None.
        """
        cfg = self.settings
        if cfg.penalty == "none":
            return 0.0, None
        lam = cfg.penalty_lambda
        if cfg.penalty == "hinge":
            lo, hi = self.bounds.q_min, self.bounds.q_max
            p1, d1 = hinge_penalty(q1, lo, hi, lam)
            p2, d2 = hinge_penalty(q2, lo, hi, lam)
            g1 += d1
            g2 += d2
            return p1 + p2, None
        if cfg.penalty == "l2":
            p1, d1 = l2_penalty(q1, lam)
            p2, d2 = l2_penalty(q2, lam)
            g1 += d1
            g2 += d2
            return p1 + p2, None
        # conservative: logsumexp over sampled out-of-distribution actions
        n = states.shape[0]
        k = cfg.ood_actions
        total = 0.0
        extra = None
        for net, q_data, g_data in ((self.critics.q1, q1, g1),
                                    (self.critics.q2, q2, g2)):
            caches = []
            q_ood = np.empty((n, k))
            for j in range(k):
                a_ood = rng.uniform(-1.0, 1.0, size=(n, self.act_dim))
                acts = net.forward_acts(self.critics.joint_input(states, a_ood))
                caches.append(acts)
                q_ood[:, j] = acts[-1][:, 0]
            loss, d_data, d_ood = conservative_penalty(q_data, q_ood, lam)
            total += loss
            g_data += d_data
            part = None
            for j in range(k):
                grads, _ = net.backward(caches[j], d_ood[:, j][:, None])
                part = grads if part is None else [a + b for a, b in zip(part, grads)]
            zeros = [np.zeros_like(p) for p in net.parameters()]
            block = part if part is not None else zeros
            if net is self.critics.q1:
                extra = block + [np.zeros_like(p) for p in self.critics.q2.parameters()]
            else:
                extra = [a + b for a, b in zip(extra, zeros + block)]
        return total, extra

    def _critic_step_rce(self, replay_batch, s_star, rng):
        """Classifier-style critic step; the critic output is a logit."""
        cfg = self.settings
        states = replay_batch["states"]
        actions = replay_batch["actions"]
        next_states = replay_batch["next_states"]
        a_next, _, _ = self.policy.sample(next_states, rng)
        v_next = _sigmoid(self.critics.target_min(next_states, a_next))
        y, w = rce_targets(v_next, cfg.gamma)

        a_star, _, _ = self.policy.sample(s_star, rng)
        x = self.critics.joint_input(states, actions)
        x_star = self.critics.joint_input(s_star, a_star)
        q1, q2, acts1, acts2 = self.critics.forward_both(x)
        q1s, q2s, acts1s, acts2s = self.critics.forward_both(x_star)
        n_r = q1.shape[0]
        n_e = q1s.shape[0]
        we = 1.0 - cfg.gamma

        loss = 0.0
        grads_total = None
        for net, q, qs, acts, acts_s in (
            (self.critics.q1, q1, q1s, acts1, acts1s),
            (self.critics.q2, q2, q2s, acts2, acts2s),
        ):
            # bce with logits: softplus(z) - y z, so d/dz = sigmoid(z) - y
            loss += float(np.mean(w * (_softplus(q) - y * q)))
            loss += we * float(np.mean(_softplus(qs) - qs))
            g = w * (_sigmoid(q) - y) / n_r
            gs = we * (_sigmoid(qs) - 1.0) / n_e
            gr, _ = net.backward(acts, g[:, None])
            ge, _ = net.backward(acts_s, gs[:, None])
            block = [a + b for a, b in zip(gr, ge)]
            grads_total = block if grads_total is None else grads_total + block
        norm = self.critic_optim.step(grads_total)
        return {
            "critic_loss": loss,
            "penalty_loss": 0.0,
            "q_mean": float(np.mean(_sigmoid(np.minimum(q1, q2)))),
            "example_q_mean": float(np.mean(_sigmoid(np.minimum(q1s, q2s)))),
            "q_min_bound": np.nan,
            "q_max_bound": np.nan,
            "critic_grad_norm": float(norm),
        }

    def _actor_step(self, states, rng):
        n = states.shape[0]
        actions, log_probs, cache = self.policy.sample(states, rng)
        q_min, dq_da = self.critics.min_with_action_grad(states, actions)
        alpha = self.alpha
        loss = float(np.mean(alpha * log_probs - q_min))
        d_actions = -dq_da / n
        d_log_probs = np.full(n, alpha / n)
        grads = self.policy.backward(cache, d_actions, d_log_probs)
        norm = self.actor_optim.step(grads)
        return {
            "actor_loss": loss,
            "entropy": -float(np.mean(log_probs)),
            "actor_grad_norm": float(norm),
            "_mean_log_prob": float(np.mean(log_probs)),
        }

    # ------------------------------------------------------------------ #
    # checkpoint support                                                 #
    # ------------------------------------------------------------------ #

    def state_arrays(self):
        """Flat name -> array mapping covering everything that evolves."""
        out = {}
        nets = {
            "policy": self.policy.net, "q1": self.critics.q1,
            "q2": self.critics.q2, "t1": self.critics.t1,
            "t2": self.critics.t2,
        }
        for prefix, net in nets.items():
            for i, p in enumerate(net.parameters()):
                out[f"{prefix}.{i}"] = p
        out["log_alpha"] = self.log_alpha
        optims = {"critic_optim": self.critic_optim,
                  "actor_optim": self.actor_optim,
                  "alpha_optim": self.alpha_optim}
        for prefix, opt in optims.items():
            for i, m in enumerate(opt.m):
                out[f"{prefix}.m.{i}"] = m
            for i, v in enumerate(opt.v):
                out[f"{prefix}.v.{i}"] = v
            out[f"{prefix}.t"] = np.array([opt.t], dtype=np.int64)
        for key, arr in self.bounds.state().items():
            out[f"bounds.{key}"] = arr
        return out

    def load_state_arrays(self, arrays):
        own = self.state_arrays()
        for name, target in own.items():
            if name.startswith("bounds."):
                continue
            if name.endswith(".t"):
                opt = {"critic_optim": self.critic_optim,
                       "actor_optim": self.actor_optim,
                       "alpha_optim": self.alpha_optim}[name.split(".")[0]]
                opt.t = int(arrays[name][0])
            else:
                target[...] = arrays[name]
        self.bounds.load_state(arrays["bounds.max_filter"],
                               arrays["bounds.min_filter"])
