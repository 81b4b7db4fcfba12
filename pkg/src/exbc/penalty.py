"""Critic regularizers keyed to the range of achievable returns.

The main tool is a hinge-squared penalty that charges the critic for leaving
[q_min, q_max].  q_max tracks a median filter over batch-mean values of
example states under the current policy; q_min is either fixed from the
reward structure (constant-label rewards) or a median filter over observed
minimum rewards divided by (1 - gamma).

Two alternatives with the same call shape are included for comparison runs:
a plain L2 pull toward zero and a conservative log-sum-exp gap.
"""

from collections import deque

import numpy as np


class PenaltyBounds:
    """Running estimate of the valid return interval [q_min, q_max]."""

    def __init__(self, gamma, window=50, fixed_q_min=None):
        self.gamma = float(gamma)
        self.fixed_q_min = None if fixed_q_min is None else float(fixed_q_min)
        self._max_filter = deque(maxlen=window)
        self._min_filter = deque(maxlen=window)

    def observe_example_value(self, batch_mean_value):
        self._max_filter.append(float(batch_mean_value))

    def observe_min_reward(self, batch_min_reward):
        self._min_filter.append(float(batch_min_reward))

    @property
    def q_max(self):
        if not self._max_filter:
            return None
        return float(np.median(self._max_filter))

    @property
    def q_min(self):
        if self.fixed_q_min is not None:
            return self.fixed_q_min
        if not self._min_filter:
            return None
        return float(np.median(self._min_filter)) / (1.0 - self.gamma)

    def state(self):
        return {
            "max_filter": np.asarray(self._max_filter, dtype=np.float64),
            "min_filter": np.asarray(self._min_filter, dtype=np.float64),
        }

    def load_state(self, max_filter, min_filter):
        self._max_filter.clear()
        self._max_filter.extend(float(x) for x in np.atleast_1d(max_filter))
        self._min_filter.clear()
        self._min_filter.extend(float(x) for x in np.atleast_1d(min_filter))


def hinge_penalty(q, q_min, q_max, lam):
    """lam * mean(relu(q - q_max)^2 + relu(q_min - q)^2) and d/dq.

    Either bound may be None (not yet estimated); that side contributes
    nothing.  Returns (loss, grad) with grad shaped like q.
    """
    q = np.asarray(q, dtype=np.float64)
    n = q.size
    loss = 0.0
    grad = np.zeros_like(q)
    if q_max is not None:
        over = np.maximum(q - q_max, 0.0)
        loss += float(np.mean(over**2))
        grad += 2.0 * over / n
    if q_min is not None:
        under = np.maximum(q_min - q, 0.0)
        loss += float(np.mean(under**2))
        grad -= 2.0 * under / n
    return lam * loss, lam * grad


def l2_penalty(q, lam):
    """lam * mean(q^2) and d/dq: pulls all values toward zero."""
    q = np.asarray(q, dtype=np.float64)
    loss = lam * float(np.mean(q**2))
    return loss, lam * 2.0 * q / q.size


def conservative_penalty(q_data, q_ood, lam):
    """lam * mean(logsumexp(q_ood) - q_data) and gradients.

    q_ood holds values of sampled out-of-distribution actions per state,
    shape (n, k); q_data is the in-batch value, shape (n,).  Returns
    (loss, d/dq_data, d/dq_ood).
    """
    q_data = np.asarray(q_data, dtype=np.float64)
    q_ood = np.asarray(q_ood, dtype=np.float64)
    n = q_data.size
    m = q_ood.max(axis=1, keepdims=True)
    z = np.exp(q_ood - m)
    lse = m[:, 0] + np.log(z.sum(axis=1))
    loss = lam * float(np.mean(lse - q_data))
    d_data = np.full(n, -lam / n)
    d_ood = lam / n * z / z.sum(axis=1, keepdims=True)
    return loss, d_data, d_ood
