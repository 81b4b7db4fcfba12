"""Pure-NumPy reference implementation of the hot kernels.

Semantics match the compiled extension exactly; only the summation order of
the matrix products may differ at the last-ulp level.  The hidden
nonlinearity is tanh throughout; the final layer is linear.
"""

import numpy as np


def mlp_forward(x, weights, biases):
    """Forward pass; returns the list of activations, acts[0] == x."""
    acts = [x]
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w.T + b
        h = z if i == last else np.tanh(z)
        acts.append(h)
    return acts


def mlp_backward(acts, weights, grad_out, need_input_grad=False):
    """Backward pass from d(loss)/d(output).

    Returns (weight grads, bias grads, d(loss)/d(input) or None).  acts must
    come from mlp_forward on the same weights.
    """
    n_layers = len(weights)
    dws = [None] * n_layers
    dbs = [None] * n_layers
    g = grad_out
    dx = None
    for i in range(n_layers - 1, -1, -1):
        dws[i] = g.T @ acts[i]
        dbs[i] = g.sum(axis=0)
        if i > 0:
            g = (g @ weights[i]) * (1.0 - acts[i] ** 2)
        elif need_input_grad:
            dx = g @ weights[0]
    return dws, dbs, dx


def adamw_step(param, grad, m, v, t, lr, beta1, beta2, eps, weight_decay):
    """One decoupled-weight-decay Adam update, in place on param/m/v."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= lr * (m_hat / (np.sqrt(v_hat) + eps) + weight_decay * param)
