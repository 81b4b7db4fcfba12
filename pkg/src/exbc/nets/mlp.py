"""Small dense networks with tanh hidden layers and a linear head.

Parameters live in plain float64 arrays, weights shaped (out, in).  Gradients
are computed by explicit reverse passes through the kernel backend, so the
whole stack stays NumPy end to end.
"""

import numpy as np

from exbc.errors import DimensionError
from exbc.nets import backend


def _contiguous(x):
    return np.ascontiguousarray(x, dtype=np.float64)


class Mlp:
    """Fully connected net: in_dim -> hidden[0] -> ... -> out_dim."""

    def __init__(self, in_dim, hidden, out_dim, rng):
        self.sizes = (int(in_dim),) + tuple(int(h) for h in hidden) + (int(out_dim),)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            b = rng.uniform(-bound, bound, size=fan_out)
            self.weights.append(_contiguous(w))
            self.biases.append(_contiguous(b))

    @property
    def in_dim(self):
        return self.sizes[0]

    @property
    def out_dim(self):
        return self.sizes[-1]

    def parameters(self):
        """Flat list [W0, b0, W1, b1, ...]; mutating entries mutates the net."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def set_parameters(self, params):
        for own, new in zip(self.parameters(), params):
            own[...] = new

    def forward_acts(self, x):
        """Run the net, keeping every layer activation for a later backward."""
        x = _contiguous(x)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(
                f"expected input of shape (n, {self.in_dim}), got {x.shape}"
            )
        return backend.mlp_forward(x, self.weights, self.biases)

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        out = self.forward_acts(x)[-1]
        return out[0] if squeeze else out

    def backward(self, acts, grad_out, need_input_grad=False):
        """Gradients of a scalar loss given d(loss)/d(output).

        Returns (grads, dx) with grads ordered like parameters().
        """
        grad_out = _contiguous(grad_out)
        dws, dbs, dx = backend.mlp_backward(
            acts, self.weights, grad_out, need_input_grad
        )
        grads = []
        for dw, db in zip(dws, dbs):
            grads.append(dw)
            grads.append(db)
        return grads, dx

    def copy(self):
        dup = Mlp.__new__(Mlp)
        dup.sizes = self.sizes
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup
