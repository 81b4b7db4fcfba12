"""AdamW with decoupled weight decay and global gradient-norm clipping."""

import numpy as np

from exbc.errors import GradientError
from exbc.nets import backend


class AdamW:
    """Holds moment buffers for a fixed parameter list; step() mutates in place.

    max_grad_norm, when set, rescales the whole gradient so its joint L2 norm
    never exceeds the cap.  Non-finite gradients raise GradientError.
    """

    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.0, max_grad_norm=None, name="optimizer"):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = betas
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.max_grad_norm = max_grad_norm
        self.name = name
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads):
        """Apply one update; returns the pre-clip global gradient norm."""
        if len(grads) != len(self.params):
            raise GradientError(
                f"{self.name}: got {len(grads)} gradients for "
                f"{len(self.params)} parameters"
            )
        sq = 0.0
        for g in grads:
            sq += float(np.dot(g.ravel(), g.ravel()))
        norm = np.sqrt(sq)
        if not np.isfinite(norm):
            raise GradientError(f"{self.name}: non-finite gradient norm")
        scale = 1.0
        if self.max_grad_norm is not None and norm > self.max_grad_norm:
            scale = self.max_grad_norm / (norm + 1e-6)
        self.t += 1
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = np.ascontiguousarray(g, dtype=np.float64).ravel()
            if scale != 1.0:
                g = g * scale
            backend.adamw_step(
                p.ravel(), g, m.ravel(), v.ravel(), self.t,
                self.lr, self.beta1, self.beta2, self.eps, self.weight_decay,
            )
        return norm

    def state_arrays(self):
        """Moment buffers plus step count, for checkpointing."""
        return {"m": self.m, "v": self.v, "t": self.t}

    def load_state(self, m, v, t):
        for own, new in zip(self.m, m):
            own[...] = new
        for own, new in zip(self.v, v):
            own[...] = new
        self.t = int(t)
