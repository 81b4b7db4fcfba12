"""Off-policy actor-critic control from success-state examples.

Feedback is a finite set of per-task success states instead of rewards or
demonstrations.  Exploration is driven by scheduled auxiliary tasks, and
critic estimates are kept inside the range of valid returns by a hinge-squared
value penalty with running bound estimation.
"""

__version__ = "0.1.0"

from exbc.buffers import ExampleBuffer, ReplayBuffer, TaskId, Transition

__all__ = ["ExampleBuffer", "ReplayBuffer", "TaskId", "Transition", "__version__"]
