"""Transitions, the shared replay buffer, and per-task success-example buffers.

The replay buffer is a FIFO ring over preallocated arrays.  All gathered
interaction data, no matter which task's policy produced it, goes into the
single shared buffer.  Example buffers hold the finite set of success states
for one task, together with the per-dimension population standard deviation
used by sampling-time augmentation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from exbc.errors import DimensionError, EmptyBufferError, ExampleFormatError

EXAMPLE_FORMAT_ID = "exbc-examples"
EXAMPLE_FORMAT_VERSION = 1


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class TaskId:
    """A task name plus whether it is the main task or an auxiliary one."""

    name: str
    kind: str  # "main" or "auxiliary"

    def __post_init__(self):
        if self.kind not in ("main", "auxiliary"):
            raise ValueError(f"task kind must be 'main' or 'auxiliary', got {self.kind!r}")


class TaskSet:
    """The tasks of one experiment: exactly one main task plus auxiliaries."""

    def __init__(self, main: str, auxiliary: list[str] | tuple[str, ...] = ()):
        names = [main, *auxiliary]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate task names in {names}")
        self.main = TaskId(main, "main")
        self.auxiliary = tuple(TaskId(a, "auxiliary") for a in auxiliary)

    @property
    def all(self) -> tuple[TaskId, ...]:
        return (self.main, *self.auxiliary)

    def __iter__(self):
        return iter(self.all)

    def __len__(self):
        return len(self.all)

    def by_name(self, name: str) -> TaskId:
        for t in self.all:
            if t.name == name:
                return t
        raise KeyError(name)


@dataclass
class Transition:
    """One environment step: (state, action, next_state) plus its step index."""

    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    step_index: int

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=np.float64)
        self.action = np.asarray(self.action, dtype=np.float64)
        self.next_state = np.asarray(self.next_state, dtype=np.float64)
        for field in ("state", "action", "next_state"):
            arr = getattr(self, field)
            if arr.ndim != 1:
                raise DimensionError(f"{field} must be a 1-D vector, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise DimensionError(f"{field} contains NaN/Inf components")
        if self.state.shape != self.next_state.shape:
            raise DimensionError(
                f"state dim {self.state.shape[0]} != next_state dim {self.next_state.shape[0]}"
            )
        if self.step_index < 0:
            raise ValueError(f"step_index must be >= 0, got {self.step_index}")


class ReplayBuffer:
    """FIFO replay buffer with uniform with-replacement sampling.

    Dimensions are established by the first push; later pushes must match.
    Episode boundaries (step_index resetting to 0) are tracked so that
    contiguous multi-step chains never cross them.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.insertion_count = 0
        self._state_dim = None
        self._act_dim = None
        self._episode_counter = 0
        self._last_step_index = None
        # allocated lazily on first push
        self._states = None
        self._actions = None
        self._next_states = None
        self._step_index = None
        self._episode_id = None

    def __len__(self) -> int:
        return min(self.insertion_count, self.capacity)

    @property
    def state_dim(self):
        return self._state_dim

    @property
    def action_dim(self):
        return self._act_dim

    def _allocate(self, state_dim: int, act_dim: int):
        self._state_dim = state_dim
        self._act_dim = act_dim
        self._states = np.zeros((self.capacity, state_dim))
        self._actions = np.zeros((self.capacity, act_dim))
        self._next_states = np.zeros((self.capacity, state_dim))
        self._step_index = np.zeros(self.capacity, dtype=np.int64)
        self._episode_id = np.zeros(self.capacity, dtype=np.int64)

    def push(self, t: Transition):
        if self._states is None:
            self._allocate(t.state.shape[0], t.action.shape[0])
        if t.state.shape[0] != self._state_dim:
            raise DimensionError(
                f"state dim {t.state.shape[0]} does not match buffer dim {self._state_dim}"
            )
        if t.action.shape[0] != self._act_dim:
            raise DimensionError(
                f"action dim {t.action.shape[0]} does not match buffer dim {self._act_dim}"
            )
        if t.step_index == 0 or self._last_step_index is None or t.step_index != self._last_step_index + 1:
            self._episode_counter += 1
        self._last_step_index = t.step_index
        slot = self.insertion_count % self.capacity
        self._states[slot] = t.state
        self._actions[slot] = t.action
        self._next_states[slot] = t.next_state
        self._step_index[slot] = t.step_index
        self._episode_id[slot] = self._episode_counter
        self.insertion_count += 1

    def entries(self) -> list[Transition]:
        """All stored transitions, oldest first.  Intended for inspection."""
        out = []
        start = max(0, self.insertion_count - self.capacity)
        for abs_idx in range(start, self.insertion_count):
            slot = abs_idx % self.capacity
            out.append(
                Transition(
                    self._states[slot].copy(),
                    self._actions[slot].copy(),
                    self._next_states[slot].copy(),
                    int(self._step_index[slot]),
                )
            )
        return out

    def sample(self, n: int, rng) -> dict:
        """Uniform with-replacement batch of n transitions as stacked arrays."""
        if len(self) == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        if n < 1:
            raise ValueError(f"batch size must be >= 1, got {n}")
        rng = _as_rng(rng)
        start = max(0, self.insertion_count - self.capacity)
        abs_idx = rng.integers(start, self.insertion_count, size=n)
        slots = abs_idx % self.capacity
        return {
            "states": self._states[slots].copy(),
            "actions": self._actions[slots].copy(),
            "next_states": self._next_states[slots].copy(),
            "step_index": self._step_index[slots].copy(),
        }

    def sample_chains(self, n: int, n_step: int, rng) -> dict:
        """n contiguous sub-trajectories of up to n_step transitions each.

        Start indices are uniform with replacement.  A chain is truncated early
        where the episode changes or the newest entry is reached, so chains
        never cross an episode boundary.  Returns padded arrays plus per-chain
        lengths; the bootstrap state is the next_state of the last chain entry.
        """
        if len(self) == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        if n < 1 or n_step < 1:
            raise ValueError(f"need n >= 1 and n_step >= 1, got n={n}, n_step={n_step}")
        rng = _as_rng(rng)
        start = max(0, self.insertion_count - self.capacity)
        first = rng.integers(start, self.insertion_count, size=n)
        states = np.zeros((n, n_step, self._state_dim))
        lengths = np.zeros(n, dtype=np.int64)
        actions = np.zeros((n, self._act_dim))
        bootstrap = np.zeros((n, self._state_dim))
        for i, a0 in enumerate(first):
            ep = self._episode_id[a0 % self.capacity]
            m = 1
            while (
                m < n_step
                and a0 + m < self.insertion_count
                and self._episode_id[(a0 + m) % self.capacity] == ep
            ):
                m += 1
            lengths[i] = m
            for j in range(m):
                states[i, j] = self._states[(a0 + j) % self.capacity]
            actions[i] = self._actions[a0 % self.capacity]
            bootstrap[i] = self._next_states[(a0 + m - 1) % self.capacity]
        return {
            "states": states,
            "first_actions": actions,
            "lengths": lengths,
            "bootstrap_states": bootstrap,
        }


class ExampleBuffer:
    """The finite set of success states for one task."""

    def __init__(self, task: TaskId, states):
        states = np.asarray(states, dtype=np.float64)
        if states.ndim != 2 or states.shape[0] < 1:
            raise DimensionError(
                f"example states must be a non-empty (count, dim) array, got shape {states.shape}"
            )
        if not np.all(np.isfinite(states)):
            raise DimensionError("example states contain NaN/Inf components")
        self.task = task
        self.states = states
        # population std: deterministic given the buffer, zero for constant dims
        self.per_dim_std = states.std(axis=0, ddof=0)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    def sample(self, n: int, rng) -> np.ndarray:
        """Uniform with-replacement batch of n example states."""
        if n < 1:
            raise ValueError(f"batch size must be >= 1, got {n}")
        rng = _as_rng(rng)
        idx = rng.integers(0, len(self), size=n)
        return self.states[idx].copy()


def save_examples(buf: ExampleBuffer, path):
    """Write an example buffer as versioned decimal text, one state per row."""
    with open(path, "w") as f:
        f.write(f"{EXAMPLE_FORMAT_ID} {EXAMPLE_FORMAT_VERSION} {buf.state_dim} {len(buf)}\n")
        for row in buf.states:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_examples(path, task: TaskId) -> ExampleBuffer:
    """Read a versioned example file back; per-dimension std is recomputed."""
    with open(path) as f:
        lines = [ln for ln in (raw.strip() for raw in f) if ln]
    if not lines:
        raise ExampleFormatError(f"{path}: empty example file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != EXAMPLE_FORMAT_ID:
        raise ExampleFormatError(f"{path}: bad header {lines[0]!r}")
    version, dim, count = int(header[1]), int(header[2]), int(header[3])
    if version != EXAMPLE_FORMAT_VERSION:
        raise ExampleFormatError(
            f"{path}: version {version} not supported (expected {EXAMPLE_FORMAT_VERSION})"
        )
    rows = lines[1:]
    if len(rows) != count:
        raise ExampleFormatError(f"{path}: header promises {count} states, found {len(rows)}")
    states = []
    for i, row in enumerate(rows):
        vals = row.split()
        if len(vals) != dim:
            raise ExampleFormatError(
                f"{path}: row {i} has {len(vals)} values, expected dim {dim}"
            )
        states.append([float(v) for v in vals])
    return ExampleBuffer(task, np.array(states))
