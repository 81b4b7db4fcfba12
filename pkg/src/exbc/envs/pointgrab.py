"""Planar gripper-and-blocks world with kinematic grasping.

A point gripper moves in a vertical plane and can carry one of two blocks.
Block handling is kinematic: a held block rides on the gripper; a released
block snaps down to its resting height (the ground, or on top of the other
block when horizontally aligned).  There is no contact or collision physics;
the world exists to exercise reach / grasp / lift / release / stack task
semantics at desk scale.

Grasping requires a controlled grip: a block is picked up, and stays held,
only while the aperture sits inside [grip_floor, grasp_aperture).  Opening
past grasp_aperture releases the block; squeezing below grip_floor makes it
slip out.  Carrying therefore demands active aperture regulation rather than
a pinned-shut gripper.

State layout (15 dims):
  0-1  gripper x, y          2  aperture in [0,1] (1 = open)
  3-4  block A x, y          5  A held flag
  6-7  block B x, y          8  B held flag
  9-10 A - gripper           11-12 B - gripper          13-14 A - B
"""

from __future__ import annotations

import numpy as np

from exbc.buffers import TaskId
from exbc.envs.base import Env, EnvSpec, SuccessPredicate

TASKS = ("reach", "grasp", "lift", "release", "stack")

GX, GY, AP, AX, AY, AH, BX, BY, BH = range(9)


class PointGrab(Env):
    def __init__(
        self,
        horizon: int = 120,
        gamma: float = 0.99,
        max_step: float = 0.05,
        aperture_rate: float = 0.25,
        grasp_aperture: float = 0.5,
        grip_floor: float = 0.2,
        reach_threshold: float = 0.06,
        align_tolerance: float = 0.045,
        lift_height: float = 0.2,
        block_size: float = 0.06,
        workspace=((0.0, 1.0), (0.0, 0.6)),
    ):
        self.max_step = max_step
        self.aperture_rate = aperture_rate
        self.grasp_aperture = grasp_aperture
        self.grip_floor = grip_floor
        self.reach_threshold = reach_threshold
        self.align_tolerance = align_tolerance
        self.lift_height = lift_height
        self.block_size = block_size
        self.x_range, self.y_range = workspace
        self.gripper_spawn = ((0.2, 0.8), (0.35, 0.55))
        self.block_a_spawn = (0.1, 0.42)
        self.block_b_spawn = (0.58, 0.9)
        self.spec = EnvSpec(
            obs_dim=15,
            act_dim=3,
            episode_horizon=horizon,
            gamma=gamma,
            initial_state_sampler=(
                "gripper uniform over spawn box, blocks uniform on ground in "
                "disjoint x ranges, aperture open"
            ),
        )

    # -- state helpers ------------------------------------------------------

    def _with_relatives(self, core: np.ndarray) -> np.ndarray:
        rel = np.array([
            core[AX] - core[GX], core[AY] - core[GY],
            core[BX] - core[GX], core[BY] - core[GY],
            core[AX] - core[BX], core[AY] - core[BY],
        ])
        return np.concatenate([core, rel])

    def _ground_y(self) -> float:
        return self.block_size / 2.0

    def reset(self, rng) -> np.ndarray:
        core = np.zeros(9)
        core[GX] = rng.uniform(*self.gripper_spawn[0])
        core[GY] = rng.uniform(*self.gripper_spawn[1])
        core[AP] = 1.0
        core[AX] = rng.uniform(*self.block_a_spawn)
        core[AY] = self._ground_y()
        core[BX] = rng.uniform(*self.block_b_spawn)
        core[BY] = self._ground_y()
        return self._with_relatives(core)

    def _rest_height(self, x: float, other_x: float, other_y: float, other_held: bool) -> float:
        if not other_held and abs(x - other_x) < self.align_tolerance:
            return other_y + self.block_size
        return self._ground_y()

    def step(self, state, action, rng=None):
        action = self.clamp_action(action)
        core = np.asarray(state, dtype=np.float64)[:9].copy()

        core[GX] = np.clip(core[GX] + self.max_step * action[0], *self.x_range)
        core[GY] = np.clip(core[GY] + self.max_step * action[1], *self.y_range)
        core[AP] = np.clip(core[AP] + self.aperture_rate * action[2], 0.0, 1.0)

        gripping = self.grip_floor <= core[AP] < self.grasp_aperture
        blocks = ((AX, AY, AH), (BX, BY, BH))
        held = next((b for b in blocks if core[b[2]] > 0.5), None)

        if held is not None and not gripping:
            bx, by, bh = held
            core[bh] = 0.0
            ox, oy, oh = blocks[1] if held is blocks[0] else blocks[0]
            core[by] = self._rest_height(core[bx], core[ox], core[oy], core[oh] > 0.5)
            held = None
        if held is None and gripping:
            g = core[[GX, GY]]
            for bx, by, bh in blocks:
                if np.hypot(core[bx] - g[0], core[by] - g[1]) < self.reach_threshold:
                    core[bh] = 1.0
                    held = (bx, by, bh)
                    break
        if held is not None:
            bx, by, bh = held
            core[bx] = core[GX]
            core[by] = core[GY]

        return self._with_relatives(core)

    # -- tasks --------------------------------------------------------------

    def task_names(self):
        return list(TASKS)

    def success_predicate(self, task: TaskId) -> SuccessPredicate:
        name = task.name
        if name not in TASKS:
            raise KeyError(f"pointgrab has no task {name!r}")
        bs = self.block_size

        def reach(s):
            return np.hypot(s[AX] - s[GX], s[AY] - s[GY]) < self.reach_threshold

        def grasp(s):
            return s[AH] > 0.5

        def lift(s):
            return s[AH] > 0.5 and s[AY] >= self.lift_height

        def release(s):
            return s[AH] < 0.5 and s[BH] < 0.5 and s[AP] >= 0.9

        def stack(s):
            return (
                s[AH] < 0.5
                and abs(s[AX] - s[BX]) <= self.align_tolerance
                and abs(s[AY] - (s[BY] + bs)) <= 1e-9
            )

        return SuccessPredicate(task, {"reach": reach, "grasp": grasp, "lift": lift,
                                       "release": release, "stack": stack}[name])

    # -- scripted experts ---------------------------------------------------

    def _toward(self, core, tx, ty):
        dx = (tx - core[GX]) / self.max_step
        dy = (ty - core[GY]) / self.max_step
        return float(np.clip(dx, -1, 1)), float(np.clip(dy, -1, 1))

    def _grip_action(self, core):
        target = 0.5 * (self.grip_floor + self.grasp_aperture)
        return float(np.clip((target - core[AP]) / self.aperture_rate, -1.0, 1.0))

    def expert_action(self, task_name, state, rng):
        core = np.asarray(state)[:9]
        jitter = 0.05 * rng.standard_normal(3)
        near_a = np.hypot(core[AX] - core[GX], core[AY] - core[GY]) < self.reach_threshold * 0.7

        if core[BH] > 0.5:  # holding the wrong block: let go
            act = np.array([0.0, 0.0, 1.0])
        elif task_name == "reach":
            dx, dy = self._toward(core, core[AX], core[AY])
            act = np.array([dx, dy, 0.0])
        elif task_name == "grasp":
            dx, dy = self._toward(core, core[AX], core[AY])
            act = np.array([dx, dy, self._grip_action(core) if near_a or core[AH] > 0.5 else 0.0])
        elif task_name == "lift":
            if core[AH] > 0.5:
                act = np.array([0.0, 1.0, self._grip_action(core)])
            else:
                dx, dy = self._toward(core, core[AX], core[AY])
                act = np.array([dx, dy, self._grip_action(core) if near_a else 0.0])
        elif task_name == "release":
            act = np.array([0.0, 0.0, 1.0])
        elif task_name == "stack":
            if core[AH] > 0.5:
                if abs(core[GX] - core[BX]) <= 0.015 and core[GY] >= self.lift_height * 0.9:
                    act = np.array([0.0, 0.0, 1.0])
                else:
                    dx, dy = self._toward(core, core[BX], self.lift_height)
                    act = np.array([dx, dy, self._grip_action(core)])
            elif abs(core[AX] - core[BX]) <= self.align_tolerance and core[AY] > self.block_size:
                act = np.array([0.0, 0.0, 1.0])  # stacked already: open up
            else:
                dx, dy = self._toward(core, core[AX], core[AY])
                act = np.array([dx, dy, self._grip_action(core) if near_a else 0.0])
        else:
            raise KeyError(f"pointgrab has no task {task_name!r}")
        return np.clip(act + jitter, -1.0, 1.0)

    def example_reset(self, task: TaskId, rng) -> np.ndarray:
        """Reset used when generating success examples.

        Half of the release examples start from a completed stack, mirroring
        datasets where the release set contains task-specific end states.
        """
        s = self.reset(rng)
        if task.name == "release" and rng.random() < 0.5:
            for _ in range(self.spec.episode_horizon // 2):
                s = self.step(s, self.expert_action("stack", s, rng), rng)
                if self.success_predicate(TaskId("stack", "auxiliary"))(s):
                    break
        return s
