import numpy as np
import pytest

from exbc.buffers import TaskId
from exbc.envs import (ChainWorld, ENV_REGISTRY, FrameStack, PointGrab,
                       chain_exact_q, generate_examples, make_env)
from exbc.envs.chainworld import MAIN_TASK
from exbc.envs.pointgrab import AH, AP, AX, AY, BH, BX, BY, GX, GY
from exbc.errors import ConvergenceError

MAIN = TaskId(MAIN_TASK, "main")


class TestChainWorld:
    def test_one_hot_encoding_round_trip(self):
        env = ChainWorld(n_states=5)
        for i in range(5):
            s = env.encode(i)
            assert s.shape == (5,) and s.sum() == 1.0
            assert env.decode(s) == i

    def test_moves_and_boundaries(self):
        env = ChainWorld(n_states=4)
        s = env.reset(np.random.default_rng(0))
        assert env.decode(s) == 0
        s = env.step(s, np.array([-1.0]))  # left at the wall stays
        assert env.decode(s) == 0
        s = env.step(s, np.array([1.0]))
        assert env.decode(s) == 1

    def test_goal_absorbing(self):
        env = ChainWorld(n_states=3)
        s = env.encode(2)
        for a in (-1.0, 1.0):
            assert env.decode(env.step(s, np.array([a]))) == 2

    def test_slip_reverses_direction(self):
        env = ChainWorld(n_states=5, slip_prob=1.0)
        s = env.encode(2)
        nxt = env.step(s, np.array([1.0]), np.random.default_rng(0))
        assert env.decode(nxt) == 1  # certain slip flips right into left

    def test_expert_reaches_goal_in_minimal_steps(self):
        env = ChainWorld(n_states=5)
        rng = np.random.default_rng(0)
        s = env.reset(rng)
        pred = env.success_predicate(MAIN)
        for _ in range(4):
            s = env.step(s, env.expert_action(MAIN_TASK, s, rng))
        assert pred(s)

    def test_exact_q_known_values(self):
        # reward +0.1 on the goal state, -0.1 elsewhere, deterministic moves
        env = ChainWorld(n_states=5, gamma=0.9)
        rewards = np.full(5, -0.1)
        rewards[4] = 0.1
        q = chain_exact_q(env, rewards, gamma=0.9)
        v_goal = q[4].max()
        assert abs(v_goal - 1.0) < 1e-9
        assert abs(q[3, 1] - 0.8) < 1e-9          # one step from the goal
        assert abs(q[3, 0] - (-0.1 + 0.9 * q[2].max())) < 1e-9

    def test_exact_q_convergence_guard(self):
        env = ChainWorld(n_states=5, gamma=0.9)
        with pytest.raises(ConvergenceError):
            chain_exact_q(env, np.full(5, 0.1), gamma=0.9, max_iter=2)


class TestPointGrab:
    def setup_method(self):
        self.env = PointGrab()
        self.rng = np.random.default_rng(0)

    def test_reset_layout(self):
        s = self.env.reset(self.rng)
        assert s.shape == (15,)
        assert 0.2 <= s[GX] <= 0.8 and 0.35 <= s[GY] <= 0.55
        assert s[AP] == 1.0 and s[AH] == 0.0 and s[BH] == 0.0
        assert s[AY] == pytest.approx(0.03) and s[BY] == pytest.approx(0.03)
        # relative features are consistent with absolute ones
        assert s[9] == pytest.approx(s[AX] - s[GX])
        assert s[13] == pytest.approx(s[AX] - s[BX])

    def test_gripper_clipped_to_workspace(self):
        s = self.env.reset(self.rng)
        for _ in range(50):
            s = self.env.step(s, np.array([1.0, 1.0, 0.0]))
        assert s[GX] == 1.0 and s[GY] == 0.6

    def test_grasp_and_carry(self):
        s = self.env.reset(self.rng)
        core = s[:9].copy()
        core[GX], core[GY] = core[AX], core[AY]  # teleport onto block A
        s = self.env._with_relatives(core)
        for _ in range(3):
            s = self.env.step(s, np.array([0.0, 0.0, -1.0]))
        assert s[AH] == 1.0
        # carrying needs the aperture kept inside the grip band
        s2 = self.env.step(s, np.array([1.0, 1.0, 0.0]))
        assert s2[AH] == 1.0
        assert s2[AX] == pytest.approx(s2[GX])
        assert s2[AY] == pytest.approx(s2[GY])

    def test_squeezing_past_floor_slips(self):
        s = self.env.reset(self.rng)
        core = s[:9].copy()
        core[GX], core[GY] = core[AX], core[AY]
        s = self.env._with_relatives(core)
        for _ in range(3):
            s = self.env.step(s, np.array([0.0, 0.0, -1.0]))
        assert s[AH] == 1.0
        s = self.env.step(s, np.array([0.0, 0.0, -1.0]))  # crush below grip_floor
        assert s[AH] == 0.0
        assert s[AY] == pytest.approx(0.03)  # back at rest on the ground

    @pytest.mark.parametrize("ap,held", [(0.19, 0.0), (0.2, 1.0), (0.35, 1.0), (0.5, 0.0)])
    def test_grip_band_bounds(self, ap, held):
        s = self.env.reset(self.rng)
        core = s[:9].copy()
        core[GX], core[GY] = core[AX], core[AY]
        core[AP] = ap
        s = self.env.step(self.env._with_relatives(core), np.array([0.0, 0.0, 0.0]))
        assert s[AH] == held

    def test_release_drops_to_ground(self):
        s = self._lifted_state()
        for _ in range(4):  # open up
            s = self.env.step(s, np.array([0.0, 0.0, 1.0]))
        assert s[AH] == 0.0
        assert s[AY] == pytest.approx(0.03)

    def test_release_aligned_stacks_exactly(self):
        s = self._lifted_state()
        core = s[:9].copy()
        core[GX] = core[BX] + 0.02  # within align tolerance
        core[AX] = core[GX]
        s = self.env._with_relatives(core)
        for _ in range(4):
            s = self.env.step(s, np.array([0.0, 0.0, 1.0]))
        stack = self.env.success_predicate(TaskId("stack", "main"))
        assert stack(s)
        assert s[AY] == pytest.approx(s[BY] + 0.06)

    def _lifted_state(self):
        s = self.env.reset(self.rng)
        core = s[:9].copy()
        core[GX], core[GY] = core[AX], core[AY]
        s = self.env._with_relatives(core)
        for _ in range(3):
            s = self.env.step(s, np.array([0.0, 0.0, -1.0]))
        for _ in range(8):
            s = self.env.step(s, np.array([0.0, 1.0, 0.0]))
        assert s[AH] == 1.0 and s[AY] >= self.env.lift_height
        return s

    @pytest.mark.parametrize("task", ["reach", "grasp", "lift", "release", "stack"])
    def test_examples_satisfy_predicates(self, task):
        tid = TaskId(task, "main")
        buf = generate_examples(self.env, tid, 20, np.random.default_rng(7))
        pred = self.env.success_predicate(tid)
        assert len(buf) == 20
        for s in buf.states:
            assert pred(s)

    def test_release_examples_include_stacked_starts(self):
        tid = TaskId("release", "auxiliary")
        buf = generate_examples(self.env, tid, 60, np.random.default_rng(3))
        on_b = np.abs(buf.states[:, AY] - (buf.states[:, BY] + 0.06)) < 1e-6
        assert 0 < on_b.sum() < 60  # mixture of stacked and plain states


class TestFrameStack:
    def test_stacking_semantics(self):
        env = FrameStack(ChainWorld(n_states=4), 3)
        rng = np.random.default_rng(0)
        s = env.reset(rng)
        assert s.shape == (12,)
        assert np.array_equal(s[:4], s[8:])  # initial obs tiled
        s2 = env.step(s, np.array([1.0]))
        assert np.array_equal(s2[:8], s[4:])       # shifted left
        assert env.env.decode(s2[8:]) == 1         # newest frame last

    def test_wrapped_predicate_uses_latest_frame(self):
        env = FrameStack(ChainWorld(n_states=3), 2)
        pred = env.success_predicate(MAIN)
        goal = env.env.encode(2)
        start = env.env.encode(0)
        assert pred(np.concatenate([start, goal]))
        assert not pred(np.concatenate([goal, start]))

    def test_examples_on_stacked_env(self):
        env = FrameStack(PointGrab(), 2)
        tid = TaskId("reach", "main")
        buf = generate_examples(env, tid, 5, np.random.default_rng(0))
        assert buf.state_dim == 30


def test_registry_round_trip():
    assert set(ENV_REGISTRY) == {"chain", "pointgrab"}
    env = make_env("chain", n_states=7)
    assert env.spec.obs_dim == 7
    with pytest.raises(KeyError):
        make_env("cartpole")
