import numpy as np
import pytest

from contracts import ContractViolationError
from envutils import Arena, BodyParams, Environment, Resource, Thresholds, body_dynamics
from constants import LEVEL_FLOOR
from stateutils import ActionId, SetPoint, action_spec, initial_state


def ids(actions):
    return [int(a.id) for a in actions]


def test_idle_dynamics_at_start(start_state):
    rates = body_dynamics(start_state, action_spec(ActionId.IDLE).control, BodyParams())
    np.testing.assert_allclose(rates, [-0.005, -0.005, -0.0008, 0.00005, 0.0, 0.0])


def test_admissible_at_start(env, start_state):
    # resources out of reach (0.354 > 0.3), sleep fatigue below 1
    assert ids(env.admissible_actions(start_state)) == [0, 1, 2, 3, 4, 5, 9]


def test_forced_sleep():
    env = Environment()
    state = initial_state(levels=(0.1, 0.1, 0.1, 10.0))
    assert ids(env.admissible_actions(state)) == [int(ActionId.SLEEP)]


def test_walking_into_a_wall_is_inadmissible(env):
    state = initial_state(position=(0.05, 0.5))
    assert int(ActionId.WALK_LEFT) not in ids(env.admissible_actions(state))
    assert int(ActionId.WALK_RIGHT) in ids(env.admissible_actions(state))


def test_tired_agent_cannot_walk(env):
    state = initial_state(levels=(0.1, 0.1, 6.5, 0.1))
    admissible = ids(env.admissible_actions(state))
    assert not set(admissible) & {0, 1, 2, 3}
    assert int(ActionId.IDLE) in admissible


def test_consume_needs_position_and_room(env):
    state = initial_state(position=(0.25, 0.75))
    assert int(ActionId.CONSUME_1) in ids(env.admissible_actions(state))
    assert int(ActionId.CONSUME_2) not in ids(env.admissible_actions(state))
    full = initial_state(levels=(8.5, 0.1, 0.1, 0.1), position=(0.25, 0.75))
    assert int(ActionId.CONSUME_1) not in ids(env.admissible_actions(full))


def test_consume_step(env):
    state = initial_state(position=(0.25, 0.75))
    after = env.step(state, action_spec(ActionId.CONSUME_1))
    # (c_1 + 0.1) * 0.1 = 0.005 per time unit, over dt = 0.01
    assert after.levels[0] == pytest.approx(0.10005)
    assert after.levels[1] == pytest.approx(0.1 - 0.05 * 0.1 * 0.01)
    assert after.position == state.position
    assert after.clock == pytest.approx(0.01)


def test_walk_step_moves_a_full_tenth(env, start_state):
    after = env.step(start_state, action_spec(ActionId.WALK_UP))
    assert after.position == pytest.approx((0.5, 0.6))
    assert after.levels[2] > start_state.levels[2]


def test_go_to_resource_moves_towards_it(env, start_state):
    resource = env.arena.resource(1)
    before = resource.distance(start_state.position)
    after = env.step(start_state, action_spec(ActionId.GO_TO_RESOURCE_1))
    assert resource.distance(after.position) == pytest.approx(before - 0.1)


def test_go_to_resource_stops_at_center(env):
    state = initial_state(position=(0.3, 0.75))
    after = env.step(state, action_spec(ActionId.GO_TO_RESOURCE_1))
    assert after.position == pytest.approx((0.25, 0.75))


def test_sleep_bout_locks_the_agent(env):
    state = initial_state(levels=(0.1, 0.1, 0.1, 2.0))
    after = env.step(state, action_spec(ActionId.SLEEP))
    assert after.sleep_steps_remaining == 999
    assert ids(env.admissible_actions(after)) == [int(ActionId.SLEEP)]
    again = env.step(after, action_spec(ActionId.SLEEP))
    assert again.sleep_steps_remaining == 998


def test_sleep_bout_lasts_the_minimum():
    env = Environment(thresholds=Thresholds(sleep_min_steps=3))
    state = initial_state(levels=(0.1, 0.1, 0.1, 2.0))
    for _ in range(3):
        state = env.step(state, action_spec(ActionId.SLEEP))
    assert state.sleep_steps_remaining == 0
    assert int(ActionId.IDLE) in ids(env.admissible_actions(state))


def test_levels_are_floored(env):
    state = initial_state(levels=(0.001, 0.1, 0.1, 0.1))
    after = env.step(state, action_spec(ActionId.IDLE))
    assert after.levels[0] == pytest.approx(1e-3)


def test_inadmissible_action_is_rejected(env, start_state):
    with pytest.raises(ContractViolationError):
        env.step(start_state, action_spec(ActionId.CONSUME_1))


def test_no_violations_on_admissible_steps(env, start_state):
    state = start_state
    for action_id in (ActionId.WALK_LEFT, ActionId.GO_TO_RESOURCE_2, ActionId.IDLE):
        action = action_spec(action_id)
        after = env.step(state, action)
        assert env.step_violations(state, action, after) == 0
        state = after


def test_violation_counting(env):
    forced = initial_state(levels=(0.1, 0.1, 0.1, 10.0))
    idle = action_spec(ActionId.IDLE)
    assert env.step_violations(forced, idle, forced) == 1
    outside = initial_state(position=(0.5, 0.5)).evolve(position=(1.2, 0.5))
    assert env.step_violations(initial_state(), idle, outside) == 1


def test_arena_validation():
    with pytest.raises(ContractViolationError):
        Arena(resources=(Resource((1.5, 0.5), 0.3, 1), Resource((0.75, 0.25), 0.3, 2)))
    with pytest.raises(ContractViolationError):
        Arena(resources=(Resource((0.5, 0.5), 0.3, 1), Resource((0.5, 0.5), 0.3, 2)))


def test_custom_setpoint_changes_deviation():
    state = initial_state(SetPoint((2.0, 2.0, 0.0, 0.0)))
    assert state.delta[0] == pytest.approx(-1.9)


def test_resource_product_never_increases(env):
    rng = np.random.default_rng(5)
    state = initial_state(position=(0.25, 0.75))
    product = state.levels[0] * state.levels[1]
    consumed = 0
    for _ in range(3000):
        actions = env.admissible_actions(state)
        action = actions[rng.integers(len(actions))]
        consumed += action.id in (ActionId.CONSUME_1, ActionId.CONSUME_2)
        state = env.step(state, action)
        levels = state.levels
        assert min(levels[:2]) > LEVEL_FLOOR
        assert levels[0] * levels[1] <= product * (1.0 + 1e-12)
        product = levels[0] * levels[1]
    assert consumed > 0
    assert product < 0.01
