import math
from dataclasses import replace

import numpy as np
import pytest

from configutils import RunConfig
from constants import ADAM_BETA1
from contracts import ContractViolationError
from driveutils import drive
from learnerutils import (
    LearnerConfig,
    RunAbortedError,
    deviation_residual,
    hjb_action_value,
    hjb_values,
    init_learner,
    load_learner_checkpoint,
    run,
    select_action,
    update_deviation,
    update_transition,
)
from neuralutils import parameter_distance
from stateutils import ActionId, action_spec, initial_state
from telemetryutils import EpisodeLog, summarize


def test_config_validation():
    with pytest.raises(ContractViolationError):
        LearnerConfig(target_mode="double")
    with pytest.raises(ContractViolationError):
        LearnerConfig(gamma=1.0)
    with pytest.raises(ContractViolationError):
        LearnerConfig(epsilon_explore=1.5)


def test_init_is_seeded(small_cfg):
    first, second, other = init_learner(small_cfg, 3), init_learner(small_cfg, 3), init_learner(small_cfg, 4)
    assert parameter_distance(first.f_hat, second.f_hat) == 0.0
    assert parameter_distance(first.j_hat, second.j_hat) == 0.0
    assert parameter_distance(first.f_hat, other.f_hat) > 0.0
    assert parameter_distance(first.j_hat, first.j_target) == 0.0
    assert first.f_hat.layer_sizes == (12, 8, 8, 6)
    assert first.j_hat.layer_sizes == (6, 8, 8, 1)


def test_hjb_value_formula(small_cfg, env, start_state):
    learner = init_learner(small_cfg, 0)
    action = action_spec(ActionId.WALK_UP)
    zeta = start_state.zeta()
    control = env.applied_control(start_state, action).as_array()
    predicted = learner.f_hat.forward(np.concatenate([zeta, control]))
    gradient = learner.j_hat.grad_input(zeta)
    expected = drive(zeta[:4] + predicted[:4] * small_cfg.dt) + predicted @ gradient
    assert hjb_action_value(start_state, action, learner, small_cfg, env) == pytest.approx(expected)


def test_greedy_selection_is_the_argmin(small_cfg, env, start_state):
    cfg = replace(small_cfg, epsilon_explore=0.0)
    learner = init_learner(cfg, 0)
    admissible = env.admissible_actions(start_state)
    action, explored = select_action(start_state, learner, cfg, admissible, env)
    values = [hjb_action_value(start_state, a, learner, cfg, env) for a in admissible]
    assert not explored
    assert action.id == admissible[int(np.argmin(values))].id


def test_exploration_picks_admissible_actions(small_cfg, env, start_state):
    cfg = replace(small_cfg, epsilon_explore=1.0)
    learner = init_learner(cfg, 0)
    admissible = env.admissible_actions(start_state)
    for _ in range(20):
        action, explored = select_action(start_state, learner, cfg, admissible, env)
        assert explored
        assert action in admissible


def test_forced_sleep_is_selected(small_cfg, env):
    learner = init_learner(replace(small_cfg, epsilon_explore=0.0), 0)
    state = initial_state(levels=(0.1, 0.1, 0.1, 10.0))
    action, _ = select_action(state, learner, small_cfg, env.admissible_actions(state), env)
    assert action.id == ActionId.SLEEP


def test_selection_needs_an_action(small_cfg, start_state):
    with pytest.raises(ContractViolationError):
        select_action(start_state, init_learner(small_cfg, 0), small_cfg, [])


def test_batched_hjb_values(small_cfg, env, start_state):
    learner = init_learner(small_cfg, 0)
    admissible = env.admissible_actions(start_state)
    controls = np.vstack([env.applied_control(start_state, a).as_array() for a in admissible])
    values = hjb_values(start_state.zeta(), controls, learner, small_cfg)
    assert values.shape == (len(admissible),)


def test_transition_regression_converges(small_cfg):
    cfg = replace(small_cfg, dropout_rate=0.0)
    learner = init_learner(cfg, 1)
    zeta = np.array([-0.9, -1.9, 0.1, 0.1, 0.5, 0.5])
    control = np.array([0.0, 0.0, 0.01, 0.0, 0.0, 0.1])
    rates = np.array([-0.005, -0.005, 0.0002, 0.00005, 0.1, 0.0])
    zeta_next = zeta + rates * cfg.dt
    losses = [update_transition(learner, zeta, control, zeta_next, cfg) for _ in range(5000)]
    assert losses[-1] < losses[0]
    assert losses[-1] < 1e-6


def test_exact_transition_model_has_zero_loss(small_cfg):
    cfg = replace(small_cfg, dropout_rate=0.0)
    learner = init_learner(cfg, 1)
    for param in learner.f_hat.parameters():
        param[...] = 0.0
    before = [p.copy() for p in learner.f_hat.parameters()]
    zeta = np.array([-0.9, -1.9, 0.1, 0.1, 0.5, 0.5])
    loss = update_transition(learner, zeta, np.zeros(6), zeta.copy(), cfg)
    assert loss == 0.0
    for old, new in zip(before, learner.f_hat.parameters()):
        np.testing.assert_array_equal(old, new)


def test_deviation_residual_arithmetic():
    residual = deviation_residual(1.0, np.array([1.0, 2.0]), np.array([3.0, 4.0]), 2.0, 0.5)
    assert residual == pytest.approx(12.0 + 2.0 * math.log(0.5))


def test_zero_transition_model_ties_to_first_action(small_cfg, env, start_state):
    cfg = replace(small_cfg, epsilon_explore=0.0)
    learner = init_learner(cfg, 0)
    for param in learner.f_hat.parameters():
        param[...] = 0.0
    admissible = env.admissible_actions(start_state)
    values = [hjb_action_value(start_state, a, learner, cfg, env) for a in admissible]
    assert len(set(values)) == 1
    action, explored = select_action(start_state, learner, cfg, list(reversed(admissible)), env)
    assert not explored
    assert action.id == min(a.id for a in admissible)


def test_explored_fraction_concentrates(small_cfg, start_state):
    learner = init_learner(small_cfg, 6)
    idle = [action_spec(ActionId.IDLE)]
    draws = 100_000
    explored = sum(select_action(start_state, learner, small_cfg, idle)[1] for _ in range(draws))
    assert 0.29 <= explored / draws <= 0.31


def test_deviation_residual_worked_example():
    residual = deviation_residual(0.5, np.array([-0.2]), np.array([1.0]), 10.0, 0.99)
    assert residual == pytest.approx(0.1995, abs=1e-4)
    assert residual**2 == pytest.approx(0.03980, abs=1e-5)


def test_deviation_update_worked_example(small_cfg):
    # J_hat == 10 everywhere, so its input gradient vanishes; a next-state
    # drive of 0.3 stands for d = 0.5 plus a gradient term of -0.2
    learner = init_learner(small_cfg, 3)
    for param in learner.j_hat.parameters() + learner.j_target.parameters():
        param[...] = 0.0
    learner.j_hat.biases[-1][...] = 10.0
    learner.j_target.biases[-1][...] = 10.0
    zeta = np.array([-0.9, -1.9, 0.1, 0.1, 0.5, 0.5])
    zeta_next = np.array([math.sqrt(0.09 - 1e-6), 0.0, 0.1, 0.1, 0.5, 0.5])
    loss = update_deviation(learner, zeta, zeta_next, np.zeros(6), small_cfg)
    assert loss == pytest.approx(0.03980, abs=1e-5)


def test_target_contracts_towards_frozen_deviation_net(small_cfg):
    cfg = replace(small_cfg, tau=0.01)
    learner = init_learner(cfg, 8)
    learner.j_opt.learning_rate = 0.0
    for param in learner.j_target.parameters():
        param += 0.1
    zeta = np.array([-0.9, -1.9, 0.1, 0.1, 0.5, 0.5])
    distance = parameter_distance(learner.j_hat, learner.j_target)
    for _ in range(10):
        update_deviation(learner, zeta, zeta, np.zeros(6), cfg)
        shrunk = parameter_distance(learner.j_hat, learner.j_target)
        assert shrunk == pytest.approx((1.0 - cfg.tau) * distance, rel=1e-9)
        distance = shrunk


def test_full_deviation_gradient_matches_finite_differences(small_cfg):
    cfg = replace(small_cfg, target_mode="none", dropout_rate=0.0, grad_clip=0.0)
    learner = init_learner(cfg, 4)
    zeta = np.array([-0.9, -1.9, 0.1, 0.1, 0.5, 0.5])
    control = np.array([0.0, 0.0, 0.01, 0.0, 0.1, 0.0])
    zeta_next = zeta + np.array([-0.005, -0.005, 0.0002, 0.00005, 0.1, 0.0]) * cfg.dt
    predicted = learner.f_hat.forward(np.concatenate([zeta, control]))
    probe = learner.j_hat.copy()

    def loss(net):
        residual = deviation_residual(
            drive(zeta_next), net.grad_input(zeta), predicted, float(net.forward(zeta)[0]), cfg.gamma
        )
        return residual * residual

    update_deviation(learner, zeta, zeta_next, control, cfg)
    analytic = [first / (1.0 - ADAM_BETA1) for first in learner.j_opt.first]
    h = 1e-5
    for param, grad in zip(probe.parameters(), analytic):
        for index in list(np.ndindex(param.shape))[:6]:
            original = param[index]
            param[index] = original + h
            plus = loss(probe)
            param[index] = original - h
            minus = loss(probe)
            param[index] = original
            assert grad[index] == pytest.approx((plus - minus) / (2 * h), rel=1e-4, abs=1e-8)


def test_semi_gradient_holds_the_gradient_term_constant(small_cfg):
    cfg = replace(small_cfg, dropout_rate=0.0, grad_clip=0.0)
    learner = init_learner(cfg, 4)
    zeta = np.array([-0.9, -1.9, 0.1, 0.1, 0.5, 0.5])
    control = np.zeros(6)
    predicted = learner.f_hat.forward(np.concatenate([zeta, control]))
    residual = deviation_residual(
        drive(zeta),
        learner.j_target.grad_input(zeta),
        predicted,
        float(learner.j_hat.forward(zeta)[0]),
        cfg.gamma,
    )
    learner.j_hat.forward(zeta)
    expected = learner.j_hat.grad_params(np.array([2.0 * residual * math.log(cfg.gamma)]))
    update_deviation(learner, zeta, zeta, control, cfg)
    for first, grad in zip(learner.j_opt.first, expected):
        np.testing.assert_allclose(first / (1.0 - ADAM_BETA1), grad, rtol=1e-10, atol=1e-15)


def test_run_appends_to_the_given_log(small_cfg, env, start_state):
    log = EpisodeLog(metadata={"seed": 7, "config_hash": "abc"})
    result = run(init_learner(small_cfg, 0), env, small_cfg, start_state, log=log)
    assert result.log is log
    assert log.metadata == {"seed": 7, "config_hash": "abc"}
    assert len(log) == small_cfg.iterations


@pytest.mark.parametrize("target_mode", ["semi_gradient", "none"])
def test_deviation_update_moves_target_by_tau(small_cfg, target_mode):
    cfg = replace(small_cfg, target_mode=target_mode, tau=0.5)
    learner = init_learner(cfg, 2)
    before = [p.copy() for p in learner.j_target.parameters()]
    zeta = np.array([-0.9, -1.9, 0.1, 0.1, 0.5, 0.5])
    control = np.zeros(6)
    loss = update_deviation(learner, zeta, zeta, control, cfg)
    assert loss >= 0.0
    assert parameter_distance(learner.j_hat, learner.j_target) > 0.0
    for old, new, online in zip(before, learner.j_target.parameters(), learner.j_hat.parameters()):
        np.testing.assert_allclose(new, 0.5 * old + 0.5 * online)


def test_run_records_every_step(small_cfg, env, start_state):
    result = run(init_learner(small_cfg, 0), env, small_cfg, start_state)
    assert [r.k for r in result.log.records] == list(range(1, 31))
    assert result.violations == 0
    assert result.log.records[-1].clock == pytest.approx(0.3)
    assert result.explored == sum(r.explored for r in result.log.records)


def test_run_is_deterministic(small_cfg, env, start_state):
    first = run(init_learner(small_cfg, 9), env, small_cfg, start_state).log
    second = run(init_learner(small_cfg, 9), env, small_cfg, start_state).log
    assert first.records == second.records


def test_zero_iterations(small_cfg, env, start_state):
    result = run(init_learner(small_cfg, 0), env, replace(small_cfg, iterations=0), start_state)
    assert len(result.log) == 0
    assert result.state == start_state


def test_sink_failure_checkpoints_and_resumes(small_cfg, env, start_state, tmp_path):
    uninterrupted = run(init_learner(small_cfg, 5), env, small_cfg, start_state).log

    def failing_sink(step_record):
        if step_record.k == 5:
            raise OSError("disk full")

    checkpoint = tmp_path / "aborted.npz"
    with pytest.raises(RunAbortedError) as info:
        run(
            init_learner(small_cfg, 5),
            env,
            small_cfg,
            start_state,
            sink=failing_sink,
            checkpoint_path=str(checkpoint),
        )
    assert info.value.iteration == 5
    assert checkpoint.exists()

    learner, state, iteration, _ = load_learner_checkpoint(str(checkpoint))
    assert iteration == 5
    resumed = run(learner, env, small_cfg, state, start_iteration=iteration).log
    assert [r.k for r in resumed.records] == list(range(6, 31))
    assert resumed.records == uninterrupted.records[5:]


@pytest.mark.slow
def test_default_runs_over_five_seeds():
    lowered = 0
    for seed in range(5):
        cfg = RunConfig(seed=seed)
        learner_cfg = cfg.learner_config()
        result = run(
            init_learner(learner_cfg, seed),
            cfg.environment(),
            learner_cfg,
            cfg.initial_state(),
            drive_cfg=cfg.drive_config(),
        )
        summary = summarize(result.log, result.violations, cfg.sleep_min_steps)
        assert summary["iterations"] == 14000
        assert summary["constraint_violations"] == 0
        assert 0.28 <= summary["explored_fraction"] <= 0.32
        # level_1 * level_2 never grows, so a fed resource 1 starves resource 2
        if summary["final_mean_level_1"] > 0.1:
            assert summary["final_mean_drive"] > 0.5 * summary["initial_mean_drive"]
        lowered += summary["median_loss_j_final"] < summary["median_loss_j_early"]
    assert lowered >= 3
