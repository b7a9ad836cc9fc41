"""
verifyutils.py

Property suites behind the `verify` command. Every suite uses fixed
internal seeds and returns PropertyReports:

    {property, trials, violations, max_residual, counterexample}

Suites:
    lemma1       value/deviation identity on random drive trajectories
    signs        reward sign properties under constant consumption
    gradients    backpropagation against central finite differences
    constraints  action constraints over a learner run and a stress run
    hjb          learner's HJB selection and residual on a solved toy world
"""

####################
# Standard libraries
####################
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional

#######################
# Third party libraries
#######################
import numpy as np

#################
# Local libraries
#################
from configutils import RunConfig
from driveutils import (
    ConsumptionScenario,
    DiscountedFunctional,
    lemma1_check,
    scenario_reward,
    sign_property_cross_need,
    sign_property_deprivation,
    sign_property_dose,
)
from envutils import Environment
from learnerutils import init_learner, run
from logutils import verbose_log
from neuralutils import Approximator
from stateutils import WorldState, initial_state
from telemetryutils import EpisodeLog, StepRecord, sleep_bout_violations
from toyworldutils import ToyPolicy, ToyWorld, discretization_error, greedy_rollout, hjb_residual, value_iteration

SUITE_SEED = 20240


@dataclass
class PropertyReport:
    """Outcome of one property over all of its trials"""

    property: str
    trials: int
    violations: int = 0
    max_residual: float = 0.0
    counterexample: Optional[Dict[str, object]] = None

    def observe(self, residual: float, violated: bool, counterexample: Dict[str, object]):
        """Fold one trial into the report; keep the first counterexample"""
        self.max_residual = max(self.max_residual, float(residual))
        if violated:
            self.violations += 1
            if self.counterexample is None:
                self.counterexample = counterexample

    @property
    def passed(self) -> bool:
        """No trial violated the property"""
        return self.violations == 0

    def to_dict(self) -> Dict[str, object]:
        """JSON friendly view"""
        return asdict(self)


########
# lemma1
########
def _random_trajectory(rng: np.random.Generator, knots: int = 20, spacing: float = 0.1):
    # knots on multiples of `spacing`, which every tested step divides
    times = spacing * np.arange(knots)
    values = rng.uniform(0.0, 5.0, size=knots)
    return times, values


def _sample(times: np.ndarray, values: np.ndarray, functional: DiscountedFunctional) -> np.ndarray:
    grid = functional.step * np.arange(functional.horizon_steps + 1)
    return np.interp(grid, times, values)


def verify_lemma1(trials: int = 100, gamma: float = 0.99, step: float = 1e-3, **kwargs) -> List[PropertyReport]:
    """
    |V - d - ln(gamma) J| <= 10 step on random piecewise-linear drive
    trajectories, and the residual at step/2 is at most 0.6 times the
    residual at step.
    """
    verbose = kwargs.get("verbose")
    rng = np.random.default_rng(SUITE_SEED)
    coarse = DiscountedFunctional.for_truncation(gamma, step)
    fine = DiscountedFunctional.for_truncation(gamma, step / 2.0)
    identity = PropertyReport("lemma1_residual", trials)
    halving = PropertyReport("lemma1_halving", trials)
    for trial in range(trials):
        times, values = _random_trajectory(rng)
        residual = abs(lemma1_check(_sample(times, values, coarse), coarse))
        residual_half = abs(lemma1_check(_sample(times, values, fine), fine))
        example = {"trial": trial, "knots": values.tolist(), "residual": residual, "residual_half": residual_half}
        identity.observe(residual, residual > 10.0 * step, example)
        # below 1e-9 the residual is rounding noise and has no order
        ratio = residual_half / residual if residual > 1e-9 else 0.0
        halving.observe(ratio, ratio > 0.6, example)
    if verbose:
        verbose_log(f"lemma1: max residual {identity.max_residual:.3e}, max halving ratio {halving.max_residual:.3f}")
    return [identity, halving]


#######
# signs
#######
def _random_scenario(rng: np.random.Generator, boundary: float = 1e-3) -> ConsumptionScenario:
    while True:
        delta0 = rng.uniform(0.01, 5.0, size=2) * rng.choice([-1.0, 1.0], size=2)
        scenario = ConsumptionScenario(tuple(delta0), float(rng.uniform(0.01, 1.0)), float(rng.uniform(0.0, 2.0)))
        if abs(scenario.consumed_deviation) >= boundary:
            return scenario


def _scenario_dict(scenario: ConsumptionScenario) -> Dict[str, object]:
    return {"delta0": list(scenario.delta0), "m": scenario.m, "t": scenario.t}


def verify_signs(trials: int = 1000, **kwargs) -> List[PropertyReport]:
    """
    The three sign properties, closed-form agreement with the finite
    differences and the sign of the reward itself, on `trials` random
    scenarios each.
    """
    verbose = kwargs.get("verbose")
    rng = np.random.default_rng(SUITE_SEED + 1)
    checks = (
        ("deprivation", sign_property_deprivation),
        ("cross_need", sign_property_cross_need),
        ("dose", sign_property_dose),
    )
    sign_reports = {name: PropertyReport(name, trials) for name, _ in checks}
    agreement = PropertyReport("closed_form_agreement", 3 * trials)
    reward_sign = PropertyReport("reward_sign", trials)
    for _ in range(trials):
        scenario = _random_scenario(rng)
        example = _scenario_dict(scenario)
        for name, check in checks:
            report = check(scenario)
            sign_reports[name].observe(
                abs(report.derivative), not report.holds, {**example, "derivative": report.derivative}
            )
            gap = abs(report.derivative - report.closed_form) / max(1.0, abs(report.closed_form))
            agreement.observe(gap, not report.agrees, {**example, "property": name})

        reward = scenario_reward(scenario)
        first = scenario.delta0[0]
        if first <= 0.0 and scenario.consumed_deviation <= 0.0:
            wrong = reward <= 0.0
        elif first >= 0.0:
            wrong = reward >= 0.0
        else:
            wrong = False
        reward_sign.observe(abs(reward), wrong, {**example, "reward": reward})
    reports = list(sign_reports.values()) + [agreement, reward_sign]
    if verbose:
        verbose_log(f"signs: {sum(r.violations for r in reports)} violations over {trials} scenarios")
    return reports


###########
# gradients
###########
def relative_error(left: float, right: float, floor: float = 1e-3) -> float:
    """|left - right| / max(|left|, |right|, floor)"""
    return abs(left - right) / max(abs(left), abs(right), floor)


def _numeric_param_gradient(net: Approximator, inputs, upstream, param: np.ndarray, index, h: float) -> float:
    original = param[index]
    param[index] = original + h
    plus = float(np.sum(net.forward(inputs, train=False) * upstream))
    param[index] = original - h
    minus = float(np.sum(net.forward(inputs, train=False) * upstream))
    param[index] = original
    return (plus - minus) / (2.0 * h)


def _numeric_input_gradient(net: Approximator, inputs: np.ndarray, h: float) -> np.ndarray:
    gradient = np.empty_like(inputs)
    for i in range(inputs.size):
        shifted = inputs.copy()
        shifted[i] += h
        plus = float(net.forward(shifted, train=False)[0])
        shifted[i] -= 2.0 * h
        minus = float(net.forward(shifted, train=False)[0])
        gradient[i] = (plus - minus) / (2.0 * h)
    return gradient


def _pick_entries(params: List[np.ndarray], rng, samples: Optional[int]):
    """Every (array, index) pair, or `samples` of them drawn in proportion to array size"""
    if samples is None:
        return [(p, idx) for p, param in enumerate(params) for idx in np.ndindex(param.shape)]
    sizes = np.array([param.size for param in params], dtype=float)
    chosen = rng.choice(len(params), size=samples, p=sizes / sizes.sum())
    return [(int(p), np.unravel_index(int(rng.integers(params[p].size)), params[p].shape)) for p in chosen]


def _check_net(report: PropertyReport, net: Approximator, rng, tolerance: float, samples: Optional[int], h: float):
    inputs = rng.uniform(-1.0, 1.0, size=net.n_inputs)
    upstream = rng.normal(size=net.n_outputs)
    net.forward(inputs, train=False)
    analytic = net.grad_params(upstream)
    params = net.parameters()
    for p, idx in _pick_entries(params, rng, samples):
        numeric = _numeric_param_gradient(net, inputs, upstream, params[p], idx, h)
        report.trials += 1
        error = relative_error(float(analytic[p][idx]), numeric)
        report.observe(
            error,
            error > tolerance,
            {"layers": list(net.layer_sizes), "param": p, "index": [int(i) for i in idx], "analytic": float(analytic[p][idx]), "numeric": numeric},
        )
    if net.n_outputs == 1:
        analytic_input = net.grad_input(inputs)
        numeric_input = _numeric_input_gradient(net, inputs, h)
        for i in range(inputs.size):
            error = relative_error(float(analytic_input[i]), float(numeric_input[i]))
            report.trials += 1
            report.observe(
                error,
                error > tolerance,
                {"layers": list(net.layer_sizes), "input": i, "analytic": float(analytic_input[i]), "numeric": float(numeric_input[i])},
            )


def _directional_value(net: Approximator, inputs: np.ndarray, direction: np.ndarray) -> float:
    return float(net.grad_input(inputs) @ direction)


def _check_directional(report: PropertyReport, net: Approximator, rng, tolerance: float, samples: Optional[int], h: float):
    inputs = rng.uniform(-1.0, 1.0, size=net.n_inputs)
    direction = rng.normal(size=net.n_inputs)
    value, analytic = net.directional_grad_params(inputs, direction)
    expected = _directional_value(net, inputs, direction)
    error = relative_error(value, expected)
    report.trials += 1
    report.observe(error, error > tolerance, {"layers": list(net.layer_sizes), "value": value, "expected": expected})
    for p, idx in _pick_entries(net.parameters(), rng, samples):
        param = net.parameters()[p]
        original = param[idx]
        param[idx] = original + h
        plus = _directional_value(net, inputs, direction)
        param[idx] = original - h
        minus = _directional_value(net, inputs, direction)
        param[idx] = original
        numeric = (plus - minus) / (2.0 * h)
        report.trials += 1
        error = relative_error(float(analytic[p][idx]), numeric)
        report.observe(
            error,
            error > tolerance,
            {"layers": list(net.layer_sizes), "param": p, "index": [int(i) for i in idx], "analytic": float(analytic[p][idx]), "numeric": numeric},
        )


def verify_gradients(toy_nets: int = 20, samples: int = 100, h: float = 1e-5, **kwargs) -> List[PropertyReport]:
    """
    Parameter and input gradients against central finite differences,
    dropout off: every entry of random 1-1-1 nets (tolerance 1e-6), and
    `samples` random entries of full-size transition and deviation nets
    (tolerance 1e-4). The same nets check the parameter gradient of
    dJ/dx . v used by the full deviation loss.
    """
    verbose = kwargs.get("verbose")
    rng = np.random.default_rng(SUITE_SEED + 2)
    toy = PropertyReport("gradients_toy", 0)
    directional = PropertyReport("gradients_directional", 0)
    for _ in range(toy_nets):
        net = Approximator((1, 1, 1), dropout_rate=0.0, init_rng=rng)
        net.set_parameters([rng.uniform(-2.0, 2.0, size=p.shape) for p in net.parameters()])
        _check_net(toy, net, rng, 1e-6, None, h)
        _check_directional(directional, net, rng, 1e-6, None, h)
    full = PropertyReport("gradients_full", 0)
    for n_in, n_out in ((12, 6), (6, 1)):
        net = Approximator.mlp(n_in, n_out, init_rng=rng, dropout_rng=rng)
        _check_net(full, net, rng, 1e-4, samples, h)
    _check_directional(directional, net, rng, 1e-4, samples, h)
    if verbose:
        verbose_log(
            f"gradients: max relative error toy {toy.max_residual:.3e}, full {full.max_residual:.3e}, "
            f"directional {directional.max_residual:.3e}"
        )
    return [toy, full, directional]


#############
# constraints
#############
def _stress_record(k: int, state: WorldState, action) -> StepRecord:
    levels = state.levels
    return StepRecord(
        k=k,
        clock=state.clock,
        level_1=levels[0],
        level_2=levels[1],
        f_m=levels[2],
        f_s=levels[3],
        drive=0.0,
        reward=0.0,
        loss_f=0.0,
        loss_j=0.0,
        action=action.name,
        explored=True,
        pos_x=state.position[0],
        pos_y=state.position[1],
    )


def stress_run(env: Environment, state: WorldState, steps: int, rng: np.random.Generator):
    """Uniformly random admissible actions; returns (step violations, log)"""
    log = EpisodeLog()
    violations = 0
    for k in range(1, steps + 1):
        admissible = env.admissible_actions(state)
        action = admissible[int(rng.integers(len(admissible)))]
        next_state = env.step(state, action)
        violations += env.step_violations(state, action, next_state)
        log.record(_stress_record(k, next_state, action))
        state = next_state
    return violations, log


def verify_constraints(iterations: int = 14000, stress_steps: int = 5000, **kwargs) -> List[PropertyReport]:
    """
    Zero constraint breaches (walking tired, anything but sleep when
    forced or inside a bout, short bouts, leaving the arena) over a
    learner run with the default configuration, and over a random-policy
    run started next to the fatigue thresholds.
    """
    verbose = kwargs.get("verbose")
    cfg = RunConfig(seed=SUITE_SEED, iterations=iterations)
    env = cfg.environment()
    min_steps = cfg.sleep_min_steps

    learner_report = PropertyReport("constraints_learner", iterations)
    result = run(
        init_learner(cfg.learner_config(), cfg.seed),
        env,
        cfg.learner_config(),
        cfg.initial_state(),
        drive_cfg=cfg.drive_config(),
    )
    breaches = result.violations + sleep_bout_violations(result.log, min_steps)
    learner_report.observe(breaches, breaches > 0, {"seed": cfg.seed, "iterations": iterations, "violations": breaches})

    stress_report = PropertyReport("constraints_stress", stress_steps)
    start = initial_state(cfg.setpoint(), levels=(0.1, 0.1, 6.0, 9.99), position=(0.5, 0.5))
    breaches, log = stress_run(env, start, stress_steps, np.random.default_rng(SUITE_SEED + 3))
    breaches += sleep_bout_violations(log, min_steps)
    stress_report.observe(breaches, breaches > 0, {"steps": stress_steps, "violations": breaches})
    if verbose:
        verbose_log(f"constraints: {learner_report.violations + stress_report.violations} breaching runs")
    return [learner_report, stress_report]


#####
# hjb
#####
def verify_hjb(samples: int = 100, **kwargs) -> List[PropertyReport]:
    """
    On the toy world: the HJB residual of the value-iterated J* at
    `samples` states with |x| in [0.1, 1.5] stays within 5 times the
    grid's discretization error; the learner's selection rule, fed the
    true model and J*, reaches the set point from every sampled start;
    and the learner's own HJB residual stays within the same bound at
    `samples` states its trajectories visit (|x| >= 0.1).
    """
    verbose = kwargs.get("verbose")
    world = ToyWorld()
    values = value_iteration(world, verbose=verbose)
    bound = 5.0 * discretization_error(world, values)
    rng = np.random.default_rng(SUITE_SEED + 4)
    states = rng.uniform(0.1, 1.5, size=samples) * rng.choice([-1.0, 1.0], size=samples)

    residual_report = PropertyReport("hjb_residual", samples)
    for x, residual in zip(states, hjb_residual(world, values, states)):
        residual_report.observe(residual, residual > bound, {"x": float(x), "residual": float(residual), "bound": bound})

    rollout_report = PropertyReport("hjb_greedy_rollout", 10)
    visited = []
    for x in states[:10]:
        steps = int(math.ceil(abs(x) / world.step)) + 10
        trajectory, _ = greedy_rollout(world, values, float(x), steps)
        final = abs(float(trajectory[-1]))
        rollout_report.observe(final, final > 2.0 * world.step, {"start": float(x), "final": float(trajectory[-1])})
        visited.extend(float(v) for v in trajectory if abs(v) >= 0.1)

    policy = ToyPolicy(world, values)
    picks = np.linspace(0, len(visited) - 1, min(samples, len(visited))).astype(int)
    visited_report = PropertyReport("hjb_visited_residual", len(picks))
    for x in (visited[i] for i in picks):
        residual = policy.residual(x)
        visited_report.observe(residual, residual > bound, {"x": x, "residual": residual, "bound": bound})
    if verbose:
        verbose_log(
            f"hjb: max residual {residual_report.max_residual:.3e}, "
            f"visited {visited_report.max_residual:.3e} (bound {bound:.3e})"
        )
    return [residual_report, rollout_report, visited_report]


SUITES: Dict[str, Callable[..., List[PropertyReport]]] = {
    "lemma1": verify_lemma1,
    "signs": verify_signs,
    "gradients": verify_gradients,
    "constraints": verify_constraints,
    "hjb": verify_hjb,
}


def run_suites(suite: str = "all", **kwargs) -> List[PropertyReport]:
    """Run one suite by name, or every suite for 'all'"""
    names = list(SUITES) if suite == "all" else [suite]
    reports: List[PropertyReport] = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}, expected one of {sorted(SUITES)} or 'all'")
        reports.extend(SUITES[name](**kwargs))
    return reports
