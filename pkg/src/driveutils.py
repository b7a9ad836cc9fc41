"""
driveutils.py

Drive, reward, the discounted value/deviation functionals and the
sign properties of the reward under constant consumption.

The drive is the regularized masked Euclidean norm of the deviations,
d(delta) = sqrt(eps + sum of delta_i^2 over the masked components).
The reward is minus its time derivative.
"""

####################
# Standard libraries
####################
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Tuple

#######################
# Third party libraries
#######################
import numpy as np

#################
# Local libraries
#################
from constants import DRIVE_EPSILON, DRIVE_MASK, LEMMA1_TRUNCATION, SIGN_TOLERANCE
from contracts import require


@dataclass(frozen=True)
class DriveConfig:
    """Regularizer and component mask of the drive"""

    epsilon_reg: float = DRIVE_EPSILON
    mask: Tuple[bool, ...] = DRIVE_MASK

    def __post_init__(self):
        require(self.epsilon_reg > 0.0, f"epsilon_reg must be > 0, got {self.epsilon_reg}")
        object.__setattr__(self, "mask", tuple(bool(m) for m in self.mask))


def drive(delta: Sequence[float], cfg: DriveConfig = DriveConfig()) -> float:
    """
    d(delta) = sqrt(eps + sum_{i: mask_i} delta_i^2)

    Only the first len(mask) components are read, so a full 6 component
    state vector can be passed directly.
    """
    delta = np.asarray(delta, dtype=np.float64)[: len(cfg.mask)]
    masked = delta[np.asarray(cfg.mask, dtype=bool)]
    return math.sqrt(cfg.epsilon_reg + float(np.dot(masked, masked)))


def drive_batch(deltas: np.ndarray, cfg: DriveConfig = DriveConfig()) -> np.ndarray:
    """Row-wise drive of a (n, >=4) array"""
    deltas = np.atleast_2d(np.asarray(deltas, dtype=np.float64))[:, : len(cfg.mask)]
    masked = deltas[:, np.asarray(cfg.mask, dtype=bool)]
    return np.sqrt(cfg.epsilon_reg + np.einsum("ij,ij->i", masked, masked))


def reward_discrete(
    delta_prev: Sequence[float],
    delta_next: Sequence[float],
    step: float,
    cfg: DriveConfig = DriveConfig(),
) -> float:
    """Finite difference reward -(d(next) - d(prev)) / step"""
    require(step > 0.0, f"step must be > 0, got {step}")
    return -(drive(delta_next, cfg) - drive(delta_prev, cfg)) / step


#####################
# Discounted integrals
#####################
@dataclass(frozen=True)
class DiscountedFunctional:
    """Discount factor, horizon and step of a discounted quadrature"""

    gamma: float
    horizon_steps: int
    step: float

    def __post_init__(self):
        require(0.0 < self.gamma < 1.0, f"gamma must be in (0, 1), got {self.gamma}")
        require(self.horizon_steps > 0, "horizon_steps must be positive")
        require(self.step > 0.0, "step must be positive")

    @classmethod
    def for_truncation(
        cls, gamma: float, step: float, truncation: float = LEMMA1_TRUNCATION
    ) -> "DiscountedFunctional":
        """Shortest horizon with gamma^(horizon * step) < truncation"""
        horizon = math.log(truncation) / math.log(gamma)
        return cls(gamma=gamma, horizon_steps=int(math.floor(horizon / step)) + 1, step=step)

    @property
    def horizon(self) -> float:
        """Horizon length in time units"""
        return self.horizon_steps * self.step

    @property
    def truncation(self) -> float:
        """Discount weight left beyond the horizon"""
        return self.gamma**self.horizon


@lru_cache(maxsize=8)
def _interval_weights(gamma: float, step: float, count: int) -> np.ndarray:
    # exact integral of gamma^s over [k*step, (k+1)*step]
    log_gamma = math.log(gamma)
    weights = np.power(gamma, np.arange(count, dtype=np.float64) * step)
    weights *= math.expm1(log_gamma * step) / log_gamma
    weights.setflags(write=False)
    return weights


def lemma1_check(drive_samples: Sequence[float], functional: DiscountedFunctional) -> float:
    """
    Residual V - d(t0) - ln(gamma) J of the value/deviation identity.

    V integrates gamma^s r(s) with r the finite-difference reward of the
    samples, J integrates gamma^s d(s) with the left-endpoint sample of
    each interval. Discount weights are integrated exactly per interval,
    and the trajectory is held at its last sample beyond the horizon.
    """
    require(
        functional.truncation < LEMMA1_TRUNCATION,
        f"horizon too short: gamma^T = {functional.truncation:.3e} >= {LEMMA1_TRUNCATION}",
    )
    samples = np.asarray(drive_samples, dtype=np.float64)
    require(samples.ndim == 1, "drive samples must be one dimensional")
    require(
        samples.size >= functional.horizon_steps + 1,
        f"need {functional.horizon_steps + 1} samples, got {samples.size}",
    )
    require(bool(np.all(np.isfinite(samples))), "drive samples must be finite")

    count = samples.size - 1
    log_gamma = math.log(functional.gamma)
    weights = _interval_weights(functional.gamma, functional.step, count)
    rewards = -np.diff(samples) / functional.step
    value = float(np.dot(rewards, weights))
    tail = samples[-1] * functional.gamma ** (count * functional.step) / -log_gamma
    deviation = float(np.dot(samples[:-1], weights)) + tail
    return value - samples[0] - log_gamma * deviation


##########################
# Constant consumption case
##########################
@dataclass(frozen=True)
class ConsumptionScenario:
    """
    An agent starting at deviations delta0 that consumes the first
    resource at rate m; t is the elapsed time.
    """

    delta0: Tuple[float, ...]
    m: float
    t: float

    def __post_init__(self):
        object.__setattr__(self, "delta0", tuple(float(v) for v in self.delta0))
        require(len(self.delta0) >= 2, "delta0 needs at least two needs")
        require(
            all(math.isfinite(v) for v in self.delta0 + (self.m, self.t)),
            "scenario must be finite",
        )
        require(self.t >= 0.0, f"t must be nonnegative, got {self.t}")

    @property
    def dose(self) -> float:
        """Amount consumed so far, t * m"""
        return self.t * self.m

    @property
    def consumed_deviation(self) -> float:
        """delta_{0,1} + t m, the consumed need's deviation at time t"""
        return self.delta0[0] + self.dose

    def with_first(self, value: float) -> "ConsumptionScenario":
        """Copy with delta_{0,1} replaced"""
        return ConsumptionScenario((value,) + self.delta0[1:], self.m, self.t)

    def with_second(self, value: float) -> "ConsumptionScenario":
        """Copy with delta_{0,2} replaced"""
        return ConsumptionScenario(
            self.delta0[:1] + (value,) + self.delta0[2:], self.m, self.t
        )


def _squared_norm(scenario: ConsumptionScenario) -> float:
    return float(np.dot(scenario.delta0, scenario.delta0))


def drive_at_dose(scenario: ConsumptionScenario, dose: float, cfg: DriveConfig) -> float:
    """sqrt(eps + dose^2 + 2 dose delta_{0,1} + delta0^T delta0)"""
    radicand = dose * dose + 2.0 * dose * scenario.delta0[0] + _squared_norm(scenario)
    return math.sqrt(cfg.epsilon_reg + max(radicand, 0.0))


def scenario_drive(scenario: ConsumptionScenario, cfg: DriveConfig = DriveConfig()) -> float:
    """Closed-form drive d(t) under constant consumption"""
    return drive_at_dose(scenario, scenario.dose, cfg)


def scenario_reward(scenario: ConsumptionScenario, cfg: DriveConfig = DriveConfig()) -> float:
    """Closed-form reward r(t) = -(delta_{0,1} + t m) m / d(t)"""
    return -scenario.consumed_deviation * scenario.m / scenario_drive(scenario, cfg)


@dataclass(frozen=True)
class SignReport:
    """Outcome of one sign-property evaluation"""

    property: str
    expected: str
    derivative: float
    closed_form: float
    holds: bool
    skipped: bool = False

    @property
    def agrees(self) -> bool:
        """Finite difference and closed form agree to 1e-6 relative"""
        if self.skipped:
            return True
        return abs(self.derivative - self.closed_form) <= 1e-6 * max(
            1.0, abs(self.closed_form)
        )


def _central_difference(func: Callable[[float], float], x: float) -> float:
    h = 1e-6 * max(1.0, abs(x))
    return (func(x + h) - func(x - h)) / (2.0 * h)


def _judge(expected: str, derivative: float, tol: float) -> bool:
    if expected == "<=0":
        return derivative <= tol
    if expected == ">=0":
        return derivative >= -tol
    return abs(derivative) <= tol


def _split(value: float, below: str, above: str) -> str:
    if value < 0.0:
        return below
    if value > 0.0:
        return above
    return "=0"


def sign_property_deprivation(
    scenario: ConsumptionScenario, cfg: DriveConfig = DriveConfig(), tol: float = SIGN_TOLERANCE
) -> SignReport:
    """
    d r / d |delta_{0,1}|: <= 0 when delta_{0,1} >= 0 (overshoot is
    punished harder), >= 0 when delta_{0,1} <= 0 (deprivation makes the
    same intake more rewarding).
    """
    first = scenario.delta0[0]
    if first == 0.0:
        return SignReport("deprivation", "skip", 0.0, 0.0, True, skipped=True)
    sign = math.copysign(1.0, first)

    def reward_of(magnitude: float) -> float:
        return scenario_reward(scenario.with_first(sign * magnitude), cfg)

    derivative = _central_difference(reward_of, abs(first))
    closed = closed_form_deprivation(scenario, cfg)
    expected = "<=0" if first > 0.0 else ">=0"
    return SignReport("deprivation", expected, derivative, closed, _judge(expected, derivative, tol))


def sign_property_cross_need(
    scenario: ConsumptionScenario, cfg: DriveConfig = DriveConfig(), tol: float = SIGN_TOLERANCE
) -> SignReport:
    """
    d r / d |delta_{0,2}|: <= 0 while the consumed need is still below
    its set point at time t, >= 0 once it has overshot.
    """
    second = scenario.delta0[1]
    if second == 0.0:
        return SignReport("cross_need", "skip", 0.0, 0.0, True, skipped=True)
    sign = math.copysign(1.0, second)

    def reward_of(magnitude: float) -> float:
        return scenario_reward(scenario.with_second(sign * magnitude), cfg)

    derivative = _central_difference(reward_of, abs(second))
    closed = closed_form_cross_need(scenario, cfg)
    expected = _split(scenario.consumed_deviation, "<=0", ">=0")
    return SignReport("cross_need", expected, derivative, closed, _judge(expected, derivative, tol))


def sign_property_dose(
    scenario: ConsumptionScenario, cfg: DriveConfig = DriveConfig(), tol: float = SIGN_TOLERANCE
) -> SignReport:
    """
    d d(t) / d(tm): <= 0 before the consumed need reaches its set point,
    >= 0 after.
    """
    derivative = _central_difference(
        lambda dose: drive_at_dose(scenario, dose, cfg), scenario.dose
    )
    closed = closed_form_dose(scenario, cfg)
    expected = _split(scenario.consumed_deviation, "<=0", ">=0")
    if expected == "=0":
        # minimum of the drive; the slope is only zero up to the sqrt(eps) scale
        tol = max(tol, math.sqrt(cfg.epsilon_reg))
    return SignReport("dose", expected, derivative, closed, _judge(expected, derivative, tol))


def closed_form_deprivation(scenario: ConsumptionScenario, cfg: DriveConfig = DriveConfig()) -> float:
    """Analytic d r / d |delta_{0,1}|"""
    first = scenario.delta0[0]
    rest = _squared_norm(scenario) - first * first
    denominator = scenario_drive(scenario, cfg) ** 3
    return -math.copysign(1.0, first) * scenario.m * (cfg.epsilon_reg + rest) / denominator


def closed_form_cross_need(scenario: ConsumptionScenario, cfg: DriveConfig = DriveConfig()) -> float:
    """Analytic d r / d |delta_{0,2}|"""
    denominator = scenario_drive(scenario, cfg) ** 3
    return scenario.consumed_deviation * scenario.m * abs(scenario.delta0[1]) / denominator


def closed_form_dose(scenario: ConsumptionScenario, cfg: DriveConfig = DriveConfig()) -> float:
    """Analytic d d(t) / d(tm)"""
    return scenario.consumed_deviation / scenario_drive(scenario, cfg)
