"""
envutils.py

The ground-truth world: a square arena with two fixed resources, action
admissibility, the true body dynamics f and the Euler stepper.

The learner only sees states and controls; it never calls
`body_dynamics` directly.
"""

####################
# Standard libraries
####################
import math
from dataclasses import dataclass, field
from typing import List, Tuple

#######################
# Third party libraries
#######################
import numpy as np

#################
# Local libraries
#################
from constants import (
    CONSUME_LEVEL_MAX,
    DEFAULT_ARENA_SIDE,
    DEFAULT_C,
    DEFAULT_DT,
    DEFAULT_RESOURCE_CENTERS,
    DEFAULT_RESOURCE_RADIUS,
    DEFAULT_VISION_RANGE,
    GO_TO_STEP,
    LEVEL_FLOOR,
    N_INTERNAL,
    SLEEP_ELIGIBLE_MIN,
    SLEEP_FORCED_MIN,
    SLEEP_MIN_STEPS,
    WALK_FATIGUE_MAX,
)
from contracts import require
from stateutils import ACTIONS, ActionId, ActionSpec, Control, SetPoint, WorldState, action_spec


@dataclass(frozen=True)
class Resource:
    """A consumable disc; the agent can consume inside its radius"""

    center: Tuple[float, float]
    radius: float
    index: int

    def distance(self, position) -> float:
        """Euclidean distance from `position` to the center"""
        return math.hypot(position[0] - self.center[0], position[1] - self.center[1])


def _default_resources() -> Tuple[Resource, ...]:
    return tuple(
        Resource(center=center, radius=DEFAULT_RESOURCE_RADIUS, index=i + 1)
        for i, center in enumerate(DEFAULT_RESOURCE_CENTERS)
    )


@dataclass(frozen=True)
class Arena:
    """Square arena [0, side]^2 holding the resources"""

    side: float = DEFAULT_ARENA_SIDE
    resources: Tuple[Resource, ...] = field(default_factory=_default_resources)
    vision_range: float = DEFAULT_VISION_RANGE

    def __post_init__(self):
        require(self.side > 0.0, "arena side must be positive")
        require(self.vision_range > 0.0, "vision range must be positive")
        require(len(self.resources) == 2, "the arena holds exactly two resources")
        require(
            sorted(r.index for r in self.resources) == [1, 2],
            "resource indices must be 1 and 2",
        )
        for resource in self.resources:
            require(resource.radius > 0.0, f"resource {resource.index} radius must be > 0")
            require(
                self.contains(resource.center),
                f"resource {resource.index} center {resource.center} is outside the arena",
            )
        require(
            self.resources[0].center != self.resources[1].center,
            "resources must have distinct centers",
        )

    def contains(self, position) -> bool:
        """True when `position` lies in the closed square"""
        return 0.0 <= position[0] <= self.side and 0.0 <= position[1] <= self.side

    def resource(self, index: int) -> Resource:
        """Resource by its 1-based index"""
        for resource in self.resources:
            if resource.index == index:
                return resource
        raise KeyError(f"no resource {index}")


@dataclass(frozen=True)
class BodyParams:
    """Self-regulation constants c, set point and time step"""

    c: Tuple[float, ...] = DEFAULT_C
    setpoint: SetPoint = field(default_factory=SetPoint)
    dt: float = DEFAULT_DT

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        require(len(self.c) == N_INTERNAL, f"c must have {N_INTERNAL} components")
        require(self.dt > 0.0, f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class Thresholds:
    """Fatigue and level gates of the actions"""

    walk_fatigue_max: float = WALK_FATIGUE_MAX
    sleep_eligible_min: float = SLEEP_ELIGIBLE_MIN
    sleep_forced_min: float = SLEEP_FORCED_MIN
    consume_level_max: float = CONSUME_LEVEL_MAX
    sleep_min_steps: int = SLEEP_MIN_STEPS

    def __post_init__(self):
        require(
            min(
                self.walk_fatigue_max,
                self.sleep_eligible_min,
                self.sleep_forced_min,
                self.consume_level_max,
                self.sleep_min_steps,
            )
            > 0,
            "thresholds must be positive",
        )
        require(
            self.sleep_forced_min > self.sleep_eligible_min,
            "forced sleep threshold must exceed the eligibility threshold",
        )


def body_dynamics(state: WorldState, control: Control, params: BodyParams) -> np.ndarray:
    """
    f(zeta, u): internal rows (c_i + u_i)(delta_i + x*_i), position rows
    (u_5, u_6).
    """
    u = control.as_array()
    levels = np.asarray(state.delta, dtype=np.float64) + params.setpoint.as_array()
    rates = np.empty(6, dtype=np.float64)
    rates[:4] = (np.asarray(params.c, dtype=np.float64) + u[:4]) * levels
    rates[4:] = u[4:]
    return rates


def _walk_target(state: WorldState, action: ActionSpec) -> Tuple[float, float]:
    u = action.control.values
    return (state.position[0] + u[4], state.position[1] + u[5])


def admissible_actions(
    state: WorldState, arena: Arena, thresholds: Thresholds
) -> List[ActionSpec]:
    """
    The admissible subset of the ten actions, in action-id order. Never
    empty: Idle, or Sleep when it is forced, is always present.
    """
    sleep = action_spec(ActionId.SLEEP)
    if state.sleep_steps_remaining > 0 or state.sleep_fatigue >= thresholds.sleep_forced_min:
        return [sleep]

    levels = state.levels
    admissible = []
    for action in ACTIONS:
        if action.is_walk:
            ok = state.muscular_fatigue <= thresholds.walk_fatigue_max and arena.contains(
                _walk_target(state, action)
            )
        elif action.id in (ActionId.GO_TO_RESOURCE_1, ActionId.GO_TO_RESOURCE_2):
            ok = arena.resource(action.resource).distance(state.position) <= arena.vision_range
        elif action.id in (ActionId.CONSUME_1, ActionId.CONSUME_2):
            resource = arena.resource(action.resource)
            ok = (
                resource.distance(state.position) <= resource.radius
                and levels[action.resource - 1] <= thresholds.consume_level_max
            )
        elif action.id == ActionId.SLEEP:
            ok = state.sleep_fatigue >= thresholds.sleep_eligible_min
        else:
            ok = True
        if ok:
            admissible.append(action)
    return admissible


def applied_control(state: WorldState, action: ActionSpec, arena: Arena) -> Control:
    """
    The control actually applied this step. Equal to the nominal control
    except for go-to-resource, which adds one directed sub-step of length
    0.1 (or the remaining distance) towards the resource center.
    """
    if action.id not in (ActionId.GO_TO_RESOURCE_1, ActionId.GO_TO_RESOURCE_2):
        return action.control
    resource = arena.resource(action.resource)
    distance = resource.distance(state.position)
    values = list(action.control.values)
    if distance > 0.0:
        length = min(GO_TO_STEP, distance)
        values[4] = (resource.center[0] - state.position[0]) * length / distance
        values[5] = (resource.center[1] - state.position[1]) * length / distance
    return Control(tuple(values))


def step(
    state: WorldState,
    action: ActionSpec,
    params: BodyParams,
    arena: Arena,
    thresholds: Thresholds,
) -> WorldState:
    """
    One Euler step. Internal rows integrate f * dt; the position moves by
    the control's full displacement per elementary action.
    """
    require(
        any(a.id == action.id for a in admissible_actions(state, arena, thresholds)),
        f"action {action.name} is not admissible in state {state}",
    )
    control = applied_control(state, action, arena)
    rates = body_dynamics(state, control, params)

    setpoint = params.setpoint.as_array()
    delta = np.asarray(state.delta, dtype=np.float64) + rates[:4] * params.dt
    floored = delta + setpoint < LEVEL_FLOOR
    delta[floored] = LEVEL_FLOOR - setpoint[floored]

    position = (state.position[0] + rates[4], state.position[1] + rates[5])
    if action.id == ActionId.SLEEP:
        remaining = state.sleep_steps_remaining or thresholds.sleep_min_steps
        remaining -= 1
    else:
        remaining = 0

    return state.evolve(
        delta=tuple(delta.tolist()),
        position=position,
        clock=state.clock + params.dt,
        sleep_steps_remaining=remaining,
    )


def step_violations(
    state: WorldState,
    action: ActionSpec,
    next_state: WorldState,
    arena: Arena,
    thresholds: Thresholds,
) -> int:
    """
    Count the constraint breaches of one transition: walking while too
    tired, anything but sleep under forced sleep or inside a sleep bout,
    leaving the arena.
    """
    violations = 0
    if action.is_walk and state.muscular_fatigue > thresholds.walk_fatigue_max:
        violations += 1
    if action.id != ActionId.SLEEP and (
        state.sleep_fatigue >= thresholds.sleep_forced_min or state.sleep_steps_remaining > 0
    ):
        violations += 1
    if not arena.contains(next_state.position):
        violations += 1
    return violations


@dataclass(frozen=True)
class Environment:
    """Bundle of the world parameters, so callers pass one object"""

    params: BodyParams = field(default_factory=BodyParams)
    arena: Arena = field(default_factory=Arena)
    thresholds: Thresholds = field(default_factory=Thresholds)

    def admissible_actions(self, state: WorldState) -> List[ActionSpec]:
        """See `admissible_actions`"""
        return admissible_actions(state, self.arena, self.thresholds)

    def applied_control(self, state: WorldState, action: ActionSpec) -> Control:
        """See `applied_control`"""
        return applied_control(state, action, self.arena)

    def step(self, state: WorldState, action: ActionSpec) -> WorldState:
        """See `step`"""
        return step(state, action, self.params, self.arena, self.thresholds)

    def step_violations(
        self, state: WorldState, action: ActionSpec, next_state: WorldState
    ) -> int:
        """See `step_violations`"""
        return step_violations(state, action, next_state, self.arena, self.thresholds)
