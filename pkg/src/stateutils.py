"""
stateutils.py

State, control and action vocabulary shared by every other module.

The world state stores the internal deviations from the set point
(delta = x - x*), not the raw levels. Raw levels are derived on demand
with `levels_from_deviation`.
"""

####################
# Standard libraries
####################
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional, Sequence, Tuple

#######################
# Third party libraries
#######################
import numpy as np

#################
# Local libraries
#################
from constants import (
    CONTROL_CONSUME_1,
    CONTROL_CONSUME_2,
    CONTROL_GO_TO_RESOURCE,
    CONTROL_IDLE,
    CONTROL_SLEEP,
    CONTROL_WALK_DOWN,
    CONTROL_WALK_LEFT,
    CONTROL_WALK_RIGHT,
    CONTROL_WALK_UP,
    DEFAULT_INITIAL_LEVELS,
    DEFAULT_INITIAL_POSITION,
    DEFAULT_SETPOINT,
    N_EXTERNAL,
    N_INTERNAL,
    N_STATE,
    SLEEP_MIN_STEPS,
)
from contracts import require


class ActionId(IntEnum):
    """
    The ten action identifiers. The integer order is the tie-breaking
    order used by action selection.
    """

    WALK_LEFT = 0
    WALK_RIGHT = 1
    WALK_DOWN = 2
    WALK_UP = 3
    GO_TO_RESOURCE_1 = 4
    GO_TO_RESOURCE_2 = 5
    CONSUME_1 = 6
    CONSUME_2 = 7
    SLEEP = 8
    IDLE = 9


WALK_IDS = frozenset(
    (ActionId.WALK_LEFT, ActionId.WALK_RIGHT, ActionId.WALK_DOWN, ActionId.WALK_UP)
)


def _finite_tuple(values: Sequence[float], size: int, name: str) -> Tuple[float, ...]:
    require(len(values) == size, f"{name} must have {size} components, got {len(values)}")
    out = tuple(float(v) for v in values)
    require(all(math.isfinite(v) for v in out), f"{name} must be finite: {out}")
    return out


@dataclass(frozen=True)
class SetPoint:
    """Homeostatic set points x* for (resource 1, resource 2, f_m, f_s)"""

    values: Tuple[float, ...] = DEFAULT_SETPOINT

    def __post_init__(self):
        object.__setattr__(
            self, "values", _finite_tuple(self.values, N_INTERNAL, "set point")
        )

    def as_array(self) -> np.ndarray:
        """The set point as a float64 vector"""
        return np.array(self.values, dtype=np.float64)


@dataclass(frozen=True)
class Control:
    """Instantaneous effect of an action on (d1, d2, f_m, f_s, x, y)"""

    values: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _finite_tuple(self.values, N_STATE, "control"))

    def as_array(self) -> np.ndarray:
        """The control as a float64 vector"""
        return np.array(self.values, dtype=np.float64)


@dataclass(frozen=True)
class ActionSpec:
    """A discrete action with its nominal control and minimal duration"""

    id: ActionId
    control: Control
    min_duration_steps: int = 1
    resource: Optional[int] = None

    def __post_init__(self):
        require(self.min_duration_steps >= 1, "min_duration_steps must be positive")

    @property
    def name(self) -> str:
        """Stable action name, used in telemetry"""
        return self.id.name

    @property
    def is_walk(self) -> bool:
        """True for the four elementary walking actions"""
        return self.id in WALK_IDS


ACTIONS: Tuple[ActionSpec, ...] = (
    ActionSpec(ActionId.WALK_LEFT, Control(CONTROL_WALK_LEFT)),
    ActionSpec(ActionId.WALK_RIGHT, Control(CONTROL_WALK_RIGHT)),
    ActionSpec(ActionId.WALK_DOWN, Control(CONTROL_WALK_DOWN)),
    ActionSpec(ActionId.WALK_UP, Control(CONTROL_WALK_UP)),
    ActionSpec(ActionId.GO_TO_RESOURCE_1, Control(CONTROL_GO_TO_RESOURCE), resource=1),
    ActionSpec(ActionId.GO_TO_RESOURCE_2, Control(CONTROL_GO_TO_RESOURCE), resource=2),
    ActionSpec(ActionId.CONSUME_1, Control(CONTROL_CONSUME_1), resource=1),
    ActionSpec(ActionId.CONSUME_2, Control(CONTROL_CONSUME_2), resource=2),
    ActionSpec(ActionId.SLEEP, Control(CONTROL_SLEEP), min_duration_steps=SLEEP_MIN_STEPS),
    ActionSpec(ActionId.IDLE, Control(CONTROL_IDLE)),
)


def action_spec(action_id: ActionId) -> ActionSpec:
    """Look up the ActionSpec of an identifier"""
    return ACTIONS[int(action_id)]


def action_by_name(name: str) -> ActionSpec:
    """Look up the ActionSpec of a telemetry action name"""
    return action_spec(ActionId[name])


@dataclass(frozen=True)
class WorldState:
    """
    Full agent state: internal deviations, planar position, simulated
    clock and the steps left in a sleep bout.
    """

    delta: Tuple[float, ...]
    position: Tuple[float, ...]
    clock: float = 0.0
    sleep_steps_remaining: int = 0
    setpoint: SetPoint = field(default_factory=SetPoint)

    def __post_init__(self):
        object.__setattr__(self, "delta", _finite_tuple(self.delta, N_INTERNAL, "delta"))
        object.__setattr__(
            self, "position", _finite_tuple(self.position, N_EXTERNAL, "position")
        )
        require(self.clock >= 0.0, f"clock must be nonnegative, got {self.clock}")
        require(
            self.sleep_steps_remaining >= 0,
            f"sleep_steps_remaining must be nonnegative, got {self.sleep_steps_remaining}",
        )

    @property
    def levels(self) -> Tuple[float, ...]:
        """Raw internal levels x = delta + x*"""
        return tuple(levels_from_deviation(self.delta, self.setpoint))

    @property
    def muscular_fatigue(self) -> float:
        """f_m level"""
        return self.delta[2] + self.setpoint.values[2]

    @property
    def sleep_fatigue(self) -> float:
        """f_s level"""
        return self.delta[3] + self.setpoint.values[3]

    def zeta(self) -> np.ndarray:
        """The 6 component state vector (deviations then position)"""
        return np.array(self.delta + self.position, dtype=np.float64)

    def evolve(self, **changes) -> "WorldState":
        """Return a copy with some fields replaced"""
        return replace(self, **changes)


def deviation_from_levels(levels: Sequence[float], setpoint: SetPoint) -> np.ndarray:
    """
    Deviation delta = levels - x*, componentwise.

    >>> deviation_from_levels([0.1, 0.1, 0.1, 0.1], SetPoint())
    array([-0.9, -1.9,  0.1,  0.1])
    """
    levels = np.asarray(_finite_tuple(levels, N_INTERNAL, "levels"), dtype=np.float64)
    return levels - setpoint.as_array()


def levels_from_deviation(delta: Sequence[float], setpoint: SetPoint) -> np.ndarray:
    """Raw levels x = delta + x*, componentwise"""
    delta = np.asarray(_finite_tuple(delta, N_INTERNAL, "delta"), dtype=np.float64)
    return delta + setpoint.as_array()


def initial_state(
    setpoint: SetPoint = SetPoint(),
    levels: Sequence[float] = DEFAULT_INITIAL_LEVELS,
    position: Sequence[float] = DEFAULT_INITIAL_POSITION,
) -> WorldState:
    """
    Starting state: minimal resource levels and small nonzero fatigues,
    since multiplicative body dynamics cannot grow a level that is 0.
    """
    delta = deviation_from_levels(levels, setpoint)
    return WorldState(
        delta=tuple(delta.tolist()), position=tuple(position), setpoint=setpoint
    )
