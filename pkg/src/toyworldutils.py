"""
toyworldutils.py

A one dimensional, two action world with known dynamics, used as ground
truth for the HJB machinery of the learner, which is run here with the
true dynamics in place of f_hat and J* in place of J_hat:

    dx/dt = u,  u in {-1, +1},  x in [-2, 2],  d(x) = sqrt(eps + x^2)

The optimal deviation function J* is computed by value iteration on a
grid whose spacing equals the time step, so each transition lands on a
neighbouring node.
"""

####################
# Standard libraries
####################
import math
from dataclasses import dataclass
from typing import Tuple

#######################
# Third party libraries
#######################
import numpy as np

#################
# Local libraries
#################
from constants import DRIVE_EPSILON, N_STATE
from contracts import require
from driveutils import DriveConfig
from learnerutils import LearnerConfig, LearnerState, hjb_values, select_action
from logutils import verbose_log
from stateutils import ActionId, ActionSpec, Control, WorldState

TOY_CONTROLS = (-1.0, 1.0)


@dataclass(frozen=True)
class ToyWorld:
    """Grid and discount of the toy problem"""

    lower: float = -2.0
    upper: float = 2.0
    step: float = 0.005
    gamma: float = 0.5
    epsilon_reg: float = DRIVE_EPSILON

    def __post_init__(self):
        require(self.upper > self.lower, "empty interval")
        require(self.step > 0.0, "step must be positive")
        require(0.0 < self.gamma < 1.0, "gamma must be in (0, 1)")
        nodes = (self.upper - self.lower) / self.step
        require(abs(nodes - round(nodes)) < 1e-9, "step must divide the interval")

    @property
    def grid(self) -> np.ndarray:
        """Grid nodes, lower and upper included"""
        count = int(round((self.upper - self.lower) / self.step)) + 1
        return self.lower + self.step * np.arange(count)

    def drive(self, x) -> np.ndarray:
        """sqrt(eps + x^2)"""
        x = np.asarray(x, dtype=np.float64)
        return np.sqrt(self.epsilon_reg + x * x)

    def coarsened(self) -> "ToyWorld":
        """Same problem with twice the step"""
        return ToyWorld(self.lower, self.upper, 2.0 * self.step, self.gamma, self.epsilon_reg)


def value_iteration(world: ToyWorld, tol: float = 1e-12, max_sweeps: int = 200_000, **kwargs) -> np.ndarray:
    """
    J*_i = step d_i + gamma^step min(J*_{i-1}, J*_{i+1}); the end nodes
    only see their interior neighbour.

    Kwargs:
        :param verbose
            Apply verbose or not
    """
    verbose = kwargs.get("verbose")
    cost = world.step * world.drive(world.grid)
    discount = world.gamma**world.step
    values = cost / (1.0 - discount)
    for sweep in range(1, max_sweeps + 1):
        neighbours = np.empty_like(values)
        neighbours[1:-1] = np.minimum(values[:-2], values[2:])
        neighbours[0] = values[1]
        neighbours[-1] = values[-2]
        updated = cost + discount * neighbours
        change = float(np.max(np.abs(updated - values)))
        values = updated
        if change < tol:
            if verbose:
                verbose_log(f"value iteration converged after {sweep} sweeps (step {world.step})")
            return values
    raise RuntimeError(f"value iteration did not converge in {max_sweeps} sweeps")


def discretization_error(world: ToyWorld, values: np.ndarray = None) -> float:
    """step + |ln gamma| max |J_step - J_2step| over the shared nodes"""
    fine = values if values is not None else value_iteration(world)
    coarse = value_iteration(world.coarsened())
    return world.step + abs(math.log(world.gamma)) * float(np.max(np.abs(fine[::2] - coarse)))


def hjb_residual(world: ToyWorld, values: np.ndarray, states) -> np.ndarray:
    """
    |-ln(gamma) J - min_u (d + J' u)| = |-ln(gamma) J - (d - |J'|)| at
    `states`, with J and J' linearly interpolated from the grid.
    """
    grid = world.grid
    slope = np.gradient(values, world.step)
    states = np.asarray(states, dtype=np.float64)
    value_at = np.interp(states, grid, values)
    slope_at = np.interp(states, grid, slope)
    hamiltonian = np.min(
        [world.drive(states) + slope_at * u for u in TOY_CONTROLS], axis=0
    )
    return np.abs(-math.log(world.gamma) * value_at - hamiltonian)


TOY_ACTIONS: Tuple[ActionSpec, ...] = tuple(
    ActionSpec(action_id, Control((u, 0.0, 0.0, 0.0, 0.0, 0.0)))
    for action_id, u in zip((ActionId.WALK_LEFT, ActionId.WALK_RIGHT), TOY_CONTROLS)
)


class ToyTransitionModel:
    """Stands in for f_hat: the exact toy rates, u on the first row"""

    layer_sizes = (2 * N_STATE, N_STATE)

    def forward(self, inputs, train: bool = False) -> np.ndarray:
        """Rates of every (zeta, u) row"""
        inputs = np.asarray(inputs, dtype=np.float64)
        rates = np.zeros(inputs.shape[:-1] + (N_STATE,))
        rates[..., 0] = inputs[..., N_STATE]
        return rates


class ToyDeviationModel:
    """Stands in for J_hat: grid values and slopes, interpolated on the first component"""

    layer_sizes = (N_STATE, 1)

    def __init__(self, world: ToyWorld, values: np.ndarray):
        self.grid = world.grid
        self.values = np.asarray(values, dtype=np.float64)
        self.slope = np.gradient(self.values, world.step)

    def forward(self, inputs, train: bool = False) -> np.ndarray:
        """J at the first component"""
        inputs = np.asarray(inputs, dtype=np.float64)
        return np.interp(inputs[..., :1], self.grid, self.values)

    def grad_input(self, inputs) -> np.ndarray:
        """J' on the first component, zero elsewhere"""
        inputs = np.asarray(inputs, dtype=np.float64)
        gradient = np.zeros_like(inputs)
        gradient[..., 0] = np.interp(inputs[..., 0], self.grid, self.slope)
        return gradient


class ToyPolicy:
    """
    The learner's epsilon = 0 selection rule (`select_action` over
    `hjb_values`) run with f_hat = the true toy dynamics and J_hat = the
    grid values. The optimizers are never touched by selection.
    """

    def __init__(self, world: ToyWorld, values: np.ndarray):
        self.world = world
        deviation = ToyDeviationModel(world, values)
        self.learner = LearnerState(
            f_hat=ToyTransitionModel(),
            j_hat=deviation,
            j_target=deviation,
            f_opt=None,
            j_opt=None,
            explore_rng=np.random.default_rng(0),
        )
        self.cfg = LearnerConfig(epsilon_explore=0.0, gamma=world.gamma, dt=world.step)
        self.drive_cfg = DriveConfig(epsilon_reg=world.epsilon_reg, mask=(True, False, False, False))
        self.controls = np.vstack([a.control.as_array() for a in TOY_ACTIONS])

    @staticmethod
    def state(x: float) -> WorldState:
        """World state carrying the toy coordinate as the first deviation"""
        return WorldState(delta=(float(x), 0.0, 0.0, 0.0), position=(0.0, 0.0))

    def action(self, x: float) -> float:
        """Control chosen at x; ties go to -1"""
        action, _ = select_action(
            self.state(x), self.learner, self.cfg, list(TOY_ACTIONS), drive_cfg=self.drive_cfg
        )
        return action.control.values[0]

    def residual(self, x: float) -> float:
        """|ln(gamma) J(x) + min over actions of the learner's HJB value|"""
        zeta = self.state(x).zeta()
        hamiltonian = float(np.min(hjb_values(zeta, self.controls, self.learner, self.cfg, self.drive_cfg)))
        deviation = float(self.learner.j_hat.forward(zeta)[0])
        return abs(math.log(self.world.gamma) * deviation + hamiltonian)


def greedy_action(world: ToyWorld, values: np.ndarray, x: float) -> float:
    """One selection of `ToyPolicy`"""
    return ToyPolicy(world, values).action(x)


def greedy_rollout(world: ToyWorld, values: np.ndarray, start: float, steps: int) -> Tuple[np.ndarray, float]:
    """
    Follow `ToyPolicy` for `steps` steps, staying on the interval.
    Returns the visited states and the discounted drive accumulated.
    """
    require(world.lower <= start <= world.upper, f"start {start} is outside the interval")
    policy = ToyPolicy(world, values)
    states = np.empty(steps + 1)
    states[0] = x = start
    cost = 0.0
    discount = world.gamma**world.step
    for k in range(steps):
        cost += discount**k * world.step * float(world.drive(x))
        u = policy.action(x)
        x = min(max(x + u * world.step, world.lower), world.upper)
        states[k + 1] = x
    return states, cost
