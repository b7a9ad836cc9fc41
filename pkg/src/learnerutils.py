"""
learnerutils.py

The learning loop of the agent. At each step it:

(1) selects an action, at random with probability epsilon, otherwise the
    argmin over admissible actions of the model-based HJB value
    d(zeta + f_hat(zeta, u) dt) + dJ/dzeta(zeta) . f_hat(zeta, u);
(2) executes it in the environment;
(3) regresses f_hat on the observed transition (L_f);
(4) moves J_hat towards the HJB fixed point (L_J) and lets the target
    copy of J_hat track it with rate tau.
"""

####################
# Standard libraries
####################
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

#######################
# Third party libraries
#######################
import numpy as np

#################
# Local libraries
#################
from checkpointutils import Checkpoint, load_checkpoint, save_checkpoint
from constants import (
    DEFAULT_DT,
    DEFAULT_ITERATIONS,
    DROPOUT_RATE,
    EPSILON_EXPLORE,
    GAMMA,
    GRAD_CLIP,
    HIDDEN_UNITS,
    LEARNING_RATE,
    N_STATE,
    TARGET_MODES,
    TAU,
)
from contracts import require
from driveutils import DriveConfig, drive, drive_batch, reward_discrete
from envutils import Environment
from logutils import verbose_log
from neuralutils import AdamState, Approximator, adam_step, clip_by_global_norm
from stateutils import ActionSpec, Control, WorldState
from telemetryutils import EpisodeLog, StepRecord


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters of the learning loop"""

    epsilon_explore: float = EPSILON_EXPLORE
    gamma: float = GAMMA
    tau: float = TAU
    dt: float = DEFAULT_DT
    iterations: int = DEFAULT_ITERATIONS
    learning_rate: float = LEARNING_RATE
    hidden_units: int = HIDDEN_UNITS
    dropout_rate: float = DROPOUT_RATE
    target_mode: str = "semi_gradient"
    grad_clip: float = GRAD_CLIP
    log_every: int = 1000

    def __post_init__(self):
        require(0.0 <= self.epsilon_explore <= 1.0, "epsilon_explore must be in [0, 1]")
        require(0.0 < self.gamma < 1.0, "gamma must be in (0, 1)")
        require(0.0 < self.tau <= 1.0, "tau must be in (0, 1]")
        require(self.dt > 0.0, "dt must be positive")
        require(self.iterations >= 0, "iterations must be nonnegative")
        require(self.target_mode in TARGET_MODES, f"target_mode must be one of {TARGET_MODES}")
        require(self.grad_clip >= 0.0, "grad_clip must be nonnegative (0 disables)")


@dataclass
class LearnerState:
    """Both approximators, the target copy, their optimizers and the exploration stream"""

    f_hat: Approximator
    j_hat: Approximator
    j_target: Approximator
    f_opt: AdamState
    j_opt: AdamState
    explore_rng: np.random.Generator

    def __post_init__(self):
        require(
            self.j_target.layer_sizes == self.j_hat.layer_sizes,
            "target network must mirror the deviation network",
        )


def init_learner(cfg: LearnerConfig, seed: int) -> LearnerState:
    """
    Randomly initialize f_hat (12 -> 6) and J_hat (6 -> 1). Every random
    stream is spawned from `seed`, so a seed fixes the whole run.
    """
    f_init, j_init, f_drop, j_drop, explore = np.random.SeedSequence(seed).spawn(5)
    f_hat = Approximator.mlp(
        2 * N_STATE,
        N_STATE,
        hidden=cfg.hidden_units,
        dropout_rate=cfg.dropout_rate,
        init_rng=np.random.default_rng(f_init),
        dropout_rng=np.random.default_rng(f_drop),
    )
    j_hat = Approximator.mlp(
        N_STATE,
        1,
        hidden=cfg.hidden_units,
        dropout_rate=cfg.dropout_rate,
        init_rng=np.random.default_rng(j_init),
        dropout_rng=np.random.default_rng(j_drop),
    )
    return LearnerState(
        f_hat=f_hat,
        j_hat=j_hat,
        j_target=j_hat.copy(),
        f_opt=AdamState.zeros_like(f_hat.parameters(), learning_rate=cfg.learning_rate),
        j_opt=AdamState.zeros_like(j_hat.parameters(), learning_rate=cfg.learning_rate),
        explore_rng=np.random.default_rng(explore),
    )


def _model_inputs(zeta: np.ndarray, controls: np.ndarray) -> np.ndarray:
    controls = np.atleast_2d(controls)
    return np.hstack([np.broadcast_to(zeta, (controls.shape[0], zeta.size)), controls])


def hjb_values(
    zeta: np.ndarray,
    controls: np.ndarray,
    learner: LearnerState,
    cfg: LearnerConfig,
    drive_cfg: DriveConfig = DriveConfig(),
) -> np.ndarray:
    """
    HJB value of every control row, without dropout:
    d(delta part of zeta + f_hat dt) + grad J_hat(zeta) . f_hat
    """
    predicted = learner.f_hat.forward(_model_inputs(zeta, controls), train=False)
    gradient = learner.j_hat.grad_input(zeta)
    next_delta = zeta[:4] + predicted[:, :4] * cfg.dt
    return drive_batch(next_delta, drive_cfg) + predicted @ gradient


def hjb_action_value(
    state: WorldState,
    action: ActionSpec,
    learner: LearnerState,
    cfg: LearnerConfig,
    env: Environment = Environment(),
    drive_cfg: DriveConfig = DriveConfig(),
) -> float:
    """HJB value of one action, using the control it would apply in `state`"""
    control = env.applied_control(state, action).as_array()
    return float(hjb_values(state.zeta(), control, learner, cfg, drive_cfg)[0])


def select_action(
    state: WorldState,
    learner: LearnerState,
    cfg: LearnerConfig,
    admissible: List[ActionSpec],
    env: Environment = Environment(),
    drive_cfg: DriveConfig = DriveConfig(),
) -> Tuple[ActionSpec, bool]:
    """
    Epsilon-greedy choice among `admissible`. Returns (action, explored).
    Ties of the HJB argmin go to the first action in action-id order.
    """
    require(len(admissible) > 0, "no admissible action")
    admissible = sorted(admissible, key=lambda a: int(a.id))
    if learner.explore_rng.random() < cfg.epsilon_explore:
        return admissible[int(learner.explore_rng.integers(len(admissible)))], True
    if len(admissible) == 1:
        return admissible[0], False
    controls = np.vstack([env.applied_control(state, a).as_array() for a in admissible])
    values = hjb_values(state.zeta(), controls, learner, cfg, drive_cfg)
    return admissible[int(np.argmin(values))], False


def update_transition(
    learner: LearnerState,
    zeta_k: np.ndarray,
    u_k: np.ndarray,
    zeta_next: np.ndarray,
    cfg: LearnerConfig,
) -> float:
    """
    One Adam step on L_f = |zeta_next - zeta_k - f_hat(zeta_k, u_k) dt|^2.
    Returns the loss before the update.
    """
    predicted = learner.f_hat.forward(np.concatenate([zeta_k, u_k]), train=True)
    residual = zeta_next - zeta_k - predicted * cfg.dt
    loss = float(residual @ residual)
    grads = learner.f_hat.grad_params(-2.0 * cfg.dt * residual)
    grads, _ = clip_by_global_norm(grads, cfg.grad_clip)
    adam_step(learner.f_hat.parameters(), grads, learner.f_opt)
    return loss


def deviation_residual(
    next_drive: float, gradient: np.ndarray, predicted: np.ndarray, deviation: float, gamma: float
) -> float:
    """d(zeta_next) + dJ/dzeta . f_hat + ln(gamma) J(zeta_k)"""
    return next_drive + float(np.dot(gradient, predicted)) + math.log(gamma) * deviation


def update_deviation(
    learner: LearnerState,
    zeta_k: np.ndarray,
    zeta_next: np.ndarray,
    u_k: np.ndarray,
    cfg: LearnerConfig,
    drive_cfg: DriveConfig = DriveConfig(),
) -> float:
    """
    One Adam step on L_J = residual^2. Afterwards the target tracks J_hat
    with rate tau. Returns the loss before the update.

    semi_gradient: the dJ/dzeta . f_hat term comes from the target copy
    and is held constant; only ln(gamma) J_hat(zeta_k) is differentiated.
    none: both terms come from J_hat and both are differentiated, the
    gradient term through `Approximator.directional_grad_params`.
    """
    predicted = learner.f_hat.forward(np.concatenate([zeta_k, u_k]), train=False)
    if cfg.target_mode == "semi_gradient":
        gradient = learner.j_target.grad_input(zeta_k)
        mixed = None
    else:
        gradient = learner.j_hat.grad_input(zeta_k)
        _, mixed = learner.j_hat.directional_grad_params(zeta_k, predicted)
    deviation = float(learner.j_hat.forward(zeta_k, train=True)[0])

    residual = deviation_residual(
        drive(zeta_next, drive_cfg), gradient, predicted, deviation, cfg.gamma
    )
    grads = learner.j_hat.grad_params(np.array([2.0 * residual * math.log(cfg.gamma)]))
    if mixed is not None:
        grads = [g + 2.0 * residual * m for g, m in zip(grads, mixed)]
    grads, _ = clip_by_global_norm(grads, cfg.grad_clip)
    adam_step(learner.j_hat.parameters(), grads, learner.j_opt)
    learner.j_target.soft_update_from(learner.j_hat, cfg.tau)
    return residual * residual


###################
# Checkpoint bridge
###################
def save_learner_checkpoint(path, learner: LearnerState, state: WorldState, iteration: int, **kwargs):
    """Bundle the learner and world state into a resumable checkpoint"""
    save_checkpoint(
        path=path,
        nets={"f_hat": learner.f_hat, "j_hat": learner.j_hat, "j_target": learner.j_target},
        optimizers={"f_hat": learner.f_opt, "j_hat": learner.j_opt},
        rngs={"explore": learner.explore_rng},
        state=state,
        iteration=iteration,
        metadata=kwargs.get("metadata", {}),
        verbose=kwargs.get("verbose"),
    )


def learner_from_checkpoint(checkpoint: Checkpoint) -> LearnerState:
    """Rebuild a LearnerState from a loaded checkpoint"""
    return LearnerState(
        f_hat=checkpoint.nets["f_hat"],
        j_hat=checkpoint.nets["j_hat"],
        j_target=checkpoint.nets["j_target"],
        f_opt=checkpoint.optimizers["f_hat"],
        j_opt=checkpoint.optimizers["j_hat"],
        explore_rng=checkpoint.rngs["explore"],
    )


def load_learner_checkpoint(path) -> Tuple[LearnerState, WorldState, int, dict]:
    """(learner, world state, completed iterations, metadata) of a checkpoint"""
    checkpoint = load_checkpoint(path)
    return (
        learner_from_checkpoint(checkpoint),
        checkpoint.state,
        checkpoint.iteration,
        checkpoint.metadata,
    )


##########
# Run loop
##########
class RunAbortedError(RuntimeError):
    """The telemetry sink failed; `checkpoint_path` resumes the run"""

    def __init__(self, message: str, checkpoint_path, iteration: int):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path
        self.iteration = iteration


@dataclass
class RunResult:
    """Final learner and world state, the telemetry and the breach count"""

    learner: LearnerState
    state: WorldState
    log: EpisodeLog
    violations: int = 0
    explored: int = field(default=0)


def run(
    learner: LearnerState,
    env: Environment,
    cfg: LearnerConfig,
    state: WorldState,
    **kwargs,
) -> RunResult:
    """
    Run iterations start_iteration+1 .. cfg.iterations of
    select -> step -> update_transition -> update_deviation, recording
    one StepRecord per step.

    Kwargs:
        :param drive_cfg
            DriveConfig of the drive (default mask: resources only)
        :param log
            EpisodeLog to append to (a new one otherwise)
        :param start_iteration
            Iterations already completed (resumed runs)
        :param sink
            Callable receiving every StepRecord; an OSError from it aborts
            the run with a checkpoint
        :param checkpoint_path
            Where to save the abort checkpoint
        :param verbose
            Apply verbose or not
    """
    drive_cfg: DriveConfig = kwargs.get("drive_cfg") or DriveConfig()
    start_iteration: int = kwargs.get("start_iteration", 0)
    log: Optional[EpisodeLog] = kwargs.get("log")
    if log is None:
        log = EpisodeLog(first_index=start_iteration + 1)
    sink: Optional[Callable[[StepRecord], None]] = kwargs.get("sink")
    checkpoint_path = kwargs.get("checkpoint_path", "aborted-checkpoint.npz")
    verbose = kwargs.get("verbose")

    violations = 0
    explored_count = 0
    for k in range(start_iteration + 1, cfg.iterations + 1):
        admissible = env.admissible_actions(state)
        action, explored = select_action(state, learner, cfg, admissible, env, drive_cfg)
        control: Control = env.applied_control(state, action)
        next_state = env.step(state, action)
        violations += env.step_violations(state, action, next_state)
        explored_count += int(explored)

        zeta_k, zeta_next, u_k = state.zeta(), next_state.zeta(), control.as_array()
        loss_f = update_transition(learner, zeta_k, u_k, zeta_next, cfg)
        loss_j = update_deviation(learner, zeta_k, zeta_next, u_k, cfg, drive_cfg)

        levels = next_state.levels
        step_record = StepRecord(
            k=k,
            clock=next_state.clock,
            level_1=levels[0],
            level_2=levels[1],
            f_m=levels[2],
            f_s=levels[3],
            drive=drive(next_state.delta, drive_cfg),
            reward=reward_discrete(state.delta, next_state.delta, cfg.dt, drive_cfg),
            loss_f=loss_f,
            loss_j=loss_j,
            action=action.name,
            explored=explored,
            pos_x=next_state.position[0],
            pos_y=next_state.position[1],
        )
        log.record(step_record)
        state = next_state

        if sink is not None:
            try:
                sink(step_record)
            except OSError as exc:
                save_learner_checkpoint(
                    checkpoint_path, learner, state, k, metadata=log.metadata, verbose=verbose
                )
                raise RunAbortedError(
                    f"telemetry sink failed at step {k}; resume from {checkpoint_path}",
                    checkpoint_path,
                    k,
                ) from exc

        if verbose and cfg.log_every and k % cfg.log_every == 0:
            verbose_log(
                f"step {k}: drive={step_record.drive:.4f} "
                f"L_f={loss_f:.3e} L_J={loss_j:.3e} "
                f"explored={explored_count / (k - start_iteration):.3f}"
            )

    return RunResult(learner, state, log, violations, explored_count)
