"""
configutils.py

Run configuration: one flat dataclass with a scalar field per parameter,
serialized as `key = value` lines. Every field carries the provenance of
its default, printed as a comment by `dump_config`.

Example file:

```
# discount factor of the deviation function
gamma = 0.99
seed = 7
```
"""

####################
# Standard libraries
####################
import dataclasses
import math
from dataclasses import dataclass, fields
from typing import Callable, Dict, Mapping, Optional, Tuple

#################
# Local libraries
#################
import constants as K
from contracts import ContractViolationError
from driveutils import DriveConfig
from envutils import Arena, BodyParams, Environment, Resource, Thresholds
from hashutils import hash_text
from learnerutils import LearnerConfig
from stateutils import SetPoint, WorldState, initial_state

# run plumbing that does not change the experiment
HASH_EXCLUDED = frozenset(("seed", "out_dir", "plot_stride", "log_every"))


class ConfigError(ValueError):
    """A configuration problem, located by line (when read from text) and key"""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.reason = message
        self.line = line
        self.key = key


def _param(default, doc: str):
    return dataclasses.field(default=default, metadata={"doc": doc})


@dataclass(frozen=True)
class RunConfig:
    """Every parameter of a run, with its default"""

    # run
    seed: int = _param(0, "master seed; every random stream is spawned from it")
    iterations: int = _param(K.DEFAULT_ITERATIONS, "iterations K (runs of 6000, 8000, 10000 and 14000 in the experiment)")
    out_dir: str = _param("runs", "output directory; each run gets a timestamped subdirectory")
    plot_stride: int = _param(1, "keep one record every plot_stride steps in the SVG plots")
    log_every: int = _param(1000, "verbose progress line every log_every steps")

    # body
    dt: float = _param(K.DEFAULT_DT, "time step dt: 0.01")
    c_1: float = _param(K.DEFAULT_C[0], "self-regulation constant of resource 1: -0.05")
    c_2: float = _param(K.DEFAULT_C[1], "self-regulation constant of resource 2: -0.05")
    c_3: float = _param(K.DEFAULT_C[2], "self-regulation constant of muscular fatigue: -0.008")
    c_4: float = _param(K.DEFAULT_C[3], "self-regulation constant of sleep fatigue: 0.0005")
    setpoint_1: float = _param(K.DEFAULT_SETPOINT[0], "homeostatic set point of resource 1: 1")
    setpoint_2: float = _param(K.DEFAULT_SETPOINT[1], "homeostatic set point of resource 2: 2")
    setpoint_3: float = _param(K.DEFAULT_SETPOINT[2], "homeostatic set point of muscular fatigue: 0")
    setpoint_4: float = _param(K.DEFAULT_SETPOINT[3], "homeostatic set point of sleep fatigue: 0")
    initial_level_1: float = _param(K.DEFAULT_INITIAL_LEVELS[0], "starting level of resource 1 (very minimal)")
    initial_level_2: float = _param(K.DEFAULT_INITIAL_LEVELS[1], "starting level of resource 2 (very minimal)")
    initial_level_3: float = _param(K.DEFAULT_INITIAL_LEVELS[2], "starting muscular fatigue (nonzero, dynamics are multiplicative)")
    initial_level_4: float = _param(K.DEFAULT_INITIAL_LEVELS[3], "starting sleep fatigue (nonzero, dynamics are multiplicative)")
    initial_x: float = _param(K.DEFAULT_INITIAL_POSITION[0], "starting x position")
    initial_y: float = _param(K.DEFAULT_INITIAL_POSITION[1], "starting y position")

    # arena
    arena_side: float = _param(K.DEFAULT_ARENA_SIDE, "minimum length between two corners of the environment: 1 unit")
    resource_radius: float = _param(K.DEFAULT_RESOURCE_RADIUS, "radius of the circles within which a resource can be consumed: 0.3 unit")
    resource1_x: float = _param(K.DEFAULT_RESOURCE_CENTERS[0][0], "resource 1 center x (layout choice)")
    resource1_y: float = _param(K.DEFAULT_RESOURCE_CENTERS[0][1], "resource 1 center y (layout choice)")
    resource2_x: float = _param(K.DEFAULT_RESOURCE_CENTERS[1][0], "resource 2 center x (layout choice)")
    resource2_y: float = _param(K.DEFAULT_RESOURCE_CENTERS[1][1], "resource 2 center y (layout choice)")
    vision_range: float = _param(K.DEFAULT_VISION_RANGE, "go-to-resource needs the resource at a distance of less than 4")

    # constraints
    walk_fatigue_max: float = _param(K.WALK_FATIGUE_MAX, "walking only if f_m <= 6")
    sleep_eligible_min: float = _param(K.SLEEP_ELIGIBLE_MIN, "sleeping only if f_s >= 1")
    sleep_forced_min: float = _param(K.SLEEP_FORCED_MIN, "if f_s >= 10 the only possible action is to sleep")
    consume_level_max: float = _param(K.CONSUME_LEVEL_MAX, "consuming only if the resource level <= 8")
    sleep_min_steps: int = _param(K.SLEEP_MIN_STEPS, "minimum sleep: 1000 times the elementary time")

    # drive
    drive_epsilon: float = _param(K.DRIVE_EPSILON, "regularizer of the drive sqrt(eps + delta^T delta)")
    drive_mask_1: bool = _param(K.DRIVE_MASK[0], "resource 1 enters the drive")
    drive_mask_2: bool = _param(K.DRIVE_MASK[1], "resource 2 enters the drive")
    drive_mask_3: bool = _param(K.DRIVE_MASK[2], "muscular fatigue enters the drive (homeostasis depends on resources only)")
    drive_mask_4: bool = _param(K.DRIVE_MASK[3], "sleep fatigue enters the drive (homeostasis depends on resources only)")

    # algorithm
    epsilon_explore: float = _param(K.EPSILON_EXPLORE, "probability of selecting a random action epsilon: 0.3")
    gamma: float = _param(K.GAMMA, "discount factor gamma: 0.99")
    tau: float = _param(K.TAU, "rate of the target function tau: 0.001")
    learning_rate: float = _param(K.LEARNING_RATE, "learning rate: 0.001 (Adam with default parameters)")
    hidden_units: int = _param(K.HIDDEN_UNITS, "neurons in each of the 2 hidden layers: 128")
    dropout_rate: float = _param(K.DROPOUT_RATE, "dropout rate: 0.15")
    target_mode: str = _param("semi_gradient", "semi_gradient (target net in the gradient term) or none")
    grad_clip: float = _param(K.GRAD_CLIP, "global gradient norm clip, 0 disables")

    def setpoint(self) -> SetPoint:
        """x*"""
        return SetPoint((self.setpoint_1, self.setpoint_2, self.setpoint_3, self.setpoint_4))

    def body_params(self) -> BodyParams:
        """c, x* and dt"""
        return BodyParams(c=(self.c_1, self.c_2, self.c_3, self.c_4), setpoint=self.setpoint(), dt=self.dt)

    def arena(self) -> Arena:
        """Arena with both resources"""
        return Arena(
            side=self.arena_side,
            resources=(
                Resource((self.resource1_x, self.resource1_y), self.resource_radius, 1),
                Resource((self.resource2_x, self.resource2_y), self.resource_radius, 2),
            ),
            vision_range=self.vision_range,
        )

    def thresholds(self) -> Thresholds:
        """Action gates"""
        return Thresholds(
            walk_fatigue_max=self.walk_fatigue_max,
            sleep_eligible_min=self.sleep_eligible_min,
            sleep_forced_min=self.sleep_forced_min,
            consume_level_max=self.consume_level_max,
            sleep_min_steps=self.sleep_min_steps,
        )

    def environment(self) -> Environment:
        """Body, arena and thresholds bundled"""
        return Environment(self.body_params(), self.arena(), self.thresholds())

    def drive_config(self) -> DriveConfig:
        """Drive regularizer and mask"""
        return DriveConfig(
            epsilon_reg=self.drive_epsilon,
            mask=(self.drive_mask_1, self.drive_mask_2, self.drive_mask_3, self.drive_mask_4),
        )

    def learner_config(self) -> LearnerConfig:
        """Learning loop hyperparameters"""
        return LearnerConfig(
            epsilon_explore=self.epsilon_explore,
            gamma=self.gamma,
            tau=self.tau,
            dt=self.dt,
            iterations=self.iterations,
            learning_rate=self.learning_rate,
            hidden_units=self.hidden_units,
            dropout_rate=self.dropout_rate,
            target_mode=self.target_mode,
            grad_clip=self.grad_clip,
            log_every=self.log_every,
        )

    def initial_state(self) -> WorldState:
        """Starting world state"""
        return initial_state(
            self.setpoint(),
            levels=(self.initial_level_1, self.initial_level_2, self.initial_level_3, self.initial_level_4),
            position=(self.initial_x, self.initial_y),
        )

    def validate(self) -> "RunConfig":
        """
        Build every component once; raise ConfigError naming the field of
        the first bad value
        """
        for name, minimum in (("seed", 0), ("plot_stride", 1), ("log_every", 1), ("hidden_units", 1)):
            if getattr(self, name) < minimum:
                raise ConfigError(f"must be >= {minimum}, got {getattr(self, name)}", key=name)
        if not self.learning_rate > 0.0:
            raise ConfigError(f"must be > 0, got {self.learning_rate}", key="learning_rate")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"must be in [0, 1), got {self.dropout_rate}", key="dropout_rate")
        for build, keys in COMPONENTS:
            try:
                build(self)
            except ContractViolationError as exc:
                raise ConfigError(str(exc), key=_culprit(self, build, keys)) from exc
        arena = self.arena()
        for name, value in (("initial_x", self.initial_x), ("initial_y", self.initial_y)):
            if not 0.0 <= value <= arena.side:
                raise ConfigError(f"starting position is outside the arena (side {arena.side})", key=name)
        return self


# component builders and the fields each one reads
COMPONENTS: Tuple[Tuple[Callable[[RunConfig], object], Tuple[str, ...]], ...] = (
    (RunConfig.body_params, ("dt", "c_1", "c_2", "c_3", "c_4", "setpoint_1", "setpoint_2", "setpoint_3", "setpoint_4")),
    (
        RunConfig.arena,
        ("arena_side", "resource_radius", "resource1_x", "resource1_y", "resource2_x", "resource2_y", "vision_range"),
    ),
    (
        RunConfig.thresholds,
        ("walk_fatigue_max", "sleep_eligible_min", "sleep_forced_min", "consume_level_max", "sleep_min_steps"),
    ),
    (RunConfig.drive_config, ("drive_epsilon", "drive_mask_1", "drive_mask_2", "drive_mask_3", "drive_mask_4")),
    (
        RunConfig.learner_config,
        ("epsilon_explore", "gamma", "tau", "dt", "iterations", "learning_rate", "target_mode", "grad_clip"),
    ),
    (
        RunConfig.initial_state,
        ("initial_level_1", "initial_level_2", "initial_level_3", "initial_level_4", "initial_x", "initial_y"),
    ),
)


def _culprit(cfg: RunConfig, build: Callable[[RunConfig], object], keys: Tuple[str, ...]) -> str:
    """The first changed field whose default value makes `build` succeed"""
    defaults = RunConfig()
    changed = [key for key in keys if getattr(cfg, key) != getattr(defaults, key)]
    for key in changed:
        try:
            build(dataclasses.replace(cfg, **{key: getattr(defaults, key)}))
        except ContractViolationError:
            continue
        return key
    return changed[0] if changed else keys[0]


FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(name: str, text: str, line: Optional[int] = None):
    kind = FIELDS[name].type
    text = text.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("true", "yes", "1"):
                return True
            if lowered in ("false", "no", "0"):
                return False
            raise ValueError(f"expected true or false, got {text!r}")
        if kind is int:
            return int(text)
        if kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(f"expected a finite number, got {text!r}")
            return value
        return text
    except ValueError as exc:
        raise ConfigError(str(exc), line=line, key=name) from exc


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> RunConfig:
    """
    Parse `key = value` lines; `#` starts a comment line. Unknown,
    duplicate or malformed keys raise ConfigError with line and key.
    """
    values: Dict[str, object] = {}
    lines: Dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, separator, value = line.partition("=")
        key = key.strip()
        if not separator or not key:
            raise ConfigError(f"expected 'key = value', got {raw!r}", line=number, key=key or None)
        if key not in FIELDS:
            raise ConfigError("unknown key", line=number, key=key)
        if key in values:
            raise ConfigError("duplicate key", line=number, key=key)
        values[key] = _convert(key, value, number)
        lines[key] = number
    try:
        return RunConfig(**values).validate()
    except ConfigError as exc:
        if exc.key not in lines:
            raise
        raise ConfigError(exc.reason, line=lines[exc.key], key=exc.key) from exc


def load_config(path) -> RunConfig:
    """Read and parse a configuration file"""
    try:
        with open(path, mode="r", encoding="utf-8") as config_file:
            text = config_file.read()
    except OSError as exc:
        raise OSError(f"Unable to read config file: {path}") from exc
    return parse_config(text)


def apply_overrides(cfg: RunConfig, overrides: Mapping[str, object]) -> RunConfig:
    """
    Replace fields from a mapping; string values are converted like file
    values, others are taken as they are.
    """
    changes = {}
    for key, value in overrides.items():
        if key not in FIELDS:
            raise ConfigError("unknown key", key=key)
        changes[key] = _convert(key, value) if isinstance(value, str) else value
    return dataclasses.replace(cfg, **changes).validate()


def dump_config(cfg: RunConfig = RunConfig()) -> str:
    """Every field with its provenance comment, parseable by `parse_config`"""
    lines = [f"# ctcs-hrrl {K.HRRL_VERSION} run configuration", ""]
    for name, spec in FIELDS.items():
        lines.append(f"# {spec.metadata['doc']}")
        lines.append(f"{name} = {_format(getattr(cfg, name))}")
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: RunConfig) -> str:
    """sha256 of the canonical dump of the experiment fields"""
    canonical = "\n".join(
        f"{name} = {_format(getattr(cfg, name))}" for name in FIELDS if name not in HASH_EXCLUDED
    )
    return hash_text(canonical)
