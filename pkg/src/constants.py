"""
constants.py

Some constants for the program

Numeric defaults come from the parameter tables of the experiment:
the environment (arena, body, action controls and constraints) and
the algorithm (time step, exploration, discount, target rate and the
neural network hyperparameters).

Controls are 6 components wide, laid out as
(resource 1, resource 2, muscular fatigue, sleep fatigue, x, y).
"""

HRRL_VERSION = "0.1.0"
HRRL_CSV_SCHEMA = "# ctcs-hrrl v1"
HRRL_CHECKPOINT_FORMAT = 1
HRRL_CLI_DESCRIPTION = "".join(
    [
        "A continuous-time, continuous-space homeostatic reinforcement learning ",
        "engine. An agent in a 2D world with two resources learns, from zero ",
        "knowledge, a policy that keeps its internal state near its set points. ",
        "The script can also verify the analytical properties of the drive ",
        "and reward functions.",
    ]
)

################
# Body and world
################
N_INTERNAL = 4
N_EXTERNAL = 2
N_STATE = N_INTERNAL + N_EXTERNAL

DEFAULT_SETPOINT = (1.0, 2.0, 0.0, 0.0)
DEFAULT_INITIAL_LEVELS = (0.1, 0.1, 0.1, 0.1)
DEFAULT_INITIAL_POSITION = (0.5, 0.5)
DEFAULT_C = (-0.05, -0.05, -0.008, 0.0005)
DEFAULT_DT = 0.01
LEVEL_FLOOR = 1e-3

DEFAULT_ARENA_SIDE = 1.0
DEFAULT_RESOURCE_RADIUS = 0.3
DEFAULT_RESOURCE_CENTERS = ((0.25, 0.75), (0.75, 0.25))
DEFAULT_VISION_RANGE = 4.0

WALK_FATIGUE_MAX = 6.0
SLEEP_ELIGIBLE_MIN = 1.0
SLEEP_FORCED_MIN = 10.0
CONSUME_LEVEL_MAX = 8.0
SLEEP_MIN_STEPS = 1000

GO_TO_STEP = 0.1

##########
# Controls
##########
CONTROL_WALK_LEFT = (0.0, 0.0, 0.01, 0.0, -0.1, 0.0)
CONTROL_WALK_RIGHT = (0.0, 0.0, 0.01, 0.0, 0.1, 0.0)
CONTROL_WALK_DOWN = (0.0, 0.0, 0.01, 0.0, 0.0, -0.1)
CONTROL_WALK_UP = (0.0, 0.0, 0.01, 0.0, 0.0, 0.1)
CONTROL_GO_TO_RESOURCE = (0.0, 0.0, 0.01, 0.0, 0.0, 0.0)
CONTROL_CONSUME_1 = (0.1, 0.0, 0.0, 0.0, 0.0, 0.0)
CONTROL_CONSUME_2 = (0.0, 0.1, 0.0, 0.0, 0.0, 0.0)
CONTROL_SLEEP = (0.0, 0.0, 0.0, -0.001, 0.0, 0.0)
CONTROL_IDLE = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

##################
# Drive and reward
##################
DRIVE_EPSILON = 1e-6
DRIVE_MASK = (True, True, False, False)

###########
# Algorithm
###########
EPSILON_EXPLORE = 0.3
GAMMA = 0.99
TAU = 0.001
DEFAULT_ITERATIONS = 14000
HIDDEN_UNITS = 128
DROPOUT_RATE = 0.15
LEARNING_RATE = 0.001
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
GRAD_CLIP = 10.0
TARGET_MODES = ("semi_gradient", "none")

##############
# Verification
##############
SIGN_TOLERANCE = 1e-6
SIGN_BOUNDARY_WIDTH = 1e-3
LEMMA1_TRUNCATION = 1e-6
