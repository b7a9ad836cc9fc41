"""
Shared fixtures. `src` is on the path through pyproject's pytest
`pythonpath`, so modules are imported by their bare names.
"""

import pytest

from envutils import Environment
from learnerutils import LearnerConfig
from stateutils import initial_state
from telemetryutils import StepRecord


@pytest.fixture
def env():
    """Default arena, body and thresholds"""
    return Environment()


@pytest.fixture
def start_state():
    """Default starting state: levels 0.1, center of the arena"""
    return initial_state()


@pytest.fixture
def small_cfg():
    """A learner small enough for quick loops"""
    return LearnerConfig(iterations=30, hidden_units=8)


@pytest.fixture
def make_record():
    """Factory of StepRecords with neutral values"""

    def _make(k: int, **changes) -> StepRecord:
        values = {
            "k": k,
            "clock": 0.01 * k,
            "level_1": 0.1,
            "level_2": 0.1,
            "f_m": 0.1,
            "f_s": 0.1,
            "drive": 1.0,
            "reward": 0.0,
            "loss_f": 0.0,
            "loss_j": 0.0,
            "action": "IDLE",
            "explored": False,
            "pos_x": 0.5,
            "pos_y": 0.5,
        }
        values.update(changes)
        return StepRecord(**values)

    return _make
