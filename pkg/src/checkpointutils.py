"""
checkpointutils.py

Versioned npz checkpoints: approximators (layer sizes, weights, biases,
dropout stream), Adam states, named random streams, the world state and
the iteration count. Arrays are stored as float64, so a save/load round
trip is bit exact.
"""

####################
# Standard libraries
####################
import json
from dataclasses import dataclass
from typing import Dict

#######################
# Third party libraries
#######################
import numpy as np

#################
# Local libraries
#################
from constants import HRRL_CHECKPOINT_FORMAT
from contracts import require
from logutils import verbose_log
from neuralutils import AdamState, Approximator
from stateutils import SetPoint, WorldState


@dataclass
class Checkpoint:
    """Everything needed to resume a run"""

    nets: Dict[str, Approximator]
    optimizers: Dict[str, AdamState]
    rngs: Dict[str, np.random.Generator]
    state: WorldState
    iteration: int
    metadata: Dict[str, object]


def rng_state_json(rng: np.random.Generator) -> str:
    """Serialize a generator's bit-generator state"""
    return json.dumps(rng.bit_generator.state, sort_keys=True)


def rng_from_json(text: str) -> np.random.Generator:
    """Rebuild a generator from `rng_state_json` output"""
    state = json.loads(text)
    bit_generator = getattr(np.random, state["bit_generator"])()
    bit_generator.state = state
    return np.random.Generator(bit_generator)


def _pack_net(arrays: dict, name: str, net: Approximator):
    arrays[f"{name}__layer_sizes"] = np.array(net.layer_sizes, dtype=np.int64)
    arrays[f"{name}__dropout_rate"] = np.array(net.dropout_rate)
    arrays[f"{name}__dropout_rng"] = np.array(rng_state_json(net.dropout_rng))
    for i, param in enumerate(net.parameters()):
        arrays[f"{name}__param{i}"] = param


def _unpack_net(data, name: str) -> Approximator:
    net = Approximator(
        tuple(int(n) for n in data[f"{name}__layer_sizes"]),
        dropout_rate=float(data[f"{name}__dropout_rate"]),
        dropout_rng=rng_from_json(str(data[f"{name}__dropout_rng"])),
    )
    net.set_parameters([data[f"{name}__param{i}"] for i in range(len(net.parameters()))])
    return net


def _pack_adam(arrays: dict, name: str, opt: AdamState):
    arrays[f"{name}__hyper"] = np.array(
        [opt.step_count, opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon]
    )
    arrays[f"{name}__count"] = np.array(len(opt.first), dtype=np.int64)
    for i, (first, second) in enumerate(zip(opt.first, opt.second)):
        arrays[f"{name}__first{i}"] = first
        arrays[f"{name}__second{i}"] = second


def _unpack_adam(data, name: str) -> AdamState:
    step_count, learning_rate, beta1, beta2, epsilon = data[f"{name}__hyper"]
    count = int(data[f"{name}__count"])
    return AdamState(
        first=[np.array(data[f"{name}__first{i}"]) for i in range(count)],
        second=[np.array(data[f"{name}__second{i}"]) for i in range(count)],
        step_count=int(step_count),
        learning_rate=float(learning_rate),
        beta1=float(beta1),
        beta2=float(beta2),
        epsilon=float(epsilon),
    )


def save_checkpoint(**kwargs):
    """
    Save a checkpoint as a compressed npz file

    Kwargs:
        :param path
            Destination file (.npz)
        :param nets
            dict name -> Approximator
        :param optimizers
            dict name -> AdamState
        :param rngs
            dict name -> numpy Generator
        :param state
            WorldState to resume from
        :param iteration
            Number of completed iterations
        :param metadata
            JSON serializable dict (seed, config hash, ...)
        :param verbose
            Apply verbose or not
    """
    path = kwargs.get("path")
    nets = kwargs.get("nets", {})
    optimizers = kwargs.get("optimizers", {})
    rngs = kwargs.get("rngs", {})
    state = kwargs.get("state")
    iteration = kwargs.get("iteration", 0)
    metadata = kwargs.get("metadata", {})
    verbose = kwargs.get("verbose")

    arrays = {
        "format_version": np.array(HRRL_CHECKPOINT_FORMAT, dtype=np.int64),
        "iteration": np.array(iteration, dtype=np.int64),
        "metadata": np.array(json.dumps(metadata, sort_keys=True)),
        "net_names": np.array(sorted(nets), dtype=str),
        "optimizer_names": np.array(sorted(optimizers), dtype=str),
        "rng_names": np.array(sorted(rngs), dtype=str),
        "state_delta": np.array(state.delta),
        "state_position": np.array(state.position),
        "state_clock": np.array(state.clock),
        "state_sleep": np.array(state.sleep_steps_remaining, dtype=np.int64),
        "state_setpoint": np.array(state.setpoint.values),
    }
    for name, net in nets.items():
        _pack_net(arrays, f"net_{name}", net)
    for name, opt in optimizers.items():
        _pack_adam(arrays, f"opt_{name}", opt)
    for name, rng in rngs.items():
        arrays[f"rng_{name}"] = np.array(rng_state_json(rng))

    try:
        with open(path, mode="wb") as checkpoint_file:
            np.savez_compressed(checkpoint_file, **arrays)
    except OSError as exc:
        raise OSError(f"Unable to write checkpoint: {path}") from exc

    if verbose:
        verbose_log(f"Saved checkpoint (iteration {iteration}): {path}")


def load_checkpoint(path) -> Checkpoint:
    """Load a file written by `save_checkpoint`"""
    try:
        data = np.load(path, allow_pickle=False)
    except OSError as exc:
        raise OSError(f"Unable to read checkpoint: {path}") from exc

    with data:
        version = int(data["format_version"])
        require(
            version == HRRL_CHECKPOINT_FORMAT,
            f"{path}: checkpoint format {version} is not {HRRL_CHECKPOINT_FORMAT}",
        )
        nets = {str(n): _unpack_net(data, f"net_{n}") for n in data["net_names"]}
        optimizers = {str(n): _unpack_adam(data, f"opt_{n}") for n in data["optimizer_names"]}
        rngs = {str(n): rng_from_json(str(data[f"rng_{n}"])) for n in data["rng_names"]}
        state = WorldState(
            delta=tuple(data["state_delta"].tolist()),
            position=tuple(data["state_position"].tolist()),
            clock=float(data["state_clock"]),
            sleep_steps_remaining=int(data["state_sleep"]),
            setpoint=SetPoint(tuple(data["state_setpoint"].tolist())),
        )
        return Checkpoint(
            nets=nets,
            optimizers=optimizers,
            rngs=rngs,
            state=state,
            iteration=int(data["iteration"]),
            metadata=json.loads(str(data["metadata"])),
        )
