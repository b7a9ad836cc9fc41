"""
neuralutils.py

Feed-forward approximators written out by hand: sigmoid hidden layers,
inverted dropout after each hidden activation, a linear output layer,
reverse-mode gradients with respect to the parameters and the inputs,
and the Adam optimizer.

Inputs may be a single vector (n_in,) or a batch (n, n_in); outputs keep
the same rank.
"""

####################
# Standard libraries
####################
import copy
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

#######################
# Third party libraries
#######################
import numpy as np

#################
# Local libraries
#################
from constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPSILON,
    DROPOUT_RATE,
    HIDDEN_UNITS,
    LEARNING_RATE,
)
from contracts import require


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function, overflow free"""
    return np.exp(-np.logaddexp(0.0, -z))


@dataclass
class _ForwardCache:
    inputs: np.ndarray
    activations: List[np.ndarray]
    sigmoids: List[np.ndarray]
    masks: List[Optional[np.ndarray]]
    single: bool


class Approximator:
    """
    Multilayer perceptron input -> hidden... -> output.

    Weights are stored (fan_in, fan_out) so a batch is multiplied on the
    left: z = a @ W + b.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        dropout_rate: float = DROPOUT_RATE,
        init_rng: Optional[np.random.Generator] = None,
        dropout_rng: Optional[np.random.Generator] = None,
    ):
        require(len(layer_sizes) >= 2, "need at least an input and an output layer")
        require(all(int(n) > 0 for n in layer_sizes), "layer sizes must be positive")
        require(0.0 <= dropout_rate < 1.0, f"dropout rate must be in [0, 1), got {dropout_rate}")
        self.layer_sizes = tuple(int(n) for n in layer_sizes)
        self.dropout_rate = float(dropout_rate)
        init_rng = init_rng if init_rng is not None else np.random.default_rng()
        self.dropout_rng = dropout_rng if dropout_rng is not None else np.random.default_rng()

        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(init_rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._cache: Optional[_ForwardCache] = None

    @classmethod
    def mlp(cls, n_in: int, n_out: int, hidden: int = HIDDEN_UNITS, **kwargs) -> "Approximator":
        """Two hidden layers of `hidden` units"""
        return cls((n_in, hidden, hidden, n_out), **kwargs)

    @property
    def n_inputs(self) -> int:
        """Width of the input layer"""
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        """Width of the output layer"""
        return self.layer_sizes[-1]

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in the order W0, b0, W1, b1, ..."""
        params = []
        for weight, bias in zip(self.weights, self.biases):
            params.extend((weight, bias))
        return params

    def set_parameters(self, params: Sequence[np.ndarray]):
        """Replace every parameter array, copying the values in place"""
        current = self.parameters()
        require(len(params) == len(current), "parameter count mismatch")
        for target, source in zip(current, params):
            require(target.shape == np.shape(source), "parameter shape mismatch")
            target[...] = source

    def copy(self) -> "Approximator":
        """Deep copy, random streams included"""
        clone = copy.deepcopy(self)
        clone._cache = None
        return clone

    def forward(self, inputs, train: bool = False) -> np.ndarray:
        """
        Network output. Train mode samples a fresh dropout mask per hidden
        layer; eval mode uses no mask (inverted dropout scales at train time).
        The activations are cached for `grad_params`.
        """
        x = np.asarray(inputs, dtype=np.float64)
        single = x.ndim == 1
        x2d = np.atleast_2d(x)
        require(
            x2d.ndim == 2 and x2d.shape[1] == self.n_inputs,
            f"expected input width {self.n_inputs}, got shape {x.shape}",
        )
        activations, sigmoids, masks = [x2d], [], []
        a = x2d
        for weight, bias in zip(self.weights[:-1], self.biases[:-1]):
            s = sigmoid(a @ weight + bias)
            mask = None
            if train and self.dropout_rate > 0.0:
                keep = self.dropout_rng.random(s.shape) >= self.dropout_rate
                mask = keep / (1.0 - self.dropout_rate)
            a = s * mask if mask is not None else s
            sigmoids.append(s)
            masks.append(mask)
            activations.append(a)
        out = a @ self.weights[-1] + self.biases[-1]
        self._cache = _ForwardCache(x2d, activations, sigmoids, masks, single)
        return out[0] if single else out

    def _backward(self, upstream: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        cache = self._cache
        require(cache is not None, "no forward pass cached; call forward first")
        g = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
        batch = cache.inputs.shape[0]
        require(
            g.shape == (batch, self.n_outputs),
            f"upstream gradient shape {g.shape} does not match output {(batch, self.n_outputs)}",
        )
        grads: List[np.ndarray] = [None] * (2 * len(self.weights))
        grads[-2] = cache.activations[-1].T @ g
        grads[-1] = g.sum(axis=0)
        da = g @ self.weights[-1].T
        for layer in range(len(self.weights) - 2, -1, -1):
            if cache.masks[layer] is not None:
                da = da * cache.masks[layer]
            s = cache.sigmoids[layer]
            dz = da * s * (1.0 - s)
            grads[2 * layer] = cache.activations[layer].T @ dz
            grads[2 * layer + 1] = dz.sum(axis=0)
            da = dz @ self.weights[layer].T
        return grads, da

    def grad_params(self, upstream) -> List[np.ndarray]:
        """
        Gradients of sum(upstream * output) for every parameter, ordered as
        `parameters()`, using the dropout mask of the cached forward pass.
        """
        grads, _ = self._backward(upstream)
        return grads

    def grad_input(self, inputs) -> np.ndarray:
        """
        d output / d input of a scalar-output network, evaluated without
        dropout. Returns (n_in,) for a single input, (n, n_in) for a batch.
        """
        require(self.n_outputs == 1, f"input gradient needs a scalar output, got {self.n_outputs}")
        self.forward(inputs, train=False)
        _, da = self._backward(np.ones((self._cache.inputs.shape[0], 1)))
        return da[0] if self._cache.single else da

    def directional_grad_params(self, inputs, direction) -> Tuple[float, List[np.ndarray]]:
        """
        s = d output / d input . direction for a scalar-output network and
        one input vector, together with ds/dtheta for every parameter
        (ordered as `parameters()`). Evaluated without dropout and without
        touching the cached forward pass.

        A forward pass carries the tangent of every layer along
        `direction`; the reverse pass then walks both the primal and the
        tangent chain.
        """
        require(self.n_outputs == 1, f"directional gradient needs a scalar output, got {self.n_outputs}")
        x = np.asarray(inputs, dtype=np.float64)
        v = np.asarray(direction, dtype=np.float64)
        require(
            x.shape == (self.n_inputs,) and v.shape == (self.n_inputs,),
            f"expected input and direction of width {self.n_inputs}, got {x.shape} and {v.shape}",
        )
        activations, tangents, sigmoids, tangent_pre = [x], [v], [], []
        a, a_dot = x, v
        for weight, bias in zip(self.weights[:-1], self.biases[:-1]):
            s = sigmoid(a @ weight + bias)
            z_dot = a_dot @ weight
            a, a_dot = s, s * (1.0 - s) * z_dot
            sigmoids.append(s)
            tangent_pre.append(z_dot)
            activations.append(a)
            tangents.append(a_dot)
        w_out = self.weights[-1][:, 0]
        value = float(a_dot @ w_out)

        grads: List[np.ndarray] = [None] * (2 * len(self.weights))
        grads[-2] = tangents[-1][:, None].copy()
        grads[-1] = np.zeros_like(self.biases[-1])
        g_a = np.zeros_like(activations[-1])
        g_a_dot = w_out.copy()
        for layer in range(len(self.weights) - 2, -1, -1):
            s = sigmoids[layer]
            slope = s * (1.0 - s)
            g_z_dot = g_a_dot * slope
            g_z = g_a * slope + g_a_dot * tangent_pre[layer] * slope * (1.0 - 2.0 * s)
            grads[2 * layer] = np.outer(tangents[layer], g_z_dot) + np.outer(activations[layer], g_z)
            grads[2 * layer + 1] = g_z
            g_a = g_z @ self.weights[layer].T
            g_a_dot = g_z_dot @ self.weights[layer].T
        return value, grads

    def soft_update_from(self, source: "Approximator", tau: float):
        """self <- tau * source + (1 - tau) * self"""
        require(source.layer_sizes == self.layer_sizes, "soft update needs matching layer sizes")
        for target, value in zip(self.parameters(), source.parameters()):
            target *= 1.0 - tau
            target += tau * value


def parameter_distance(left: Approximator, right: Approximator) -> float:
    """Euclidean distance between two parameter sets"""
    return float(
        np.sqrt(sum(np.sum((a - b) ** 2) for a, b in zip(left.parameters(), right.parameters())))
    )


def global_norm(grads: Sequence[np.ndarray]) -> float:
    """sqrt of the summed squares of every gradient entry"""
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_by_global_norm(grads: List[np.ndarray], max_norm: float) -> Tuple[List[np.ndarray], float]:
    """Rescale `grads` so their global norm is at most `max_norm` (0 disables)"""
    norm = global_norm(grads)
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm


@dataclass
class AdamState:
    """First/second moments, step count and hyperparameters of Adam"""

    first: List[np.ndarray]
    second: List[np.ndarray]
    step_count: int = 0
    learning_rate: float = LEARNING_RATE
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray], **kwargs) -> "AdamState":
        """Fresh state with moments shaped like `params`"""
        return cls(
            first=[np.zeros_like(p) for p in params],
            second=[np.zeros_like(p) for p in params],
            **kwargs,
        )


def adam_step(params: List[np.ndarray], grads: Sequence[np.ndarray], opt: AdamState) -> List[np.ndarray]:
    """
    One bias-corrected Adam update, applied in place to `params`.

    Returns `params` for chaining.
    """
    require(len(params) == len(grads) == len(opt.first), "Adam shape agreement")
    opt.step_count += 1
    correction1 = 1.0 - opt.beta1**opt.step_count
    correction2 = 1.0 - opt.beta2**opt.step_count
    for param, grad, first, second in zip(params, grads, opt.first, opt.second):
        require(param.shape == np.shape(grad) == first.shape, "Adam shape agreement")
        first *= opt.beta1
        first += (1.0 - opt.beta1) * grad
        second *= opt.beta2
        second += (1.0 - opt.beta2) * grad * grad
        param -= opt.learning_rate * (first / correction1) / (
            np.sqrt(second / correction2) + opt.epsilon
        )
    return params
