"""
Two-branch detector network

A frozen linear branch (the LLS weights w0) is summed with a trainable ReLU
branch of N dense hidden layers followed by a bias-free output layer:

    ŷ = X̄·w0 + a_N·w_{N+1},   a_0 = X̄,   a_n = max(a_{n-1}·W_nᵀ + b_n, 0)

Backpropagation and Adam are written out in numpy; there is no autodiff.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from config.constants import (
    DEFAULT_EPOCHS, DEFAULT_BATCH_SIZE, DEFAULT_LEARNING_RATE,
    ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, DEFAULT_SEED
)
from core.errors import ConfigError, DimensionError
from core.iq_transform import StackedDataset, WidenedDataset, to_complex
from core.lls import LlsWeights
from utils.rng import substream

logger = logging.getLogger(__name__)

Dataset = Union[WidenedDataset, StackedDataset]


@dataclass
class HybridNetParams:
    """
    Parameters of the two-branch network

    Attributes:
        w0: Frozen linear branch, length 2M (or 2M×2 for two outputs); read-only
        weights: W_1..W_N, W_n has shape L_n×L_{n-1}
        biases: b_1..b_N, b_n has length L_n
        w_out: w_{N+1}, length L_N (or L_N×2), no bias
    """
    w0: np.ndarray
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    w_out: np.ndarray

    @property
    def dims(self) -> List[int]:
        return [self.w0.shape[0]] + [W.shape[0] for W in self.weights]

    @property
    def num_outputs(self) -> int:
        return 1 if self.w0.ndim == 1 else self.w0.shape[1]

    def trainable(self) -> List[np.ndarray]:
        """Trainable arrays in the order W_1, b_1, ..., W_N, b_N, w_{N+1}"""
        arrays: List[np.ndarray] = []
        for W, b in zip(self.weights, self.biases):
            arrays.extend([W, b])
        arrays.append(self.w_out)
        return arrays

    def with_trainable(self, arrays: Sequence[np.ndarray]) -> "HybridNetParams":
        """Build new params from trainable arrays, sharing the frozen w0"""
        n_hidden = len(self.weights)
        if len(arrays) != 2 * n_hidden + 1:
            raise DimensionError(f"Expected {2 * n_hidden + 1} trainable arrays, got {len(arrays)}")
        return HybridNetParams(
            w0=self.w0,
            weights=list(arrays[0:2 * n_hidden:2]),
            biases=list(arrays[1:2 * n_hidden:2]),
            w_out=arrays[-1],
        )

    def count_parameters(self) -> Tuple[int, int]:
        """Return (trainable, frozen) parameter counts"""
        return sum(a.size for a in self.trainable()), self.w0.size


@dataclass
class AdamState:
    """Moment accumulators and hyper-parameters of the Adam optimizer"""
    first_moment: List[np.ndarray]
    second_moment: List[np.ndarray]
    t: int = 0
    lr: float = DEFAULT_LEARNING_RATE
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPSILON

    @classmethod
    def for_params(cls, params: HybridNetParams, lr: float = DEFAULT_LEARNING_RATE, **kwargs) -> "AdamState":
        if not lr > 0.0:
            raise ConfigError(f"Learning rate must be positive, got {lr}")
        return cls(
            first_moment=[np.zeros_like(a) for a in params.trainable()],
            second_moment=[np.zeros_like(a) for a in params.trainable()],
            lr=lr,
            **kwargs,
        )


@dataclass(frozen=True)
class TrainConfig:
    """
    Mini-batch Adam settings

    Attributes:
        epochs: Passes over the training rows (0 returns the initial params)
        batch_size: Rows per Adam step; the last batch of an epoch may be smaller
        lr: Adam step size
        shuffle_seed: Seed of the per-epoch row permutations
        restore_best: Return the params of the lowest full-set loss instead of the last epoch's
    """
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    lr: float = DEFAULT_LEARNING_RATE
    shuffle_seed: int = DEFAULT_SEED
    restore_best: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if not self.lr > 0.0:
            raise ConfigError(f"lr must be positive, got {self.lr}")


@dataclass
class TrainResult:
    """
    Outcome of one training run

    Attributes:
        params: Trained (or restored best) parameters
        loss_trace: Full-set MSE after every epoch, in epoch order
        initial_loss: Full-set MSE before the first step
        seconds: Wall time of the run
        final_loss: Full-set MSE of the returned params
        best_epoch: Epoch the returned params come from (0 is the starting point)
    """
    params: HybridNetParams
    loss_trace: List[float] = field(default_factory=list)
    initial_loss: Optional[float] = None
    seconds: float = 0.0
    final_loss: Optional[float] = None
    best_epoch: int = 0


def init_params(
    dims: Sequence[int],
    w0: Union[LlsWeights, np.ndarray],
    rng: np.random.Generator,
    zero_final: bool = True
) -> HybridNetParams:
    """
    Initialize the network around a fixed linear branch

    Hidden weights are drawn from N(0, 2/L_{n-1}), biases start at zero. With
    zero_final the output layer is zero, so the untrained network reproduces
    the LLS prediction exactly.

    Args:
        dims: [2M, L_1, ..., L_N]
        w0: LLS weights of the linear branch
        rng: Seeded generator
        zero_final: Zero the output layer (False gives it N(0, 1/L_N) entries)

    Returns:
        HybridNetParams: Parameters with a read-only copy of w0
    """
    dims = [int(d) for d in dims]
    w0_array = np.array(w0.w if isinstance(w0, LlsWeights) else w0, dtype=np.float64)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise DimensionError(f"dims must be [2M, L_1, ..., L_N] with N >= 1, got {dims}")
    if w0_array.ndim not in (1, 2) or w0_array.shape[0] != dims[0]:
        raise DimensionError(f"Linear branch has shape {w0_array.shape}, dims[0] is {dims[0]}")
    w0_array.flags.writeable = False

    weights: List[np.ndarray] = []
    biases: List[np.ndarray] = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * math.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))

    out_shape = (dims[-1],) + w0_array.shape[1:]
    if zero_final:
        w_out = np.zeros(out_shape)
    else:
        w_out = rng.standard_normal(out_shape) * math.sqrt(1.0 / dims[-1])

    return HybridNetParams(w0=w0_array, weights=weights, biases=biases, w_out=w_out)


def slot_hidden_dims(hidden_dims: Sequence[int], slots: int = 2) -> List[int]:
    """
    Hidden widths of one of several independent single-output networks

    Every layer is scaled by 1/√slots; the slot networks together then hold
    about as many trainable parameters as one network with hidden_dims.
    """
    if slots < 1:
        raise ConfigError(f"slots must be positive, got {slots}")
    return [max(1, int(round(width / math.sqrt(slots)))) for width in hidden_dims]


def merge_slots(slot_params: Sequence[HybridNetParams]) -> HybridNetParams:
    """
    Join independently trained single-output networks into one network

    All slots read the same input. Hidden layers are stacked block-diagonally
    and output s only sees the units of slot s, so the merged forward pass
    equals the slot outputs side by side.

    Args:
        slot_params: Single-output networks of equal input width and depth

    Returns:
        HybridNetParams: Network with one output column per slot
    """
    if not slot_params:
        raise DimensionError("No slot networks to merge")
    first = slot_params[0]
    for params in slot_params:
        if params.num_outputs != 1:
            raise DimensionError(f"Slot networks must have one output, got {params.num_outputs}")
        if params.dims[0] != first.dims[0] or len(params.weights) != len(first.weights):
            raise DimensionError(f"Slot network dims {params.dims} do not match {first.dims}")

    w0 = np.column_stack([p.w0 for p in slot_params])
    w0.flags.writeable = False
    weights = [np.vstack([p.weights[0] for p in slot_params])]
    for n in range(1, len(first.weights)):
        weights.append(scipy.linalg.block_diag(*[p.weights[n] for p in slot_params]))
    biases = [np.concatenate([p.biases[n] for p in slot_params]) for n in range(len(first.biases))]
    w_out = scipy.linalg.block_diag(*[p.w_out[:, None] for p in slot_params])
    return HybridNetParams(w0=w0, weights=weights, biases=biases, w_out=w_out)


def _check_input(params: HybridNetParams, design: np.ndarray) -> np.ndarray:
    design = np.asarray(design, dtype=np.float64)
    if design.ndim != 2 or design.shape[1] != params.dims[0]:
        raise DimensionError(f"Input has shape {design.shape}, network expects {params.dims[0]} columns")
    return design


def forward(params: HybridNetParams, design: np.ndarray) -> np.ndarray:
    """
    Evaluate the network on a batch of rows

    Returns:
        np.ndarray: Length-B outputs (B×2 for a two-output network)
    """
    design = _check_input(params, design)
    activation = design
    for W, b in zip(params.weights, params.biases):
        activation = np.maximum(activation @ W.T + b, 0.0)
    return design @ params.w0 + activation @ params.w_out


def loss_and_grad(
    params: HybridNetParams,
    design: np.ndarray,
    targets: np.ndarray
) -> Tuple[float, List[np.ndarray]]:
    """
    Mean squared error and its gradient w.r.t. the trainable parameters

    Args:
        params: Network parameters
        design: B×2M batch
        targets: Length-B targets (B×2 for a two-output network)

    Returns:
        Tuple of the loss and gradients ordered like params.trainable()
    """
    design = _check_input(params, design)
    targets = np.asarray(targets, dtype=np.float64)
    if design.shape[0] == 0:
        raise DimensionError("Batch is empty")
    expected = (design.shape[0],) + params.w0.shape[1:]
    if targets.shape != expected:
        raise DimensionError(f"Targets have shape {targets.shape}, expected {expected}")

    # Forward pass, keeping pre-activations for the ReLU masks
    activations = [design]
    pre_activations = []
    for W, b in zip(params.weights, params.biases):
        z = activations[-1] @ W.T + b
        pre_activations.append(z)
        activations.append(np.maximum(z, 0.0))
    residual = design @ params.w0 + activations[-1] @ params.w_out - targets
    loss = float(np.mean(residual ** 2))

    # Backward pass; ReLU subgradient at 0 is 0
    d_out = 2.0 * residual / residual.size
    d_out_2d = d_out.reshape(design.shape[0], -1)
    w_out_2d = params.w_out.reshape(params.w_out.shape[0], -1)
    grad_w_out = (activations[-1].T @ d_out_2d).reshape(params.w_out.shape)
    delta = d_out_2d @ w_out_2d.T

    grad_weights: List[np.ndarray] = [None] * len(params.weights)
    grad_biases: List[np.ndarray] = [None] * len(params.biases)
    for n in reversed(range(len(params.weights))):
        delta = delta * (pre_activations[n] > 0.0)
        grad_weights[n] = delta.T @ activations[n]
        grad_biases[n] = delta.sum(axis=0)
        if n > 0:
            delta = delta @ params.weights[n]

    grads: List[np.ndarray] = []
    for gW, gb in zip(grad_weights, grad_biases):
        grads.extend([gW, gb])
    grads.append(grad_w_out)
    return loss, grads


def adam_step(
    params: HybridNetParams,
    grads: Sequence[np.ndarray],
    state: AdamState
) -> Tuple[HybridNetParams, AdamState]:
    """
    One bias-corrected Adam update of the trainable parameters

    Returns:
        Tuple of new params (w0 shared, untouched) and new optimizer state
    """
    arrays = params.trainable()
    if len(grads) != len(arrays):
        raise DimensionError(f"Got {len(grads)} gradients for {len(arrays)} trainable arrays")

    t = state.t + 1
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    new_arrays, new_first, new_second = [], [], []
    for theta, g, m, v in zip(arrays, grads, state.first_moment, state.second_moment):
        if g.shape != theta.shape:
            raise DimensionError(f"Gradient shape {g.shape} does not match parameter shape {theta.shape}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_arrays.append(theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_first.append(m)
        new_second.append(v)

    new_state = AdamState(
        first_moment=new_first,
        second_moment=new_second,
        t=t,
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
    )
    return params.with_trainable(new_arrays), new_state


def train(params: HybridNetParams, train_set: Dataset, cfg: TrainConfig) -> TrainResult:
    """
    Mini-batch Adam training on the MSE loss

    Each epoch visits all rows in a fresh permutation drawn from
    (shuffle_seed, epoch); the final partial batch is kept. With restore_best
    the returned params are those of the lowest full-set loss seen, the
    starting point included, so training never ends above the LLS fit.

    Args:
        params: Initial parameters (typically from init_params)
        train_set: Training data with targets
        cfg: Epochs, batch size, learning rate, shuffle seed

    Returns:
        TrainResult: Trained params and the full-set MSE after every epoch
    """
    if train_set.targets is None:
        raise DimensionError("Training set has no targets")
    design = np.asarray(train_set.design, dtype=np.float64)
    targets = np.asarray(train_set.targets, dtype=np.float64)
    num_rows = design.shape[0]
    if num_rows == 0:
        raise DimensionError("Training set is empty")

    start = time.perf_counter()
    initial_loss = float(np.mean((forward(params, design) - targets) ** 2))
    state = AdamState.for_params(params, lr=cfg.lr)
    loss_trace: List[float] = []
    best_params, best_loss, best_epoch = params, initial_loss, 0

    for epoch in range(cfg.epochs):
        order = substream(cfg.shuffle_seed, "shuffle", epoch).permutation(num_rows)
        for begin in range(0, num_rows, cfg.batch_size):
            batch = order[begin:begin + cfg.batch_size]
            _, grads = loss_and_grad(params, design[batch], targets[batch])
            params, state = adam_step(params, grads, state)
        epoch_loss = float(np.mean((forward(params, design) - targets) ** 2))
        loss_trace.append(epoch_loss)
        if epoch_loss < best_loss:
            best_params, best_loss, best_epoch = params, epoch_loss, epoch + 1
        logger.debug("epoch %d/%d loss %.6e", epoch + 1, cfg.epochs, epoch_loss)

    if not cfg.restore_best:
        best_params, best_loss, best_epoch = params, (loss_trace or [initial_loss])[-1], cfg.epochs
    elif best_epoch < cfg.epochs:
        logger.debug("Restoring params of epoch %d (loss %.6e)", best_epoch, best_loss)

    return TrainResult(
        params=best_params,
        loss_trace=loss_trace,
        initial_loss=initial_loss,
        seconds=time.perf_counter() - start,
        final_loss=best_loss,
        best_epoch=best_epoch,
    )


def detect(params: HybridNetParams, detect_set: Union[Dataset, np.ndarray]) -> np.ndarray:
    """
    Complex symbol estimates for detection-phase data

    Args:
        params: Network parameters
        detect_set: Widened (or stacked) detection data, or its design matrix

    Returns:
        np.ndarray: One complex estimate per detection symbol
    """
    design = getattr(detect_set, "design", detect_set)
    return to_complex(forward(params, design))
