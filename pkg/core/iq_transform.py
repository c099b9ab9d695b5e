"""
IQ-symmetry widening of complex receive data

One complex receive row r(t) becomes the two real rows
r₁(t) = [Re r; Im r] and r₂(t) = [Im r; -Re r], with targets Re b(t) and
Im b(t). A single real function f then predicts both parts:
g(r) = f(r₁) + i·f(r₂).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.errors import DimensionError


@dataclass
class WidenedDataset:
    """
    Real-valued, symmetry-augmented design matrix and targets

    Attributes:
        design: X̄, 2N×2M, rows interleaved r₁(1), r₂(1), r₁(2), ...
        targets: ȳ, length 2N, or None for detection-phase data
        user_index: 1-based user the targets belong to
    """
    design: np.ndarray
    targets: Optional[np.ndarray] = None
    user_index: int = 1

    @property
    def num_features(self) -> int:
        return self.design.shape[1]

    @property
    def num_symbols(self) -> int:
        return self.design.shape[0] // 2


@dataclass
class StackedDataset:
    """
    Non-widened real representation, one row per symbol

    Attributes:
        design: N×2M matrix [Re r, Im r]
        targets: N×2 matrix [Re b, Im b] (one column per target slot), a single
            slot column, or None
        user_index: 1-based user the targets belong to
    """
    design: np.ndarray
    targets: Optional[np.ndarray] = None
    user_index: int = 1

    @property
    def num_features(self) -> int:
        return self.design.shape[1]


def _check_inputs(rx: np.ndarray, symbols: Optional[np.ndarray]) -> np.ndarray:
    rx = np.asarray(rx)
    if rx.ndim != 2 or rx.size == 0:
        raise DimensionError(f"Receive matrix must be a nonempty N×M array, got shape {rx.shape}")
    if symbols is not None and np.shape(symbols) != (rx.shape[0],):
        raise DimensionError(
            f"Target length {np.shape(symbols)} does not match {rx.shape[0]} receive rows"
        )
    return rx


def widen_targets(symbols: np.ndarray) -> np.ndarray:
    """
    Interleave real and imaginary parts along the first axis

    Works on a length-N vector or an N×K matrix (all users at once).
    """
    symbols = np.asarray(symbols)
    widened = np.empty((2 * symbols.shape[0],) + symbols.shape[1:], dtype=np.float64)
    widened[0::2] = symbols.real
    widened[1::2] = symbols.imag
    return widened


def widen_dataset(
    rx: np.ndarray,
    symbols: Optional[np.ndarray] = None,
    user_index: int = 1
) -> WidenedDataset:
    """
    Apply the IQ-symmetry widening to a receive matrix

    Args:
        rx: Complex N×M receive matrix (training or detection phase)
        symbols: Optional complex length-N targets of one user
        user_index: 1-based user the targets belong to

    Returns:
        WidenedDataset: X̄ of shape 2N×2M and ȳ of length 2N (if targets given)
    """
    rx = _check_inputs(rx, symbols)
    N, M = rx.shape
    design = np.empty((2 * N, 2 * M), dtype=np.float64)
    # r₁ rows
    design[0::2, :M] = rx.real
    design[0::2, M:] = rx.imag
    # r₂ rows
    design[1::2, :M] = rx.imag
    design[1::2, M:] = -rx.real

    targets = widen_targets(symbols) if symbols is not None else None
    return WidenedDataset(design=design, targets=targets, user_index=user_index)


def narrow_predictions(outputs: np.ndarray) -> np.ndarray:
    """
    Pair adjacent real outputs back into complex symbols

    output(t) = ŷ(2t-1) + i·ŷ(2t)
    """
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.ndim != 1 or outputs.shape[0] % 2 != 0:
        raise DimensionError(f"Widened predictions need an even-length vector, got shape {outputs.shape}")
    return outputs[0::2] + 1j * outputs[1::2]


def stack_dataset(
    rx: np.ndarray,
    symbols: Optional[np.ndarray] = None,
    user_index: int = 1
) -> StackedDataset:
    """
    Build the plain real representation without IQ symmetry

    Args:
        rx: Complex N×M receive matrix
        symbols: Optional complex length-N targets
        user_index: 1-based user the targets belong to

    Returns:
        StackedDataset: N×2M design and N×2 targets
    """
    rx = _check_inputs(rx, symbols)
    design = np.hstack([rx.real, rx.imag]).astype(np.float64)
    targets = None
    if symbols is not None:
        targets = np.column_stack([np.real(symbols), np.imag(symbols)]).astype(np.float64)
    return StackedDataset(design=design, targets=targets, user_index=user_index)


def to_complex(outputs: np.ndarray) -> np.ndarray:
    """
    Turn real detector outputs into complex symbol estimates

    A vector is treated as widened (adjacent pairs), an N×2 matrix as
    stacked (Re, Im) columns.
    """
    outputs = np.asarray(outputs)
    if outputs.ndim == 1:
        return narrow_predictions(outputs)
    if outputs.ndim == 2 and outputs.shape[1] == 2:
        return outputs[:, 0] + 1j * outputs[:, 1]
    raise DimensionError(f"Cannot interpret outputs of shape {outputs.shape} as symbols")
