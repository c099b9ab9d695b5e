"""
Linear least-squares detector

The weights w^k minimize ‖X̄w - ȳ_k‖₂ for the widened training data. They
serve as the standalone linear baseline and as the frozen linear branch of
the hybrid network.
"""
import logging
from dataclasses import dataclass
from typing import List, Union

import numpy as np
import scipy.linalg

from core.errors import DimensionError, IllConditionedError
from core.iq_transform import StackedDataset, WidenedDataset, to_complex

logger = logging.getLogger(__name__)

# Residual (relative to ‖ȳ‖) below which a rank-deficient system counts as consistent
CONSISTENCY_RTOL = 1e-8

TrainingSet = Union[WidenedDataset, StackedDataset]


@dataclass
class LlsWeights:
    """
    Fitted linear detector of one user

    Attributes:
        w: Length-2M weights (widened data) or 2M×2 (stacked data)
        user_index: 1-based user the weights detect
        gram_condition: Condition estimate of X̄ᵀX̄ (inf if singular)
        rank: Numerical rank of X̄
    """
    w: np.ndarray
    user_index: int = 1
    gram_condition: float = 1.0
    rank: int = 0

    @property
    def num_features(self) -> int:
        return self.w.shape[0]


def _solve(design: np.ndarray, targets: np.ndarray):
    """
    Least-squares solve through a complete orthogonal factorization

    Args:
        design: Real rows×cols matrix, rows >= cols
        targets: Real vector or rows×T matrix

    Returns:
        Tuple of (solution, gram_condition, rank)
    """
    rows, cols = design.shape
    if rows < cols:
        raise DimensionError(f"Least squares needs at least {cols} rows, got {rows}")
    if targets.shape[0] != rows:
        raise DimensionError(f"Targets have {targets.shape[0]} rows, design has {rows}")

    singular = scipy.linalg.svdvals(design)
    if singular[0] == 0.0:
        raise IllConditionedError("Design matrix is all zeros", gram_condition=float("inf"))
    gram_condition = float((singular[0] / singular[-1]) ** 2) if singular[-1] > 0.0 else float("inf")

    rcond = max(rows, cols) * np.finfo(np.float64).eps
    solution, _, rank, _ = scipy.linalg.lstsq(design, targets, cond=rcond, lapack_driver="gelsy")

    if rank < cols:
        residual = design @ solution - targets
        residual_norm = np.linalg.norm(residual, axis=0)
        target_norm = np.maximum(np.linalg.norm(targets, axis=0), np.finfo(np.float64).tiny)
        if np.any(residual_norm > CONSISTENCY_RTOL * target_norm):
            raise IllConditionedError(
                f"Design matrix has rank {rank} < {cols} and the system is inconsistent "
                f"(gram condition {gram_condition:.3e})",
                gram_condition=gram_condition,
            )
        logger.debug("Rank-deficient but consistent system (rank %d of %d), using minimum-norm solution", rank, cols)

    logger.debug("LLS fit: %dx%d design, gram condition %.3e", rows, cols, gram_condition)
    return solution, gram_condition, int(rank)


def fit(train: TrainingSet) -> LlsWeights:
    """
    Fit the least-squares weights of one user

    Args:
        train: Widened (or stacked) training data with targets

    Returns:
        LlsWeights: Weights agreeing with (X̄ᵀX̄)⁻¹X̄ᵀȳ when X̄ has full rank

    Raises:
        IllConditionedError: X̄ is rank deficient and the fit leaves a residual
    """
    if train.targets is None:
        raise DimensionError("Training set has no targets")
    w, gram_condition, rank = _solve(train.design, train.targets)
    return LlsWeights(w=w, user_index=train.user_index, gram_condition=gram_condition, rank=rank)


def fit_all(design: np.ndarray, targets: np.ndarray) -> List[LlsWeights]:
    """
    Fit all users against one shared design matrix

    One factorization serves every column of the target matrix, so the
    per-user results equal independent fits.

    Args:
        design: Widened training design X̄, 2N×2M
        targets: 2N×K matrix, column k holds ȳ of user k+1

    Returns:
        List[LlsWeights]: One entry per user, in user order
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim != 2:
        raise DimensionError(f"Batched fit needs a 2N×K target matrix, got shape {targets.shape}")
    solution, gram_condition, rank = _solve(design, targets)
    return [
        LlsWeights(w=solution[:, k].copy(), user_index=k + 1, gram_condition=gram_condition, rank=rank)
        for k in range(targets.shape[1])
    ]


def predict(weights: LlsWeights, detect: TrainingSet) -> np.ndarray:
    """
    Detect symbols by one matrix-vector product

    Returns:
        np.ndarray: Complex symbol estimates, one per detection symbol
    """
    if detect.design.shape[1] != weights.num_features:
        raise DimensionError(
            f"Detection data has {detect.design.shape[1]} columns, weights expect {weights.num_features}"
        )
    return to_complex(detect.design @ weights.w)
