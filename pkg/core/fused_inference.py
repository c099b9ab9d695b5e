"""
Single-pass inference for narrow hybrid networks

The fused path packs all parameters into one lane-padded buffer and pushes
each input tile through every layer using a small, preallocated working
set, so no full-batch per-layer activation is ever materialized. Networks
with a hidden layer wider than FUSED_MAX_WIDTH take a blocked GEMM path
that evaluates layer by layer over the whole batch.
"""
import logging
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.constants import FUSED_MAX_WIDTH, VECTOR_LANE_WIDTH, DEFAULT_TILE_ROWS, DEFAULT_SEED
from core.errors import DimensionError, EquivalenceError
from core.hybrid_nn import HybridNetParams, forward
from utils.rng import substream

logger = logging.getLogger(__name__)

# Relative tolerance of the optimized paths against the reference forward
TOLERANCE = {np.dtype(np.float64): 1e-12, np.dtype(np.float32): 1e-5}

# Row and column block sizes of the fallback GEMM
GEMM_ROW_BLOCK = 512
GEMM_COL_BLOCK = 128


def _pad(width: int) -> int:
    return int(math.ceil(width / VECTOR_LANE_WIDTH) * VECTOR_LANE_WIDTH)


@dataclass(frozen=True)
class Segment:
    """Location of one parameter array inside the packed buffer"""
    name: str
    offset: int
    padded_shape: Tuple[int, ...]
    source_shape: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.padded_shape))


@dataclass(frozen=True)
class FusedPlan:
    """
    Immutable packed network ready for inference

    Attributes:
        buffer: Layer-major parameter buffer (Wᵀ_1, b_1, ..., Wᵀ_N, b_N, w0, w_out)
        dims: [2M, L_1, ..., L_N]
        segments: Layout descriptor of every array in the buffer
        padded_dims: dims rounded up to the vector-lane width
        max_width: Largest hidden width
        fused: True if the tiled single-pass path is selected
        tile_rows: Rows per input tile
    """
    buffer: np.ndarray
    dims: Tuple[int, ...]
    segments: Tuple[Segment, ...]
    padded_dims: Tuple[int, ...]
    max_width: int
    fused: bool
    num_outputs: int = 1
    tile_rows: int = DEFAULT_TILE_ROWS

    @property
    def dtype(self) -> np.dtype:
        return self.buffer.dtype

    def view(self, name: str) -> np.ndarray:
        """Padded view of one packed array"""
        for segment in self.segments:
            if segment.name == name:
                return self.buffer[segment.offset:segment.offset + segment.size].reshape(segment.padded_shape)
        raise KeyError(name)

    @property
    def num_hidden(self) -> int:
        return len(self.dims) - 1

    def output_shape(self) -> Tuple[int, ...]:
        return () if self.num_outputs == 1 else (self.num_outputs,)


def build_plan(
    params: HybridNetParams,
    dtype: Any = np.float64,
    tile_rows: int = DEFAULT_TILE_ROWS
) -> FusedPlan:
    """
    Pack network parameters for single-pass evaluation

    Args:
        params: Trained (or initial) network parameters
        dtype: float64, or float32 for the reduced-precision fused path
        tile_rows: Input rows processed per tile

    Returns:
        FusedPlan: Plan selecting the fused path iff every hidden width <= FUSED_MAX_WIDTH
    """
    dtype = np.dtype(dtype)
    if dtype not in TOLERANCE:
        raise DimensionError(f"Unsupported plan dtype {dtype}, expected float64 or float32")
    if tile_rows < 1:
        raise DimensionError(f"tile_rows must be positive, got {tile_rows}")
    dims = tuple(params.dims)
    padded = tuple(_pad(d) for d in dims)
    out_tail = params.w0.shape[1:]

    # Gather (name, padded shape, source array already oriented like the padded view)
    entries: List[Tuple[str, Tuple[int, ...], np.ndarray]] = []
    for n, (W, b) in enumerate(zip(params.weights, params.biases)):
        entries.append((f"W{n + 1}", (padded[n], padded[n + 1]), W.T))
        entries.append((f"b{n + 1}", (padded[n + 1],), b))
    entries.append(("w0", (padded[0],) + out_tail, params.w0))
    entries.append(("w_out", (padded[-1],) + out_tail, params.w_out))

    segments: List[Segment] = []
    offset = 0
    for name, padded_shape, source in entries:
        segments.append(Segment(name, offset, padded_shape, tuple(source.shape)))
        offset += int(np.prod(padded_shape))

    buffer = np.zeros(offset, dtype=dtype)
    for segment, (_, _, source) in zip(segments, entries):
        target = buffer[segment.offset:segment.offset + segment.size].reshape(segment.padded_shape)
        target[tuple(slice(0, s) for s in source.shape)] = source
    buffer.flags.writeable = False

    max_width = max(dims[1:])
    fused = max_width <= FUSED_MAX_WIDTH
    if not fused:
        logger.info("Hidden width %d exceeds %d, selecting blocked GEMM fallback", max_width, FUSED_MAX_WIDTH)
    logger.debug("Packed plan dims=%s padded=%s dtype=%s (%d values)", dims, padded, dtype, offset)

    return FusedPlan(
        buffer=buffer,
        dims=dims,
        segments=tuple(segments),
        padded_dims=padded,
        max_width=max_width,
        fused=fused,
        num_outputs=params.num_outputs,
        tile_rows=int(tile_rows),
    )


def unpack_plan(plan: FusedPlan) -> HybridNetParams:
    """Recover network parameters from a plan (exact for float64 plans)"""
    def source(name: str) -> np.ndarray:
        segment = next(s for s in plan.segments if s.name == name)
        view = plan.view(name)
        return np.array(view[tuple(slice(0, s) for s in segment.source_shape)])

    weights = [source(f"W{n + 1}").T.copy() for n in range(plan.num_hidden)]
    biases = [source(f"b{n + 1}") for n in range(plan.num_hidden)]
    return HybridNetParams(w0=source("w0"), weights=weights, biases=biases, w_out=source("w_out"))


class _Workspace:
    """Per-thread working set, O(tile_rows · max padded width)"""

    def __init__(self, plan: FusedPlan):
        widest = max(plan.padded_dims)
        self.input = np.zeros(plan.tile_rows * plan.padded_dims[0], dtype=plan.dtype)
        self.ping = np.empty(plan.tile_rows * widest, dtype=plan.dtype)
        self.pong = np.empty(plan.tile_rows * widest, dtype=plan.dtype)
        self.branch = np.empty((plan.tile_rows,) + plan.output_shape(), dtype=plan.dtype)


def _run_tiles(plan: FusedPlan, design: np.ndarray, out: np.ndarray, starts: List[int]) -> None:
    ws = _Workspace(plan)
    in_width, in_padded = plan.dims[0], plan.padded_dims[0]
    layers = [(plan.view(f"W{n + 1}"), plan.view(f"b{n + 1}")) for n in range(plan.num_hidden)]
    w0, w_out = plan.view("w0"), plan.view("w_out")

    for start in starts:
        rows = min(plan.tile_rows, design.shape[0] - start)
        x = ws.input[:rows * in_padded].reshape(rows, in_padded)
        x[:, :in_width] = design[start:start + rows]
        x[:, in_width:] = 0.0

        current = x
        buffers = (ws.ping, ws.pong)
        for n, (Wt, b) in enumerate(layers):
            width = Wt.shape[1]
            activation = buffers[n % 2][:rows * width].reshape(rows, width)
            np.matmul(current, Wt, out=activation)
            activation += b
            np.maximum(activation, 0.0, out=activation)
            current = activation

        result = out[start:start + rows]
        np.matmul(x, w0, out=result)
        branch = ws.branch[:rows]
        np.matmul(current, w_out, out=branch)
        result += branch


def _tiled_forward(plan: FusedPlan, design: np.ndarray, threads: int = 1) -> np.ndarray:
    out = np.empty((design.shape[0],) + plan.output_shape(), dtype=plan.dtype)
    starts = list(range(0, design.shape[0], plan.tile_rows))
    if threads <= 1 or len(starts) < 2:
        _run_tiles(plan, design, out, starts)
        return out

    # Contiguous tile ranges per worker; writes to out are disjoint
    chunks = [list(chunk) for chunk in np.array_split(starts, min(threads, len(starts)))]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        for future in [pool.submit(_run_tiles, plan, design, out, chunk) for chunk in chunks]:
            future.result()
    return out


def _blocked_forward(plan: FusedPlan, design: np.ndarray) -> np.ndarray:
    """Generic path: full-batch blocked GEMM per layer"""
    batch = design.shape[0]
    in_width = plan.dims[0]
    activation = np.zeros((batch, plan.padded_dims[0]), dtype=plan.dtype)
    activation[:, :in_width] = design
    x = activation

    for n in range(plan.num_hidden):
        Wt, b = plan.view(f"W{n + 1}"), plan.view(f"b{n + 1}")
        z = np.empty((batch, Wt.shape[1]), dtype=plan.dtype)
        for row in range(0, batch, GEMM_ROW_BLOCK):
            rows = slice(row, row + GEMM_ROW_BLOCK)
            for col in range(0, Wt.shape[1], GEMM_COL_BLOCK):
                cols = slice(col, col + GEMM_COL_BLOCK)
                z[rows, cols] = activation[rows] @ Wt[:, cols]
        z += b
        np.maximum(z, 0.0, out=z)
        activation = z

    return x @ plan.view("w0") + activation @ plan.view("w_out")


def fused_forward(plan: FusedPlan, design: np.ndarray, threads: int = 1) -> np.ndarray:
    """
    Evaluate the packed network on a batch

    Args:
        plan: Plan from build_plan
        design: B×2M input rows
        threads: Worker threads over tiles (fused path only)

    Returns:
        np.ndarray: Outputs in the plan's dtype, shaped like hybrid_nn.forward
    """
    design = np.asarray(design)
    if design.ndim != 2 or design.shape[1] != plan.dims[0]:
        raise DimensionError(f"Input has shape {design.shape}, plan expects {plan.dims[0]} columns")
    if plan.fused:
        return _tiled_forward(plan, design, threads=threads)
    return _blocked_forward(plan, design)


def relative_deviation(actual: np.ndarray, reference: np.ndarray) -> float:
    """max |actual - reference| / max |reference| (absolute if the reference is zero)"""
    actual = np.asarray(actual, dtype=np.float64)
    scale = float(np.max(np.abs(reference))) if np.size(reference) else 0.0
    error = float(np.max(np.abs(actual - reference))) if np.size(reference) else 0.0
    return error / scale if scale > 0.0 else error


@dataclass
class BenchReport:
    """
    Timing comparison of the inference paths

    Attributes:
        rows: One dict per path with path, dims, batch, ns_per_sample, speedup_vs_naive
        metadata: Machine and run description
    """
    rows: List[Dict[str, Any]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def speedup(self) -> Optional[float]:
        for row in self.rows:
            if row["path"] == "fused":
                return row["speedup_vs_naive"]
        return None


def machine_metadata() -> Dict[str, Any]:
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "cpu_count": os.cpu_count(),
    }


def _median_ns(fn, repeats: int) -> float:
    timings = []
    for _ in range(repeats):
        begin = time.perf_counter_ns()
        fn()
        timings.append(time.perf_counter_ns() - begin)
    return float(np.median(timings))


def bench_compare(
    plan: FusedPlan,
    batch: int,
    repeats: int = 10,
    seed: int = DEFAULT_SEED,
    threads: int = 1
) -> BenchReport:
    """
    Time the fused, naive reference and blocked fallback paths

    Every path is checked against the reference forward before timing.

    Args:
        plan: Plan to benchmark
        batch: Rows per evaluation
        repeats: Timed evaluations per path (median is reported)
        seed: Seed of the random input rows
        threads: Worker threads of the fused path

    Returns:
        BenchReport: ns/sample per path plus speedup over the naive path
    """
    if batch < 1 or repeats < 1:
        raise DimensionError(f"Benchmark needs batch >= 1 and repeats >= 1, got {batch}, {repeats}")
    design = substream(seed, "init", batch).standard_normal((batch, plan.dims[0]))
    params = unpack_plan(replace(plan, buffer=plan.buffer.astype(np.float64)))
    reference = forward(params, design)

    paths = {
        "fused": lambda: _tiled_forward(plan, design, threads=threads),
        "naive": lambda: forward(params, design),
        "fallback": lambda: _blocked_forward(plan, design),
    }

    # Exactness gate before any timing
    tolerance = TOLERANCE[plan.dtype]
    for name in ("fused", "fallback"):
        deviation = relative_deviation(paths[name](), reference)
        if deviation > tolerance:
            raise EquivalenceError(f"{name} path deviates by {deviation:.3e} (tolerance {tolerance:.0e})")

    timings = {name: _median_ns(fn, repeats) for name, fn in paths.items()}
    dims_label = "x".join(str(d) for d in plan.dims)
    report = BenchReport(metadata={
        **machine_metadata(),
        "dtype": str(plan.dtype),
        "tile_rows": plan.tile_rows,
        "threads": threads,
        "repeats": repeats,
        "selected_path": "fused" if plan.fused else "fallback",
    })
    for name, ns in timings.items():
        report.rows.append({
            "path": name,
            "dims": dims_label,
            "batch": batch,
            "ns_per_sample": max(ns, 1.0) / batch,
            "speedup_vs_naive": timings["naive"] / max(ns, 1.0),
        })
        logger.info("%s path: %.1f ns/sample", name, max(ns, 1.0) / batch)
    return report
