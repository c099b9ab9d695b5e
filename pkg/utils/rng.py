"""
Seed splitting for reproducible simulations

Every random draw in the toolkit comes from a PCG64 generator whose seed
sequence is keyed by (master seed, stream id, *sub keys). Symbols, channel,
noise, network init and batch shuffling each own a stream id, so any one of
them can be regenerated without touching the others.
"""
from typing import Tuple

import numpy as np

from config.constants import (
    STREAM_SYMBOLS, STREAM_CHANNEL, STREAM_NOISE, STREAM_INIT, STREAM_SHUFFLE
)

STREAM_NAMES = {
    "symbols": STREAM_SYMBOLS,
    "channel": STREAM_CHANNEL,
    "noise": STREAM_NOISE,
    "init": STREAM_INIT,
    "shuffle": STREAM_SHUFFLE,
}


def substream(seed: int, stream: str, *keys: int) -> np.random.Generator:
    """
    Create the generator for one named substream

    Args:
        seed: Master seed (64-bit unsigned)
        stream: One of STREAM_NAMES
        *keys: Further non-negative integers, e.g. trial or epoch index

    Returns:
        np.random.Generator: Independent PCG64 generator
    """
    if stream not in STREAM_NAMES:
        raise ValueError(f"Unknown random stream: {stream}. Expected one of {sorted(STREAM_NAMES)}.")
    spawn_key: Tuple[int, ...] = (STREAM_NAMES[stream],) + tuple(int(k) for k in keys)
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(sequence))
