import json
import logging
import os
import struct
from typing import Any, Dict, Tuple

import numpy as np

from core.channel_sim import TransmissionRecord
from core.errors import DatasetFormatError, DatasetTruncatedError, DimensionConflictError
from core.hybrid_nn import HybridNetParams

logger = logging.getLogger(__name__)


class DataProcessor:
    """
    Data Processor Class for dataset and detector persistence

    Datasets use a little-endian binary layout:

        magic "NOMA1" | version u16 | K, M, N_T, N_D u32
        | powers K×f64 | noise_power f64 | channel M×K complex
        | X_T | Y_T | X_D | Y_D

    with complex matrices stored row-major as interleaved (re, im) f64.
    Detector parameters are stored per user in a numpy .npz archive.
    """

    MAGIC: bytes = b"NOMA1"
    VERSION: int = 1
    HEADER: struct.Struct = struct.Struct("<5sHIIII")
    REAL: np.dtype = np.dtype("<f8")
    COMPLEX: np.dtype = np.dtype("<c16")

    @staticmethod
    def expected_size(K: int, M: int, N_T: int, N_D: int) -> int:
        """Exact byte length of a dataset file with the given header dims"""
        reals = K + 1
        complexes = M * K + N_T * M + N_T * K + N_D * M + N_D * K
        return DataProcessor.HEADER.size + 8 * reals + 16 * complexes

    @staticmethod
    def write_dataset(record: TransmissionRecord, path: str) -> None:
        """
        Write a transmission record to a dataset file

        Args:
            record: Record to store
            path: Destination file path
        """
        record.validate()
        M, K = record.channel.shape
        N_T, N_D = record.train_rx.shape[0], record.data_rx.shape[0]

        parts = [
            DataProcessor.HEADER.pack(DataProcessor.MAGIC, DataProcessor.VERSION, K, M, N_T, N_D),
            np.ascontiguousarray(record.powers, dtype=DataProcessor.REAL).tobytes(),
            np.array([record.noise_power], dtype=DataProcessor.REAL).tobytes(),
        ]
        for matrix in (record.channel, record.train_rx, record.train_symbols, record.data_rx, record.data_symbols):
            parts.append(np.ascontiguousarray(matrix, dtype=DataProcessor.COMPLEX).tobytes())

        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "wb") as f:
            for part in parts:
                f.write(part)
        logger.info("Wrote dataset %s (K=%d, M=%d, N_T=%d, N_D=%d)", path, K, M, N_T, N_D)

    @staticmethod
    def read_dataset(path: str) -> TransmissionRecord:
        """
        Read a dataset file

        Raises:
            OSError: File cannot be read
            DatasetTruncatedError: File shorter than its header dims require
            DatasetFormatError: Bad magic, unsupported version, zero dims or trailing bytes
        """
        with open(path, "rb") as f:
            data = f.read()

        header = DataProcessor.HEADER
        if len(data) < header.size:
            raise DatasetTruncatedError(f"{path}: {len(data)} bytes is shorter than the {header.size}-byte header")
        magic, version, K, M, N_T, N_D = header.unpack_from(data, 0)
        if magic != DataProcessor.MAGIC:
            raise DatasetFormatError(f"{path}: bad magic {magic!r}, expected {DataProcessor.MAGIC!r}")
        if version != DataProcessor.VERSION:
            raise DatasetFormatError(f"{path}: unsupported version {version}, expected {DataProcessor.VERSION}")
        if min(K, M, N_T, N_D) == 0:
            raise DatasetFormatError(f"{path}: zero dimension in header (K={K}, M={M}, N_T={N_T}, N_D={N_D})")

        expected = DataProcessor.expected_size(K, M, N_T, N_D)
        if len(data) < expected:
            raise DatasetTruncatedError(f"{path}: {len(data)} bytes, header dims require {expected}")
        if len(data) > expected:
            raise DatasetFormatError(f"{path}: {len(data) - expected} trailing bytes after the last matrix")

        offset = header.size

        def take(dtype: np.dtype, shape: Tuple[int, ...]) -> np.ndarray:
            nonlocal offset
            count = int(np.prod(shape))
            array = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(shape)
            offset += count * dtype.itemsize
            return array.astype(dtype.newbyteorder("="))

        powers = take(DataProcessor.REAL, (K,))
        noise_power = float(take(DataProcessor.REAL, (1,))[0])
        channel = take(DataProcessor.COMPLEX, (M, K))
        train_rx = take(DataProcessor.COMPLEX, (N_T, M))
        train_symbols = take(DataProcessor.COMPLEX, (N_T, K))
        data_rx = take(DataProcessor.COMPLEX, (N_D, M))
        data_symbols = take(DataProcessor.COMPLEX, (N_D, K))

        return TransmissionRecord(
            channel=channel,
            powers=powers,
            train_rx=train_rx,
            train_symbols=train_symbols,
            data_rx=data_rx,
            data_symbols=data_symbols,
            noise_power=noise_power,
        )

    @staticmethod
    def dataset_roundtrip(record: TransmissionRecord, path: str) -> TransmissionRecord:
        """Write a record and read it back"""
        DataProcessor.write_dataset(record, path)
        return DataProcessor.read_dataset(path)

    @staticmethod
    def save_params(path: str, params_by_user: Dict[int, HybridNetParams], metadata: Dict[str, Any]) -> None:
        """
        Store trained detectors of several users in one .npz archive

        Args:
            path: Destination file path
            params_by_user: 1-based user index -> network parameters
            metadata: JSON-serializable description (config digest, dims, ...)
        """
        arrays: Dict[str, np.ndarray] = {}
        for user, params in params_by_user.items():
            arrays[f"u{user}_w0"] = np.asarray(params.w0)
            arrays[f"u{user}_w_out"] = params.w_out
            for n, (W, b) in enumerate(zip(params.weights, params.biases), start=1):
                arrays[f"u{user}_W{n}"] = W
                arrays[f"u{user}_b{n}"] = b
        meta = dict(metadata, users=sorted(params_by_user), hidden_layers=len(next(iter(params_by_user.values())).weights))
        arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))

        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "wb") as f:
            np.savez(f, **arrays)
        logger.info("Wrote detector params for users %s to %s", meta["users"], path)

    @staticmethod
    def load_params(path: str) -> Tuple[Dict[int, HybridNetParams], Dict[str, Any]]:
        """
        Load detectors stored by save_params

        Returns:
            Tuple of (user -> params, metadata)
        """
        with np.load(path, allow_pickle=False) as archive:
            meta = json.loads(str(archive["meta"]))
            params_by_user: Dict[int, HybridNetParams] = {}
            for user in meta["users"]:
                layers = range(1, meta["hidden_layers"] + 1)
                w0 = np.array(archive[f"u{user}_w0"])
                w0.flags.writeable = False
                params_by_user[int(user)] = HybridNetParams(
                    w0=w0,
                    weights=[np.array(archive[f"u{user}_W{n}"]) for n in layers],
                    biases=[np.array(archive[f"u{user}_b{n}"]) for n in layers],
                    w_out=np.array(archive[f"u{user}_w_out"]),
                )
        return params_by_user, meta

    @staticmethod
    def check_compatible(params_by_user: Dict[int, HybridNetParams], record: TransmissionRecord) -> None:
        """
        Ensure stored detectors match a dataset's antenna and user counts

        Raises:
            DimensionConflictError: Input width differs from 2M or a user is missing
        """
        width = 2 * record.num_antennas
        for user, params in params_by_user.items():
            if params.dims[0] != width:
                raise DimensionConflictError(
                    f"Detector for user {user} expects {params.dims[0] // 2} antennas, dataset has {record.num_antennas}"
                )
            if not 1 <= user <= record.num_users:
                raise DimensionConflictError(f"Detector for user {user}, dataset has {record.num_users} users")
