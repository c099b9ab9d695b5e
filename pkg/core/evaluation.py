"""
Hard-decision BER evaluation and the experiment harness

run_noise_sweep reproduces the structure of the noise sweep and the
IQ-symmetry ablation: for every (SNR, trial) a fresh noise (and by default
channel) realization is drawn, every detector variant is fitted or trained
per user, and per-user BERs are aggregated into mean and population SD.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from config.constants import (
    DETECTORS, DETECTOR_LLS, DETECTOR_HYBRID, DETECTOR_PLAIN,
    ABLATIONS, ABLATION_SYMMETRY_ON, ABLATION_SYMMETRY_OFF, ABLATION_SYMMETRY_HALF,
    DEFAULT_HIDDEN_DIMS, DEFAULT_SOI, QPSK_BITS_PER_SYMBOL
)
from core import hybrid_nn, lls
from core.channel_sim import ScenarioConfig, TransmissionRecord, synthesize
from core.errors import ConfigError, DimensionError, IllConditionedError
from core.iq_transform import StackedDataset, stack_dataset, widen_dataset
from utils.rng import substream

logger = logging.getLogger(__name__)

BER_KEYS = ["snr_db", "user", "detector", "ablation"]

RESULTS_NOTE = (
    "Synthetic Rayleigh channel; only orderings and trends are comparable with "
    "lab measurements, not absolute BER values."
)


def hard_decision_qpsk(symbols: np.ndarray) -> np.ndarray:
    """
    Gray hard decision, bit0 = (Re < 0), bit1 = (Im < 0)

    Returns:
        np.ndarray: N×2 array of 0/1 bits; an exact 0 decides to bit 0
    """
    symbols = np.asarray(symbols).reshape(-1)
    bits = np.empty((symbols.shape[0], QPSK_BITS_PER_SYMBOL), dtype=np.int8)
    bits[:, 0] = symbols.real < 0.0
    bits[:, 1] = symbols.imag < 0.0
    return bits


def bit_error_rate(predicted_bits: np.ndarray, true_bits: np.ndarray) -> float:
    """Fraction of differing bits"""
    predicted_bits = np.asarray(predicted_bits)
    true_bits = np.asarray(true_bits)
    if predicted_bits.shape != true_bits.shape:
        raise DimensionError(f"Bit arrays differ in shape: {predicted_bits.shape} vs {true_bits.shape}")
    if predicted_bits.size == 0:
        raise DimensionError("Bit arrays are empty")
    return float(np.count_nonzero(predicted_bits != true_bits)) / predicted_bits.size


def symbol_ber(estimates: np.ndarray, symbols: np.ndarray) -> float:
    """BER of complex estimates against transmitted constellation symbols"""
    return bit_error_rate(hard_decision_qpsk(estimates), hard_decision_qpsk(symbols))


@dataclass
class BerReport:
    """
    Aggregated BER statistics of an experiment

    Attributes:
        rows: DataFrame with snr_db, user, detector, ablation, trials,
            mean_ber, sd_ber, total_bits
        metadata: Seeds, config digest and run description
    """
    rows: pd.DataFrame
    metadata: Dict[str, Any] = field(default_factory=dict)

    def cell(self, snr_db: float, user: int, detector: str, ablation: str = ABLATION_SYMMETRY_ON) -> pd.Series:
        mask = (
            (self.rows["snr_db"] == snr_db) & (self.rows["user"] == user)
            & (self.rows["detector"] == detector) & (self.rows["ablation"] == ablation)
        )
        matches = self.rows[mask]
        if matches.empty:
            raise KeyError((snr_db, user, detector, ablation))
        return matches.iloc[0]


@dataclass(frozen=True)
class SweepPlan:
    """Everything a single trial needs; trials are pure functions of it"""
    scenario: ScenarioConfig
    detectors: Sequence[str]
    ablations: Sequence[str]
    hidden_dims: Sequence[int]
    train_cfg: hybrid_nn.TrainConfig
    users: Sequence[int]
    fresh_channel: bool


def _validate_choices(detectors: Iterable[str], ablations: Iterable[str]) -> None:
    for detector in detectors:
        if detector not in DETECTORS:
            raise ConfigError(f"Unknown detector id: {detector}. Expected one of {DETECTORS}.")
    for ablation in ablations:
        if ablation not in ABLATIONS:
            raise ConfigError(f"Unknown ablation: {ablation}. Expected one of {ABLATIONS}.")


def _training_sets(record: TransmissionRecord, user: int, ablation: str):
    """Training and detection data of one user for one ablation"""
    k = user - 1
    if ablation == ABLATION_SYMMETRY_OFF:
        train = stack_dataset(record.train_rx, record.train_symbols[:, k], user)
        detect = stack_dataset(record.data_rx, user_index=user)
        return train, detect
    rows = record.train_rx.shape[0]
    if ablation == ABLATION_SYMMETRY_HALF:
        rows //= 2
    train = widen_dataset(record.train_rx[:rows], record.train_symbols[:rows, k], user)
    detect = widen_dataset(record.data_rx, user_index=user)
    return train, detect


def _network_detector(
    plan: SweepPlan,
    w0: np.ndarray,
    train_set,
    detect_set,
    trial: int,
    user: int,
    plain: bool
):
    if isinstance(train_set, StackedDataset):
        return _slot_network_detector(plan, w0, train_set, detect_set, trial, user, plain)
    dims = [train_set.num_features] + list(plan.hidden_dims)
    init_rng = substream(plan.scenario.seed, "init", trial, user, int(plain))
    params = hybrid_nn.init_params(dims, np.zeros_like(w0) if plain else w0, init_rng, zero_final=not plain)
    shuffle_seed = int(substream(plan.scenario.seed, "shuffle", trial, user).integers(2 ** 63))
    result = hybrid_nn.train(params, train_set, replace(plan.train_cfg, shuffle_seed=shuffle_seed))
    return hybrid_nn.detect(result.params, detect_set), result.seconds


def _slot_network_detector(
    plan: SweepPlan,
    w0: np.ndarray,
    train_set: StackedDataset,
    detect_set: StackedDataset,
    trial: int,
    user: int,
    plain: bool
):
    """
    Without IQ symmetry Re and Im are two independent functions

    Each target slot gets its own single-output network, trained alone on
    its column of the stacked targets. The slot networks share the trainable
    budget of one symmetric network and see the same rows and Adam steps.
    """
    slots = train_set.targets.shape[1]
    dims = [train_set.num_features] + hybrid_nn.slot_hidden_dims(plan.hidden_dims, slots)
    trained: List[hybrid_nn.HybridNetParams] = []
    seconds = 0.0
    for slot in range(slots):
        init_rng = substream(plan.scenario.seed, "init", trial, user, int(plain), slot + 1)
        slot_w0 = np.zeros(w0.shape[0]) if plain else w0[:, slot]
        params = hybrid_nn.init_params(dims, slot_w0, init_rng, zero_final=not plain)
        shuffle_seed = int(substream(plan.scenario.seed, "shuffle", trial, user, slot + 1).integers(2 ** 63))
        slot_set = replace(train_set, targets=train_set.targets[:, slot])
        result = hybrid_nn.train(params, slot_set, replace(plan.train_cfg, shuffle_seed=shuffle_seed))
        trained.append(result.params)
        seconds += result.seconds
    return hybrid_nn.detect(hybrid_nn.merge_slots(trained), detect_set), seconds


def run_trial(plan: SweepPlan, trial: int) -> List[Dict[str, Any]]:
    """
    One noise realization: fit/train every detector variant for every user

    Returns:
        List[Dict[str, Any]]: One row per (user, detector, ablation) with ber,
            bits and train_seconds; ber is NaN when the LLS fit is ill-conditioned
    """
    record = synthesize(plan.scenario, trial=trial, fresh_channel=plan.fresh_channel)
    bits = record.data_rx.shape[0] * QPSK_BITS_PER_SYMBOL
    rows: List[Dict[str, Any]] = []

    for user in plan.users:
        truth = record.data_symbols[:, user - 1]
        for ablation in plan.ablations:
            train_set, detect_set = _training_sets(record, user, ablation)
            try:
                start = time.perf_counter()
                weights = lls.fit(train_set)
                lls_seconds = time.perf_counter() - start
            except IllConditionedError as e:
                logger.warning("Trial %d user %d %s: %s", trial, user, ablation, e)
                for detector in plan.detectors:
                    rows.append(dict(user=user, detector=detector, ablation=ablation,
                                     ber=math.nan, bits=0, train_seconds=math.nan))
                continue

            for detector in plan.detectors:
                if detector == DETECTOR_LLS:
                    estimates, seconds = lls.predict(weights, detect_set), lls_seconds
                else:
                    estimates, seconds = _network_detector(
                        plan, weights.w, train_set, detect_set, trial, user,
                        plain=detector == DETECTOR_PLAIN,
                    )
                rows.append(dict(user=user, detector=detector, ablation=ablation,
                                 ber=symbol_ber(estimates, truth), bits=bits, train_seconds=seconds))
    return rows


def _aggregate(per_trial: pd.DataFrame) -> pd.DataFrame:
    grouped = per_trial.groupby(BER_KEYS, sort=False)
    rows = grouped.agg(
        trials=("ber", "count"),
        mean_ber=("ber", "mean"),
        sd_ber=("ber", lambda s: float(np.std(s.dropna().to_numpy(), ddof=0)) if s.notna().any() else math.nan),
        total_bits=("bits", "sum"),
    ).reset_index()
    rows["trials"] = rows["trials"].astype(int)
    rows["total_bits"] = rows["total_bits"].astype(np.int64)
    return rows


def run_noise_sweep(
    scenario: ScenarioConfig,
    snr_list: Sequence[float],
    trials: int,
    detectors: Sequence[str] = (DETECTOR_LLS, DETECTOR_HYBRID),
    ablations: Sequence[str] = (ABLATION_SYMMETRY_ON,),
    hidden_dims: Sequence[int] = tuple(DEFAULT_HIDDEN_DIMS),
    train_cfg: Optional[hybrid_nn.TrainConfig] = None,
    users: Optional[Sequence[int]] = None,
    fresh_channel: bool = True,
    workers: int = 1
) -> BerReport:
    """
    BER over an SNR grid for a set of detectors and symmetry ablations

    Args:
        scenario: Template scenario; its snr_db is replaced per grid point
        snr_list: SNR values in dB (inf allowed)
        trials: Noise realizations per SNR
        detectors: Subset of LLS, HybridNN, PlainNN
        ablations: Subset of symmetry_on, symmetry_off, symmetry_on_half_data
        hidden_dims: Hidden widths of the network detectors
        train_cfg: Training hyper-parameters (shuffle seeds are derived per trial)
        users: 1-based users to detect (default: all)
        fresh_channel: Draw a new channel per trial
        workers: Threads running trials concurrently

    Returns:
        BerReport: One row per (snr, user, detector, ablation)
    """
    if not snr_list:
        raise ConfigError("SNR list is empty")
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    _validate_choices(detectors, ablations)
    users = list(users) if users else list(range(1, scenario.num_users + 1))
    for user in users:
        if not 1 <= user <= scenario.num_users:
            raise ConfigError(f"User {user} outside 1..{scenario.num_users}")
    train_cfg = train_cfg or hybrid_nn.TrainConfig()

    frames: List[pd.DataFrame] = []
    for snr_db in snr_list:
        plan = SweepPlan(
            scenario=replace(scenario, snr_db=float(snr_db)),
            detectors=list(detectors),
            ablations=list(ablations),
            hidden_dims=list(hidden_dims),
            train_cfg=train_cfg,
            users=users,
            fresh_channel=fresh_channel,
        )
        # map keeps trial order, so aggregation is independent of scheduling
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                trial_rows = list(pool.map(lambda t: run_trial(plan, t), range(trials)))
        else:
            trial_rows = [run_trial(plan, t) for t in range(trials)]

        frame = pd.DataFrame([
            dict(snr_db=float(snr_db), trial=t, **row)
            for t, rows in enumerate(trial_rows) for row in rows
        ])
        frames.append(frame)
        logger.info("SNR %s dB: %d trials done", snr_db, trials)

    per_trial = pd.concat(frames, ignore_index=True)
    timing = per_trial.groupby(["detector", "ablation"], sort=False)["train_seconds"].mean()
    metadata = {
        "seed": scenario.seed,
        "trials": trials,
        "fresh_channel": fresh_channel,
        "users": users,
        "hidden_dims": list(hidden_dims),
        "rx_nonlinearity_gain": scenario.rx_nonlinearity_gain,
        "mean_train_seconds": {f"{d}/{a}": float(s) for (d, a), s in timing.items()},
        "note": RESULTS_NOTE,
    }
    return BerReport(rows=_aggregate(per_trial), metadata=metadata)


def run_dims_study(
    scenario: ScenarioConfig,
    dims_list: Sequence[Sequence[int]],
    trials: int,
    train_cfg: Optional[hybrid_nn.TrainConfig] = None,
    user: int = DEFAULT_SOI,
    fresh_channel: bool = True
) -> pd.DataFrame:
    """
    BER versus training time for several hidden-layer configurations

    Args:
        scenario: Scenario including the SNR to evaluate at
        dims_list: Hidden widths per configuration, e.g. [[32], [64, 64, 64]]
        trials: Noise realizations per configuration
        train_cfg: Training hyper-parameters
        user: 1-based signal of interest

    Returns:
        pd.DataFrame: dims, trainable_params, trials, mean_ber, sd_ber, mean_train_seconds
    """
    if not dims_list:
        raise ConfigError("No network dimensions given")
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if not 1 <= user <= scenario.num_users:
        raise ConfigError(f"User {user} outside 1..{scenario.num_users}")
    train_cfg = train_cfg or hybrid_nn.TrainConfig()

    records = [synthesize(scenario, trial=t, fresh_channel=fresh_channel) for t in range(trials)]
    rows = []
    for hidden in dims_list:
        plan = SweepPlan(scenario, [DETECTOR_HYBRID], [ABLATION_SYMMETRY_ON], list(hidden),
                         train_cfg, [user], fresh_channel)
        bers, seconds = [], []
        for trial, record in enumerate(records):
            train_set, detect_set = _training_sets(record, user, ABLATION_SYMMETRY_ON)
            weights = lls.fit(train_set)
            estimates, elapsed = _network_detector(plan, weights.w, train_set, detect_set, trial, user, plain=False)
            bers.append(symbol_ber(estimates, record.data_symbols[:, user - 1]))
            seconds.append(elapsed)
        trainable = sum(fan_in * fan_out + fan_out for fan_in, fan_out in
                        zip([2 * scenario.num_antennas] + list(hidden[:-1]), hidden)) + hidden[-1]
        rows.append({
            "dims": "x".join(str(d) for d in [2 * scenario.num_antennas] + list(hidden)),
            "trainable_params": trainable,
            "trials": trials,
            "mean_ber": float(np.mean(bers)),
            "sd_ber": float(np.std(bers, ddof=0)),
            "mean_train_seconds": float(np.mean(seconds)),
        })
        logger.info("dims %s: mean BER %.4e", rows[-1]["dims"], rows[-1]["mean_ber"])
    return pd.DataFrame(rows)
