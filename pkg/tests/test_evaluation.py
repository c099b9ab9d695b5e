import math
from statistics import median

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from config.constants import (
    ABLATION_SYMMETRY_HALF, ABLATION_SYMMETRY_OFF, ABLATION_SYMMETRY_ON,
    DETECTOR_HYBRID, DETECTOR_LLS, DETECTOR_PLAIN, NONLINEAR_RX_GAIN
)
from core import evaluation
from core.channel_sim import ScenarioConfig
from core.errors import ConfigError, DimensionError, IllConditionedError
from core.evaluation import (
    bit_error_rate, hard_decision_qpsk, run_dims_study, run_noise_sweep, symbol_ber
)
from core.hybrid_nn import TrainConfig

bit_arrays = arrays(np.int8, st.tuples(st.integers(1, 40), st.just(2)), elements=st.integers(0, 1))


@pytest.mark.parametrize("symbol,bits", [
    (0.9 + 0.8j, [0, 0]),
    (-0.1 - 2j, [1, 1]),
    (0.3 - 0.2j, [0, 1]),
    (-0.3 + 0.2j, [1, 0]),
    (0.0 + 0.0j, [0, 0]),
])
def test_hard_decision_quadrants(symbol, bits):
    np.testing.assert_array_equal(hard_decision_qpsk(np.array([symbol])), [bits])


def test_bit_error_rate_examples():
    bits = np.zeros((50, 2), dtype=np.int8)
    assert bit_error_rate(bits, bits) == 0.0
    assert bit_error_rate(1 - bits, bits) == 1.0
    wrong = bits.copy()
    wrong[17, 1] = 1
    assert bit_error_rate(wrong, bits) == pytest.approx(0.01)


def test_bit_error_rate_rejects_bad_shapes():
    with pytest.raises(DimensionError):
        bit_error_rate(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(DimensionError):
        bit_error_rate(np.zeros((0, 2)), np.zeros((0, 2)))


@settings(max_examples=50)
@given(a=bit_arrays)
def test_bit_error_rate_complement_symmetry(a):
    b = np.flip(a, axis=0)
    assert bit_error_rate(a, b) == bit_error_rate(b, a)
    assert bit_error_rate(a, b) + bit_error_rate(1 - a, b) == pytest.approx(1.0)


def test_symbol_ber_on_constellation():
    symbols = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / math.sqrt(2)
    assert symbol_ber(symbols, symbols) == 0.0
    assert symbol_ber(-symbols, symbols) == 1.0


def test_noiseless_lls_sweep_is_error_free(noiseless_scenario):
    report = run_noise_sweep(noiseless_scenario, [math.inf], trials=1, detectors=[DETECTOR_LLS])
    assert len(report.rows) == 2
    assert (report.rows["mean_ber"] == 0.0).all()
    assert (report.rows["total_bits"] == 2 * noiseless_scenario.data_symbols).all()


def test_sweep_rows_per_cell(small_scenario):
    grid = [0.0, 10.0, 20.0]
    report = run_noise_sweep(small_scenario, grid, trials=2, detectors=[DETECTOR_LLS],
                             ablations=[ABLATION_SYMMETRY_ON, ABLATION_SYMMETRY_OFF], users=[1, 4])
    assert len(report.rows) == len(grid) * 2 * 2
    assert (report.rows.groupby(["user", "detector", "ablation"]).size() == len(grid)).all()
    assert (report.rows["trials"] == 2).all()
    assert list(report.rows.columns) == [
        "snr_db", "user", "detector", "ablation", "trials", "mean_ber", "sd_ber", "total_bits"
    ]


def test_sweep_is_deterministic(small_scenario, fast_train):
    kwargs = dict(trials=2, detectors=[DETECTOR_LLS, DETECTOR_HYBRID, DETECTOR_PLAIN],
                  ablations=[ABLATION_SYMMETRY_ON, ABLATION_SYMMETRY_HALF], hidden_dims=[8],
                  train_cfg=fast_train, users=[2])
    first = run_noise_sweep(small_scenario, [10.0], **kwargs)
    second = run_noise_sweep(small_scenario, [10.0], **kwargs)
    pd.testing.assert_frame_equal(first.rows, second.rows)


def test_worker_threads_do_not_change_results(small_scenario, fast_train):
    kwargs = dict(trials=3, detectors=[DETECTOR_LLS, DETECTOR_HYBRID], hidden_dims=[8],
                  train_cfg=fast_train, users=[3])
    serial = run_noise_sweep(small_scenario, [15.0], **kwargs)
    threaded = run_noise_sweep(small_scenario, [15.0], workers=3, **kwargs)
    pd.testing.assert_frame_equal(serial.rows, threaded.rows)


def test_sd_is_population_sd(small_scenario, monkeypatch):
    bers = iter([0.1, 0.3])

    def fake_trial(plan, trial):
        return [dict(user=1, detector=DETECTOR_LLS, ablation=ABLATION_SYMMETRY_ON,
                     ber=next(bers), bits=10, train_seconds=0.0)]

    monkeypatch.setattr(evaluation, "run_trial", fake_trial)
    row = run_noise_sweep(small_scenario, [5.0], trials=2, users=[1]).rows.iloc[0]
    assert row["mean_ber"] == pytest.approx(0.2)
    assert row["sd_ber"] == pytest.approx(0.1)
    assert row["total_bits"] == 20


def test_ill_conditioned_fit_gives_nan(small_scenario, monkeypatch):
    def singular(train):
        raise IllConditionedError("rank 3 < 8", gram_condition=math.inf)

    monkeypatch.setattr(evaluation.lls, "fit", singular)
    report = run_noise_sweep(small_scenario, [10.0], trials=1, users=[1])
    assert report.rows["mean_ber"].isna().all()
    assert (report.rows["trials"] == 0).all()


def test_sweep_rejects_unknown_choices(small_scenario):
    with pytest.raises(ConfigError):
        run_noise_sweep(small_scenario, [10.0], trials=1, detectors=["MMSE"])
    with pytest.raises(ConfigError):
        run_noise_sweep(small_scenario, [10.0], trials=1, ablations=["mirror"])
    with pytest.raises(ConfigError):
        run_noise_sweep(small_scenario, [10.0], trials=1, users=[7])
    with pytest.raises(ConfigError):
        run_noise_sweep(small_scenario, [], trials=1)


def test_report_cell_and_metadata(small_scenario):
    report = run_noise_sweep(small_scenario, [20.0], trials=1, detectors=[DETECTOR_LLS], users=[4])
    assert report.cell(20.0, 4, DETECTOR_LLS)["trials"] == 1
    with pytest.raises(KeyError):
        report.cell(20.0, 1, DETECTOR_LLS)
    assert report.metadata["seed"] == small_scenario.seed
    assert "note" in report.metadata


def test_dims_study_table(small_scenario, fast_train):
    table = run_dims_study(small_scenario, [[4], [8, 8]], trials=2, train_cfg=fast_train, user=4)
    assert list(table["dims"]) == ["8x4", "8x8x8"]
    assert list(table["trainable_params"]) == [8 * 4 + 4 + 4, 8 * 8 + 8 + 8 * 8 + 8 + 8]
    assert (table["trials"] == 2).all()
    assert (table["mean_train_seconds"] > 0).all()


def test_symmetry_off_trains_independent_slots(small_scenario, fast_train, monkeypatch):
    calls = []
    original = evaluation.hybrid_nn.train

    def recording_train(params, train_set, cfg):
        calls.append((params.dims, params.num_outputs, train_set.design.shape[0], train_set.targets.ndim, cfg))
        return original(params, train_set, cfg)

    monkeypatch.setattr(evaluation.hybrid_nn, "train", recording_train)
    report = run_noise_sweep(small_scenario, [10.0], trials=1, detectors=[DETECTOR_HYBRID],
                             ablations=[ABLATION_SYMMETRY_OFF, ABLATION_SYMMETRY_HALF],
                             hidden_dims=[8], train_cfg=fast_train, users=[2])

    off, half = calls[:2], calls[2:]
    assert [c[:4] for c in off] == [([8, 6], 1, 64, 1), ([8, 6], 1, 64, 1)]
    assert [c[:4] for c in half] == [([8, 8], 1, 64, 1)]
    # same Adam schedule, separate shuffles
    assert {c[4].epochs for c in calls} == {fast_train.epochs}
    assert off[0][4].shuffle_seed != off[1][4].shuffle_seed
    assert report.rows["trials"].tolist() == [1, 1]


def nonlinear_scenario(seed):
    return ScenarioConfig(rx_nonlinearity_gain=NONLINEAR_RX_GAIN, snr_db=35.0, seed=seed)


@pytest.mark.slow
def test_symmetry_ablation_ordering():
    ablations = [ABLATION_SYMMETRY_ON, ABLATION_SYMMETRY_OFF, ABLATION_SYMMETRY_HALF]
    results = {ablation: [] for ablation in ablations}
    for seed in range(10):
        report = run_noise_sweep(nonlinear_scenario(seed), [35.0], trials=1, detectors=[DETECTOR_HYBRID],
                                 ablations=ablations, users=[4])
        for ablation in ablations:
            results[ablation].append(report.cell(35.0, 4, DETECTOR_HYBRID, ablation)["mean_ber"])

    assert median(results[ABLATION_SYMMETRY_ON]) <= median(results[ABLATION_SYMMETRY_OFF])
    assert median(results[ABLATION_SYMMETRY_HALF]) < median(results[ABLATION_SYMMETRY_OFF])


@pytest.mark.slow
def test_hybrid_beats_lls_at_high_snr():
    grid = [15.0, 25.0, 35.0]
    results = {(snr, d): [] for snr in grid for d in (DETECTOR_LLS, DETECTOR_HYBRID)}
    for seed in range(10):
        report = run_noise_sweep(nonlinear_scenario(seed), grid, trials=1,
                                 detectors=[DETECTOR_LLS, DETECTOR_HYBRID], users=[4])
        for key in results:
            results[key].append(report.cell(key[0], 4, key[1])["mean_ber"])

    assert median(results[35.0, DETECTOR_HYBRID]) < median(results[35.0, DETECTOR_LLS])
    low_nn, low_lls = results[15.0, DETECTOR_HYBRID], results[15.0, DETECTOR_LLS]
    assert abs(np.mean(low_nn) - np.mean(low_lls)) <= np.std(low_nn) + np.std(low_lls)


@pytest.mark.slow
def test_hybrid_beats_lls_over_trials():
    report = run_noise_sweep(nonlinear_scenario(3), [35.0], trials=10,
                             detectors=[DETECTOR_LLS, DETECTOR_HYBRID], users=[4], train_cfg=TrainConfig())
    assert report.cell(35.0, 4, DETECTOR_HYBRID)["mean_ber"] < report.cell(35.0, 4, DETECTOR_LLS)["mean_ber"]
