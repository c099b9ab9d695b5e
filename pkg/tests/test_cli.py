import json

import pandas as pd
import pytest

from app import main, run_cli
from cli.commands import parse_snr_grid
from config.constants import (
    EXIT_CONFIG, EXIT_DATASET_FORMAT, EXIT_DIMENSION_CONFLICT, EXIT_MISSING_FILE, EXIT_OK, EXIT_USAGE
)
from core.errors import ConfigError


def run_pipeline(config, directory, seed=5):
    dataset = str(directory / "dataset.noma")
    params = str(directory / "detector.npz")
    assert main(["-q", "simulate", "--config", config, "--seed", str(seed), "--output", dataset]) == EXIT_OK
    assert main(["-q", "train", "--config", config, "--seed", str(seed), "--dataset", dataset,
                 "--output", params, "--loss-csv", str(directory / "loss_trace.csv")]) == EXIT_OK
    assert main(["-q", "detect", "--dataset", dataset, "--params", params,
                 "--output-dir", str(directory)]) == EXIT_OK
    return directory


def test_simulate_train_detect(tmp_path, small_config_file):
    out = run_pipeline(str(small_config_file), tmp_path / "a")
    summary = pd.read_csv(out / "ber_summary.csv")
    assert list(summary.columns) == ["user", "detector", "ber", "bit_errors", "total_bits", "config_digest"]
    assert set(summary["detector"]) == {"LLS", "HybridNN"}
    assert sorted(summary["user"].unique()) == [1, 2, 3]
    assert summary["ber"].between(0, 1).all()

    decisions = pd.read_csv(out / "decisions.csv")
    assert len(decisions) == 3 * 2 * 64
    loss = pd.read_csv(out / "loss_trace.csv")
    assert list(loss[loss["user"] == 1]["epoch"]) == [0, 1, 2]
    assert summary["config_digest"].nunique() == 1
    assert (tmp_path / "a" / "dataset.noma.meta.json").exists()


def test_pipeline_is_byte_identical(tmp_path, small_config_file):
    first = run_pipeline(str(small_config_file), tmp_path / "one")
    second = run_pipeline(str(small_config_file), tmp_path / "two")
    for name in ("loss_trace.csv", "decisions.csv", "ber_summary.csv", "dataset.noma"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_seed_override_changes_dataset(tmp_path, small_config_file):
    a, b = tmp_path / "a.noma", tmp_path / "b.noma"
    assert main(["-q", "simulate", "--config", str(small_config_file), "--seed", "1", "--output", str(a)]) == EXIT_OK
    assert main(["-q", "simulate", "--config", str(small_config_file), "--seed", "2", "--output", str(b)]) == EXIT_OK
    assert a.read_bytes() != b.read_bytes()


def test_detect_with_mismatched_antennas(tmp_path, small_config_file):
    run_pipeline(str(small_config_file), tmp_path)
    wide = json.loads(small_config_file.read_text(encoding="utf-8"))
    wide["scenario"]["num_antennas"] = 8
    wide_config = tmp_path / "wide.json"
    wide_config.write_text(json.dumps(wide), encoding="utf-8")
    wide_dataset = str(tmp_path / "wide.noma")
    assert main(["-q", "simulate", "--config", str(wide_config), "--output", wide_dataset]) == EXIT_OK

    code = main(["-q", "detect", "--dataset", wide_dataset, "--params", str(tmp_path / "detector.npz"),
                 "--output-dir", str(tmp_path / "wide")])
    assert code == EXIT_DIMENSION_CONFLICT


def test_sweep_grid_rows(tmp_path, small_config_file):
    report = tmp_path / "ber.csv"
    code = main(["-q", "sweep", "--config", str(small_config_file), "--snr", "0:40:5", "--trials", "20",
                 "--users", "1,2", "--output", str(report)])
    assert code == EXIT_OK
    rows = pd.read_csv(report)
    assert (rows.groupby(["user", "detector", "ablation"]).size() == 9).all()
    assert sorted(rows["snr_db"].unique()) == [0, 5, 10, 15, 20, 25, 30, 35, 40]
    assert (rows["trials"] == 20).all()
    meta = json.loads((tmp_path / "ber.csv.meta.json").read_text(encoding="utf-8"))
    assert meta["config_digest"] == rows["config_digest"].iloc[0]


def test_sweep_excel_export(tmp_path, small_config_file):
    xlsx = tmp_path / "ber.xlsx"
    code = main(["-q", "sweep", "--config", str(small_config_file), "--snr", "10,inf", "--trials", "1",
                 "--detectors", "LLS", "--ablations", "symmetry_on,symmetry_off",
                 "--output", str(tmp_path / "ber.csv"), "--xlsx", str(xlsx)])
    assert code == EXIT_OK
    sheets = pd.read_excel(xlsx, sheet_name=None, engine="openpyxl")
    assert set(sheets) == {"LLS", "meta"}
    assert len(sheets["LLS"]) == 2 * 3 * 2


def test_dims_command(tmp_path, small_config_file):
    out = tmp_path / "dims.csv"
    code = main(["-q", "dims", "--config", str(small_config_file), "--dims", "4;8,8", "--trials", "1",
                 "--user", "2", "--output", str(out)])
    assert code == EXIT_OK
    table = pd.read_csv(out)
    assert list(table["dims"]) == ["8x4", "8x8x8"]


def test_bench_command(tmp_path):
    out = tmp_path / "bench.csv"
    code = main(["-q", "bench", "--dims", "8,16,16", "--batch", "64", "--repeats", "2", "--output", str(out)])
    assert code == EXIT_OK
    table = pd.read_csv(out)
    assert list(table["path"]) == ["fused", "naive", "fallback"]
    assert (table["ns_per_sample"] > 0).all()
    meta = json.loads((tmp_path / "bench.csv.meta.json").read_text(encoding="utf-8"))
    assert meta["selected_path"] == "fused"
    assert "platform" in meta


def test_missing_dataset(tmp_path):
    code = main(["-q", "detect", "--dataset", str(tmp_path / "absent.noma"), "--params", str(tmp_path / "p.npz")])
    assert code == EXIT_MISSING_FILE


def test_bad_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"scenario": {"antennas": 4}}), encoding="utf-8")
    assert main(["-q", "simulate", "--config", str(path), "--output", str(tmp_path / "d.noma")]) == EXIT_CONFIG
    assert main(["-q", "simulate", "--config", "no-such-preset"]) == EXIT_CONFIG


def test_corrupted_dataset(tmp_path, small_config_file):
    dataset = tmp_path / "d.noma"
    assert main(["-q", "simulate", "--config", str(small_config_file), "--output", str(dataset)]) == EXIT_OK
    dataset.write_bytes(b"XXXXX" + dataset.read_bytes()[5:])
    code = main(["-q", "train", "--config", str(small_config_file), "--dataset", str(dataset),
                 "--output", str(tmp_path / "p.npz")])
    assert code == EXIT_DATASET_FORMAT


def test_output_dir_from_environment(tmp_path, small_config_file, monkeypatch):
    monkeypatch.setenv("NOMA_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["-q", "simulate", "--config", str(small_config_file)]) == EXIT_OK
    assert (tmp_path / "env" / "dataset.noma").exists()


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["simulate", "--no-such-flag"]) == EXIT_USAGE


def test_help_lists_flags(capsys):
    assert main(["sweep", "--help"]) == EXIT_OK
    text = capsys.readouterr().out
    for flag in ("--snr", "--trials", "--detectors", "--ablations", "--fixed-channel", "--workers", "--xlsx"):
        assert flag in text


@pytest.mark.parametrize("text,expected", [
    ("0:40:5", [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]),
    ("15,25,35", [15.0, 25.0, 35.0]),
    ("inf", [float("inf")]),
    ("0:1:0.25", [0.0, 0.25, 0.5, 0.75, 1.0]),
])
def test_parse_snr_grid(text, expected):
    assert parse_snr_grid(text) == expected


@pytest.mark.parametrize("text", ["0:40", "10:0:5", "0:10:0", ","])
def test_parse_snr_grid_rejects(text):
    with pytest.raises(ConfigError):
        parse_snr_grid(text)


def test_run_cli_returns_exit_code(tmp_path):
    assert run_cli(["-q", "bench", "--dims", "8,4", "--batch", "16", "--repeats", "1",
                    "--output", str(tmp_path / "bench.csv")]) == EXIT_OK
    assert run_cli(["-q", "train", "--dataset", str(tmp_path / "absent.noma")]) == EXIT_MISSING_FILE
