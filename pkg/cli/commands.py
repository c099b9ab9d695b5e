import argparse
import logging
import math
import os
from dataclasses import replace
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from config.column_config import COLUMN_CONFIG
from config.constants import (
    DETECTOR_LLS, DETECTOR_HYBRID, EXIT_OK, DEFAULT_SEED
)
from config.experiment import ExperimentConfig, digest_of, load_config, parse_snr
from core import hybrid_nn, lls
from core.channel_sim import synthesize
from core.data_processor import DataProcessor
from core.errors import ConfigError
from core.evaluation import hard_decision_qpsk, run_dims_study, run_noise_sweep, bit_error_rate
from core.fused_inference import bench_compare, build_plan
from core.iq_transform import widen_dataset, widen_targets
from utils.report_utils import export_xlsx, write_csv, write_sidecar
from utils.rng import substream

logger = logging.getLogger(__name__)


def parse_snr_grid(text: str) -> List[float]:
    """
    Parse 'start:stop:step' (stop inclusive) or a comma-separated list

    '0:40:5' gives 9 values; 'inf' is accepted in lists.
    """
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"SNR range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0.0 or stop < start:
            raise ConfigError(f"SNR range needs step > 0 and stop >= start, got {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    values = [parse_snr(v) for v in text.split(",") if v.strip()]
    if not values:
        raise ConfigError("SNR list is empty")
    return values


def parse_int_list(text: str, name: str) -> List[int]:
    try:
        return [int(v) for v in text.replace("x", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of integers, got {text!r}")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Load --config, apply environment overrides, then --seed"""
    config = load_config(getattr(args, "config", None) or "default").with_env_overrides()
    if getattr(args, "seed", None) is not None:
        config = config.with_seed(args.seed)
    return config


def _output_path(config: ExperimentConfig, explicit: Optional[str], default_name: str) -> str:
    return explicit or os.path.join(config.output.directory, default_name)


class SimulateCommand:
    """simulate: config -> dataset file"""

    @staticmethod
    def register(subparsers) -> None:
        parser = subparsers.add_parser("simulate", help="Simulate one transmission and write a dataset file")
        parser.add_argument("--config", default="default", help="Config JSON file or preset name (default, nonlinear, noiseless)")
        parser.add_argument("--seed", type=int, help="Override scenario.seed")
        parser.add_argument("--snr", help="Override scenario.snr_db (dB or 'inf')")
        parser.add_argument("--output", help="Dataset path (default: <output dir>/dataset.noma)")
        parser.set_defaults(command=SimulateCommand.run)

    @staticmethod
    def run(args: argparse.Namespace) -> int:
        config = resolve_config(args)
        scenario = config.scenario
        if args.snr is not None:
            scenario = replace(scenario, snr_db=parse_snr(args.snr))
        record = synthesize(scenario)
        path = _output_path(config, args.output, "dataset.noma")
        DataProcessor.write_dataset(record, path)
        write_sidecar(path, {"config_digest": config.digest(), "config": config.to_dict()})
        return EXIT_OK


class TrainCommand:
    """train: dataset -> detector params + loss trace CSV"""

    @staticmethod
    def register(subparsers) -> None:
        parser = subparsers.add_parser("train", help="Train hybrid detectors on a dataset's training phase")
        parser.add_argument("--dataset", required=True, help="Dataset file written by simulate")
        parser.add_argument("--config", default="default", help="Config JSON file or preset name for network/train settings")
        parser.add_argument("--seed", type=int, help="Override the seed of network initialization")
        parser.add_argument("--users", help="Comma-separated 1-based users (default: all)")
        parser.add_argument("--output", help="Params archive (default: <output dir>/detector.npz)")
        parser.add_argument("--loss-csv", help="Loss trace CSV (default: <output dir>/loss_trace.csv)")
        parser.set_defaults(command=TrainCommand.run)

    @staticmethod
    def run(args: argparse.Namespace) -> int:
        config = resolve_config(args)
        record = DataProcessor.read_dataset(args.dataset)
        users = parse_int_list(args.users, "--users") if args.users else list(range(1, record.num_users + 1))
        for user in users:
            if not 1 <= user <= record.num_users:
                raise ConfigError(f"User {user} outside 1..{record.num_users}")

        # Step 1: One batched LLS fit for all users
        train_design = widen_dataset(record.train_rx).design
        all_weights = lls.fit_all(train_design, widen_targets(record.train_symbols))

        # Step 2: Train one network per user on top of its LLS branch
        dims = [train_design.shape[1]] + list(config.network.hidden_dims)
        params_by_user: Dict[int, hybrid_nn.HybridNetParams] = {}
        loss_rows = []
        for user in users:
            train_set = widen_dataset(record.train_rx, record.train_symbols[:, user - 1], user)
            params = hybrid_nn.init_params(dims, all_weights[user - 1], substream(config.scenario.seed, "init", 0, user))
            shuffle_seed = int(substream(config.scenario.seed, "shuffle", 0, user).integers(2 ** 63))
            result = hybrid_nn.train(params, train_set, replace(config.train, shuffle_seed=shuffle_seed))
            params_by_user[user] = result.params
            trace = [result.initial_loss] + result.loss_trace
            loss_rows.extend({"user": user, "epoch": epoch, "loss": loss} for epoch, loss in enumerate(trace))
            logger.info("User %d: loss %.4e -> %.4e (epoch %d kept) in %.2f s",
                        user, trace[0], result.final_loss, result.best_epoch, result.seconds)

        digest = config.digest()
        params_path = _output_path(config, args.output, "detector.npz")
        DataProcessor.save_params(params_path, params_by_user, {
            "config_digest": digest,
            "dims": dims,
            "dataset": os.path.basename(args.dataset),
        })
        write_csv(pd.DataFrame(loss_rows), _output_path(config, args.loss_csv, "loss_trace.csv"), "loss_trace", digest)
        return EXIT_OK


class DetectCommand:
    """detect: dataset + params -> symbol decisions + BER summary"""

    @staticmethod
    def register(subparsers) -> None:
        parser = subparsers.add_parser("detect", help="Detect the data phase with trained detectors")
        parser.add_argument("--dataset", required=True, help="Dataset file written by simulate")
        parser.add_argument("--params", required=True, help="Params archive written by train")
        parser.add_argument("--output-dir", help="Directory for decisions.csv and ber_summary.csv (default: config output dir)")
        parser.add_argument("--config", default="default", help=argparse.SUPPRESS)
        parser.set_defaults(command=DetectCommand.run)

    @staticmethod
    def run(args: argparse.Namespace) -> int:
        config = resolve_config(args)
        record = DataProcessor.read_dataset(args.dataset)
        params_by_user, meta = DataProcessor.load_params(args.params)
        DataProcessor.check_compatible(params_by_user, record)

        detect_set = widen_dataset(record.data_rx)
        bits = record.data_rx.shape[0] * 2
        decision_frames, summary_rows = [], []
        for user, params in sorted(params_by_user.items()):
            truth = hard_decision_qpsk(record.data_symbols[:, user - 1])
            estimates = {
                DETECTOR_LLS: lls.predict(lls.LlsWeights(w=np.asarray(params.w0), user_index=user), detect_set),
                DETECTOR_HYBRID: hybrid_nn.detect(params, detect_set),
            }
            for detector, symbols in estimates.items():
                decided = hard_decision_qpsk(symbols)
                decision_frames.append(pd.DataFrame({
                    "user": user,
                    "symbol": np.arange(symbols.shape[0]),
                    "detector": detector,
                    "re": symbols.real,
                    "im": symbols.imag,
                    "bit0": decided[:, 0],
                    "bit1": decided[:, 1],
                }))
                ber = bit_error_rate(decided, truth)
                summary_rows.append({
                    "user": user,
                    "detector": detector,
                    "ber": ber,
                    "bit_errors": int(np.count_nonzero(decided != truth)),
                    "total_bits": bits,
                })
                logger.info("User %d %s: BER %.4e", user, detector, ber)

        digest = meta.get("config_digest", config.digest())
        directory = args.output_dir or config.output.directory
        write_csv(pd.concat(decision_frames, ignore_index=True), os.path.join(directory, "decisions.csv"), "decisions", digest)
        write_csv(pd.DataFrame(summary_rows), os.path.join(directory, "ber_summary.csv"), "ber_summary", digest)
        return EXIT_OK


class SweepCommand:
    """sweep: config -> BER report CSV (noise sweep and symmetry ablation)"""

    @staticmethod
    def register(subparsers) -> None:
        parser = subparsers.add_parser("sweep", help="Run the BER noise sweep / symmetry ablation")
        parser.add_argument("--config", default="default", help="Config JSON file or preset name")
        parser.add_argument("--seed", type=int, help="Override scenario.seed (master seed)")
        parser.add_argument("--snr", help="SNR grid 'start:stop:step' (inclusive) or list '15,25,inf'")
        parser.add_argument("--trials", type=int, help="Noise realizations per SNR")
        parser.add_argument("--detectors", help="Comma-separated subset of LLS,HybridNN,PlainNN")
        parser.add_argument("--ablations", help="Comma-separated subset of symmetry_on,symmetry_off,symmetry_on_half_data")
        parser.add_argument("--users", help="Comma-separated 1-based users (default: config or all)")
        parser.add_argument("--fixed-channel", action="store_true", help="Keep one channel realization across trials")
        parser.add_argument("--workers", type=int, help="Threads running trials concurrently")
        parser.add_argument("--output", help="Report CSV (default: <output dir>/ber_report.csv)")
        parser.add_argument("--xlsx", help="Also export the report to this Excel file")
        parser.set_defaults(command=SweepCommand.run)

    @staticmethod
    def run(args: argparse.Namespace) -> int:
        config = resolve_config(args)
        sweep = config.sweep
        snr_list = parse_snr_grid(args.snr) if args.snr else list(sweep.snr_db)
        detectors = args.detectors.split(",") if args.detectors else list(sweep.detectors)
        ablations = args.ablations.split(",") if args.ablations else list(sweep.ablations)
        users = parse_int_list(args.users, "--users") if args.users else sweep.users
        trials = args.trials if args.trials is not None else sweep.trials

        report = run_noise_sweep(
            config.scenario,
            snr_list,
            trials,
            detectors=detectors,
            ablations=ablations,
            hidden_dims=config.network.hidden_dims,
            train_cfg=config.train,
            users=users,
            fresh_channel=sweep.fresh_channel and not args.fixed_channel,
            workers=args.workers or sweep.workers,
        )
        digest = digest_of({
            "config": config.to_dict(), "snr": [str(s) for s in snr_list], "trials": trials,
            "detectors": detectors, "ablations": ablations, "users": users,
            "fixed_channel": bool(args.fixed_channel),
        })
        report.metadata["config_digest"] = digest

        path = _output_path(config, args.output, "ber_report.csv")
        write_csv(report.rows, path, "ber_report", digest)
        write_sidecar(path, report.metadata)
        if args.xlsx:
            export_xlsx(report.rows[COLUMN_CONFIG["ber_report"]["columns"]], args.xlsx, "detector", digest)
        return EXIT_OK


class DimsCommand:
    """dims: BER versus training time for several network dimensions"""

    @staticmethod
    def register(subparsers) -> None:
        parser = subparsers.add_parser("dims", help="Compare hidden-layer dimensions (BER and training time)")
        parser.add_argument("--config", default="default", help="Config JSON file or preset name")
        parser.add_argument("--seed", type=int, help="Override scenario.seed")
        parser.add_argument("--dims", help="Semicolon-separated hidden widths, e.g. '16;32,32;64,64,64'")
        parser.add_argument("--trials", type=int, help="Noise realizations per configuration")
        parser.add_argument("--snr", help="SNR in dB (default: scenario.snr_db)")
        parser.add_argument("--user", type=int, default=4, help="1-based signal of interest")
        parser.add_argument("--output", help="CSV path (default: <output dir>/dims_study.csv)")
        parser.add_argument("--xlsx", help="Also export the table to this Excel file")
        parser.set_defaults(command=DimsCommand.run)

    @staticmethod
    def run(args: argparse.Namespace) -> int:
        config = resolve_config(args)
        scenario = config.scenario
        if args.snr is not None:
            scenario = replace(scenario, snr_db=parse_snr(args.snr))
        dims_list = (
            [parse_int_list(d, "--dims") for d in args.dims.split(";") if d.strip()]
            if args.dims else config.sweep.dims_list
        )
        trials = args.trials if args.trials is not None else config.sweep.trials
        table = run_dims_study(scenario, dims_list, trials, config.train, user=args.user,
                               fresh_channel=config.sweep.fresh_channel)
        digest = digest_of({"config": config.to_dict(), "dims": dims_list, "trials": trials,
                            "snr": str(scenario.snr_db), "user": args.user})
        path = _output_path(config, args.output, "dims_study.csv")
        write_csv(table, path, "dims_study", digest)
        if args.xlsx:
            export_xlsx(table.assign(study="dims"), args.xlsx, "study", digest)
        return EXIT_OK


class BenchCommand:
    """bench: dims/batch -> fused inference benchmark CSV"""

    @staticmethod
    def register(subparsers) -> None:
        parser = subparsers.add_parser("bench", help="Benchmark fused, naive and fallback inference")
        parser.add_argument("--dims", default="8,64,64,64", help="Network dims 2M,L_1,...,L_N")
        parser.add_argument("--batch", type=int, default=3840, help="Rows per evaluation")
        parser.add_argument("--repeats", type=int, default=20, help="Timed repeats per path (median reported)")
        parser.add_argument("--dtype", choices=["float64", "float32"], default="float64", help="Fused path precision")
        parser.add_argument("--threads", type=int, help="Tile worker threads of the fused path (default: NOMA_THREADS or 1)")
        parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Seed of parameters and inputs")
        parser.add_argument("--output", help="CSV path (default: <output dir>/bench.csv)")
        parser.set_defaults(command=BenchCommand.run)

    @staticmethod
    def run(args: argparse.Namespace) -> int:
        config = load_config("default").with_env_overrides()
        dims = parse_int_list(args.dims, "--dims")
        if len(dims) < 2:
            raise ConfigError(f"--dims needs the input width and at least one hidden width, got {args.dims!r}")
        rng = substream(args.seed, "init", 0)
        params = hybrid_nn.init_params(dims, rng.standard_normal(dims[0]), rng, zero_final=False)
        threads = args.threads or config.sweep.workers
        plan = build_plan(params, dtype=args.dtype)
        report = bench_compare(plan, args.batch, repeats=args.repeats, seed=args.seed, threads=threads)

        digest = digest_of({"dims": dims, "batch": args.batch, "repeats": args.repeats,
                            "dtype": args.dtype, "threads": threads, "seed": args.seed})
        report.metadata["config_digest"] = digest
        path = _output_path(config, args.output, "bench.csv")
        write_csv(pd.DataFrame(report.rows), path, "bench", digest)
        write_sidecar(path, report.metadata)
        return EXIT_OK


COMMANDS = [SimulateCommand, TrainCommand, DetectCommand, SweepCommand, DimsCommand, BenchCommand]
