"""
Experiment configuration

An ExperimentConfig is a tree of dataclasses loaded from a JSON document.
Unknown keys at any level are rejected, missing keys fall back to the
defaults in config.constants.
"""
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

from config.constants import (
    DEFAULT_HIDDEN_DIMS, DEFAULT_SNR_LIST, DEFAULT_TRIALS, DEFAULT_OUTPUT_DIR,
    DETECTOR_LLS, DETECTOR_HYBRID, DETECTOR_PLAIN, ABLATIONS, ABLATION_SYMMETRY_ON,
    NONLINEAR_RX_GAIN, ENV_OUTPUT_DIR, ENV_THREADS
)
from core.channel_sim import Modulation, ScenarioConfig
from core.errors import ConfigError
from core.hybrid_nn import TrainConfig

INFINITE_SNR_NAMES = {"inf", "+inf", "infinite", "infinity"}


def parse_snr(value: Union[str, float, int]) -> float:
    """Parse an SNR in dB; 'inf' or 'infinite' mean no added noise"""
    if isinstance(value, str):
        if value.strip().lower() in INFINITE_SNR_NAMES:
            return math.inf
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"Invalid SNR value: {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or math.isnan(value):
        raise ConfigError(f"Invalid SNR value: {value!r}")
    return float(value)


def format_snr(value: float) -> Union[str, float]:
    return "inf" if math.isinf(value) else value


def digest_of(data: Dict[str, Any]) -> str:
    """First 16 hex digits of SHA-256 over the canonical (sorted-key) JSON form"""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class NetworkConfig:
    hidden_dims: List[int] = field(default_factory=lambda: list(DEFAULT_HIDDEN_DIMS))

    def __post_init__(self) -> None:
        if not self.hidden_dims or any(int(d) < 1 for d in self.hidden_dims):
            raise ConfigError(f"hidden_dims must be a nonempty list of positive widths, got {self.hidden_dims}")


@dataclass(frozen=True)
class SweepConfig:
    snr_db: List[float] = field(default_factory=lambda: list(DEFAULT_SNR_LIST))
    trials: int = DEFAULT_TRIALS
    detectors: List[str] = field(default_factory=lambda: [DETECTOR_LLS, DETECTOR_HYBRID])
    ablations: List[str] = field(default_factory=lambda: [ABLATION_SYMMETRY_ON])
    users: Optional[List[int]] = None
    fresh_channel: bool = True
    workers: int = 1
    dims_list: List[List[int]] = field(default_factory=lambda: [[16], [32, 32], [64, 64, 64], [128, 128, 128]])

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError(f"sweep.trials must be >= 1, got {self.trials}")
        if self.workers < 1:
            raise ConfigError(f"sweep.workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = DEFAULT_OUTPUT_DIR


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Complete experiment description

    Attributes:
        scenario: Simulated transmission parameters
        network: Hidden layer widths
        train: Adam training hyper-parameters
        sweep: Noise sweep / ablation / dims study parameters
        output: Artifact locations
    """
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    SECTIONS = {
        "scenario": ScenarioConfig,
        "network": NetworkConfig,
        "train": TrainConfig,
        "sweep": SweepConfig,
        "output": OutputConfig,
    }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Build a config from a nested dictionary

        Raises:
            ConfigError: Unknown section or key, or an invalid value
        """
        if not isinstance(data, dict):
            raise ConfigError("Experiment config must be a JSON object")
        unknown = set(data) - set(cls.SECTIONS)
        if unknown:
            raise ConfigError(f"Unknown config sections: {', '.join(sorted(unknown))}")

        sections = {}
        for name, section_cls in cls.SECTIONS.items():
            values = dict(data.get(name) or {})
            allowed = {f.name for f in dataclasses.fields(section_cls)}
            unknown = set(values) - allowed
            if unknown:
                raise ConfigError(f"Unknown keys in '{name}': {', '.join(sorted(unknown))}")
            if name == "scenario" and "snr_db" in values:
                values["snr_db"] = parse_snr(values["snr_db"])
            if name == "sweep" and "snr_db" in values:
                values["snr_db"] = [parse_snr(v) for v in values["snr_db"]]
            try:
                sections[name] = section_cls(**values)
            except (TypeError, ValueError) as e:
                if isinstance(e, ConfigError):
                    raise
                raise ConfigError(f"Invalid '{name}' section: {e}")
        return cls(**sections)

    def to_dict(self) -> Dict[str, Any]:
        data = {name: dataclasses.asdict(getattr(self, name)) for name in self.SECTIONS}
        data["scenario"]["modulation"] = Modulation(self.scenario.modulation).value
        data["scenario"]["snr_db"] = format_snr(self.scenario.snr_db)
        data["sweep"]["snr_db"] = [format_snr(v) for v in self.sweep.snr_db]
        return data

    def digest(self) -> str:
        return digest_of(self.to_dict())

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, scenario=dataclasses.replace(self.scenario, seed=int(seed)))

    def with_env_overrides(self, environ: Optional[Dict[str, str]] = None) -> "ExperimentConfig":
        """Apply NOMA_OUTPUT_DIR and NOMA_THREADS"""
        environ = os.environ if environ is None else environ
        config = self
        if environ.get(ENV_OUTPUT_DIR):
            config = dataclasses.replace(config, output=OutputConfig(directory=environ[ENV_OUTPUT_DIR]))
        if environ.get(ENV_THREADS):
            try:
                workers = int(environ[ENV_THREADS])
            except ValueError:
                raise ConfigError(f"{ENV_THREADS} must be an integer, got {environ[ENV_THREADS]!r}")
            config = dataclasses.replace(config, sweep=dataclasses.replace(config.sweep, workers=workers))
        return config


PRESETS: Dict[str, Dict[str, Any]] = {
    "default": {},
    "nonlinear": {
        "scenario": {"rx_nonlinearity_gain": NONLINEAR_RX_GAIN, "snr_db": 35.0},
        "sweep": {
            "snr_db": [15.0, 25.0, 35.0],
            "trials": 10,
            "detectors": [DETECTOR_LLS, DETECTOR_HYBRID, DETECTOR_PLAIN],
            "ablations": list(ABLATIONS),
            "users": [4],
        },
    },
    "noiseless": {
        "scenario": {"num_users": 2, "num_antennas": 4, "snr_db": "inf"},
        "sweep": {"snr_db": ["inf"], "trials": 1, "detectors": [DETECTOR_LLS]},
    },
}


def load_config(source: str) -> ExperimentConfig:
    """
    Load a config from a JSON file path or a preset name

    Args:
        source: Path to a JSON document, or one of PRESETS

    Returns:
        ExperimentConfig: Parsed and validated config
    """
    if os.path.isfile(source):
        try:
            with open(source, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {source} is not valid JSON: {e}")
        return ExperimentConfig.from_dict(data)
    if source in PRESETS:
        return ExperimentConfig.from_dict(PRESETS[source])
    if source.endswith(".json"):
        raise FileNotFoundError(f"Config file not found: {source}")
    raise ConfigError(f"Unknown config preset: {source}. Expected a file or one of {sorted(PRESETS)}.")
