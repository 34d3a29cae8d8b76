from .bandwidth import REFERENCE_RATIO, BandwidthReport, simulate_exchange
from .config import ConfigError, TrainConfig, load_config, parse_config_text
from .report import results_table
from .train import EpisodeLog, TrainResult, evaluate_checkpoint, evaluate_frames, run_training, train_frames

__all__ = [
    "BandwidthReport",
    "ConfigError",
    "EpisodeLog",
    "REFERENCE_RATIO",
    "TrainConfig",
    "TrainResult",
    "evaluate_checkpoint",
    "evaluate_frames",
    "load_config",
    "parse_config_text",
    "results_table",
    "run_training",
    "simulate_exchange",
    "train_frames",
]
