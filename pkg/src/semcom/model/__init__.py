from .act import ACTResult, act_run
from .codec import LossParts, SemanticCodec, TransceiveStats, total_loss
from .config import UTConfig, load_config, save_config

__all__ = [
    "ACTResult", "LossParts", "SemanticCodec", "TransceiveStats", "UTConfig",
    "act_run", "load_config", "save_config", "total_loss",
]
