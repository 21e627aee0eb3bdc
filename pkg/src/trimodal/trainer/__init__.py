from .config import TrainConfig, lr_at
from .data import BatchSource, batch_loader
from .loop import FitResult, TrainState, build_state, fit, train_step

__all__ = [
    "BatchSource",
    "FitResult",
    "TrainConfig",
    "TrainState",
    "batch_loader",
    "build_state",
    "fit",
    "lr_at",
    "train_step",
]
