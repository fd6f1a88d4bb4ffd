from .schedule import EarlyStopper, lr_schedule
from .checkpoint import ModelArtifact, load_artifact, save_artifact
from .system import System, TrainState

__all__ = [
    "EarlyStopper",
    "ModelArtifact",
    "System",
    "TrainState",
    "load_artifact",
    "lr_schedule",
    "save_artifact",
]
