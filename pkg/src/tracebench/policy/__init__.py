from .network import ChunkPrediction, PolicyParams, init_params
from .losses import LossBreakdown, center_loss, kl_loss, task_loss, total_loss
from .train import TrainingDiverged, train
from .infer import infer, make_policy_controller
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ChunkPrediction",
    "LossBreakdown",
    "PolicyParams",
    "TrainingDiverged",
    "center_loss",
    "infer",
    "init_params",
    "kl_loss",
    "load_checkpoint",
    "make_policy_controller",
    "save_checkpoint",
    "task_loss",
    "total_loss",
    "train",
]
