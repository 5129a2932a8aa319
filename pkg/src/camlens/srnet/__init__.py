"""Small residual CNN super-resolver with hand-written forward and backward passes."""
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .layers import conv2d_backward, conv2d_forward
from .model import SrModel, mse_loss
from .train import TrainConfig, evaluate_model, parse_degradation, super_resolve, train

__all__ = [
    "Checkpoint", "SrModel", "TrainConfig", "conv2d_backward", "conv2d_forward",
    "evaluate_model", "load_checkpoint", "mse_loss", "parse_degradation", "save_checkpoint",
    "super_resolve", "train",
]
