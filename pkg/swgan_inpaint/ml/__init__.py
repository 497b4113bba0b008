"""
Machine Learning module - losses, optimisation, training, inference and evaluation
"""

from .inference import inpaint, load_generator
from .losses import LossReport, combined_loss, perceptual_loss
from .metrics import MetricsReport, evaluate_pairs
from .trainer import Trainer, load_checkpoint, save_checkpoint

__all__ = [
    'LossReport', 'MetricsReport', 'Trainer', 'combined_loss', 'evaluate_pairs', 'inpaint',
    'load_checkpoint', 'load_generator', 'perceptual_loss', 'save_checkpoint',
]
