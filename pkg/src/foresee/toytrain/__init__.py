"""Deterministic desk-scale training harness.

Synthetic road-like scenes, a tiny two-headed convolutional model with
hand-written backprop, and the two headline experiments: the lambda sweep
over the separated objective and the four-way training ablation.
"""

from .scenes import SceneParams, generate_scene
from .model import ToyModel, forward, init_model, train_step
from .experiments import (
    ToyConfig,
    run_ablation,
    run_lambda_sweep,
    train_model,
    evaluate_model,
)

__all__ = [
    "SceneParams", "generate_scene",
    "ToyModel", "forward", "init_model", "train_step",
    "ToyConfig", "run_ablation", "run_lambda_sweep", "train_model", "evaluate_model",
]
