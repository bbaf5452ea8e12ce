"""Curriculum adversarial training for attention-based Wi-Fi RSS indoor localization.

The package bundles a small reverse-mode autodiff engine, the attention
localizer, white-box FGSM/PGD/MIM attacks, the curriculum trainer and an
evaluation harness. Everything runs on numpy.
"""

__version__ = "0.1.0"

from .attacks import AttackConfig, craft, craft_fgsm, craft_mim, craft_pgd, select_target_aps, spoof
from .baselines import DenseClassifier, KNNLocalizer, knn_predict, train_dnn, train_fgsm_dnn
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .curriculum import TrainerConfig, build_default_curriculum, train_full
from .data import (
    FingerprintSet,
    FloorplanDataset,
    SyntheticBuildingConfig,
    building_config,
    generate_synthetic_building,
    load_csv,
    save_csv,
)
from .evaluation import EvalGrid, MetricsReport, emit_report, localization_error, run_grid
from .model import CallocModel, ModelConfig, rebuild_anchor_memory

__all__ = [
    "AttackConfig",
    "CallocModel",
    "CheckpointError",
    "DenseClassifier",
    "EvalGrid",
    "FingerprintSet",
    "FloorplanDataset",
    "KNNLocalizer",
    "MetricsReport",
    "ModelConfig",
    "SyntheticBuildingConfig",
    "TrainerConfig",
    "build_default_curriculum",
    "building_config",
    "craft",
    "craft_fgsm",
    "craft_mim",
    "craft_pgd",
    "emit_report",
    "generate_synthetic_building",
    "knn_predict",
    "load_checkpoint",
    "load_csv",
    "localization_error",
    "rebuild_anchor_memory",
    "run_grid",
    "save_checkpoint",
    "save_csv",
    "select_target_aps",
    "spoof",
    "train_dnn",
    "train_fgsm_dnn",
    "train_full",
]
