"""Toy heatmap estimator: memoryless vs temporal configurations."""

from .data import (BLOCK_LEN, WINDOW, Block, GridSpec, Heatmap, ToySample, TruthTrack, WalkConfig,
                   encode_window, heatmap_from_point, peak_coords, segment_blocks, simulate_walk,
                   window_csi)
from .losses import DegenerateBatchError, c_schedule, head_loss, total_loss
from .model import EstimatorConfig, Model, RecurrentState, SequenceIntegrityError, forward
from .training import (Dataset, ErrorTable, Features, History, TrainingDivergedError, build_dataset,
                    evaluate, train, train_two_stage)

__all__ = [
    "BLOCK_LEN", "WINDOW", "Block", "GridSpec", "Heatmap", "ToySample", "TruthTrack", "WalkConfig",
    "encode_window", "heatmap_from_point", "peak_coords", "segment_blocks", "simulate_walk",
    "window_csi", "DegenerateBatchError", "c_schedule", "head_loss", "total_loss",
    "EstimatorConfig", "Model", "RecurrentState", "SequenceIntegrityError", "forward", "Dataset",
    "ErrorTable", "Features", "History", "TrainingDivergedError", "build_dataset", "evaluate",
    "train", "train_two_stage",
]
