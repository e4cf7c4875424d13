"""Edge-guided polyp segmentation: model, losses, metrics and training tools."""

__version__ = "0.1.0"

from .cfm import CascadeFusion, FinalPrediction, FusionOutput
from .cfp import DilatedRefineBlock, PyramidRefiner
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ABLATION_PRESETS, TrainConfig, apply_ablation, load_config
from .data import (
    DatasetError,
    DatasetSplit,
    ImageSample,
    epoch_plan,
    load_dataset,
    make_batch,
    make_edge_ground_truth,
)
from .eem import EdgeBundle, EdgeExtractor, edge_loss
from .encoder import FeaturePyramid, ToyPyramidBackbone, validate_pyramid
from .losses import (
    LossBreakdown,
    pixel_weight_map,
    structure_loss,
    total_loss,
    weighted_bce,
    weighted_iou,
)
from .metrics import MetricsReport, dice, evaluate, iou, mae, write_report
from .model import EdgeGuidedPolypNet, ModelOutputs
from .seg import ChannelAttention, EdgeGuidance, ShuffleAttention, StreamSeparator, channel_shuffle
from .trainer import TrainingDiverged, build_model, predict, restore_model, train
