"""Frequency-domain perceptual image similarity with trainable masking.

Block-DCT and block-DFT distances with luminance/contrast masking, SSIM and
Lp baselines, exact reverse-mode gradients, and a 2AFC fitting pipeline.
"""

from watsonsim.baselines import lp_distance, ssim_distance
from watsonsim.color import Colorspace, Image
from watsonsim.transforms import BlockGrid
from watsonsim.watson import (
    WatsonParams,
    default_params,
    load_params,
    save_params,
    watson_distance,
)
from watsonsim.grad import GradientRequest, LossId, Wrt, value_and_grad
from watsonsim.twoafc import (
    RankingHead,
    TwoAfcRecord,
    evaluate_metric,
    load_dataset,
    predict_preference,
)
from watsonsim.synthetic import SyntheticConfig, generate_synthetic_dataset
from watsonsim.training import TrainerConfig, train_metric

__all__ = [
    "Colorspace",
    "Image",
    "BlockGrid",
    "WatsonParams",
    "default_params",
    "load_params",
    "save_params",
    "watson_distance",
    "ssim_distance",
    "lp_distance",
    "GradientRequest",
    "LossId",
    "Wrt",
    "value_and_grad",
    "RankingHead",
    "TwoAfcRecord",
    "evaluate_metric",
    "load_dataset",
    "predict_preference",
    "SyntheticConfig",
    "generate_synthetic_dataset",
    "TrainerConfig",
    "train_metric",
]

__version__ = "0.1.0"
