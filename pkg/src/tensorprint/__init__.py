"""Video fingerprints from ARD-Tucker decompositions of per-frame feature tensors."""

from .ard import ArdConfig, ArdResult, ArdState, Prior, ard_select_ranks
from .features import FeatureConfig, build_slice
from .fingerprint import (
    Fingerprint,
    PipelineConfig,
    build_video_tensor,
    compute_fingerprint,
    condition_report,
    fingerprint_video,
)
from .frames import FrameSequence, load_frames, sample_frames
from .matchdb import (
    FingerprintDatabase,
    calibrate_adjustment_factor,
    decide_copy,
    fit_threshold,
    l2_distance,
)
from .tensor_core import (
    TuckerModel,
    fold,
    hosvd_init,
    matricize,
    n_mode_product,
    reconstruct,
    tucker_hooi,
)

__version__ = "0.1.0"

__all__ = [
    "ArdConfig",
    "ArdResult",
    "ArdState",
    "Prior",
    "ard_select_ranks",
    "FeatureConfig",
    "build_slice",
    "Fingerprint",
    "PipelineConfig",
    "build_video_tensor",
    "compute_fingerprint",
    "condition_report",
    "fingerprint_video",
    "FrameSequence",
    "load_frames",
    "sample_frames",
    "FingerprintDatabase",
    "calibrate_adjustment_factor",
    "decide_copy",
    "fit_threshold",
    "l2_distance",
    "TuckerModel",
    "fold",
    "hosvd_init",
    "matricize",
    "n_mode_product",
    "reconstruct",
    "tucker_hooi",
]
