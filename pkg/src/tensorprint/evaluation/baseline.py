"""Comparison fingerprint: per-video feature means concatenated, no tensor model."""

from __future__ import annotations

import numpy as np

from ..features import (
    detect_interest_points,
    global_histogram,
    image_gradients,
    local_descriptor,
    standardize_column,
    temporal_diff,
)
from ..fingerprint import PipelineConfig
from ..frames import FrameSequence, sample_frames

__all__ = ["concatenated_baseline_fingerprint"]


def concatenated_baseline_fingerprint(
    seq: FrameSequence, config: PipelineConfig = PipelineConfig()
) -> np.ndarray:
    """Mean histogram, mean histogram difference and mean local descriptor, each of length L.

    Frames are sampled to ``config.frames`` exactly as for the tensor
    pipeline. The difference block averages over consecutive frame pairs and
    the descriptor block over all detected points; either is zero when there
    is nothing to average.
    """
    fc = config.feature
    length, bins = fc.standard_length, fc.histogram_bins
    frames = sample_frames(seq, config.frames).frames
    hist = np.mean([standardize_column(global_histogram(f, bins), length) for f in frames], axis=0)
    diffs = [
        standardize_column(temporal_diff(a, b, bins), length) for a, b in zip(frames[:-1], frames[1:])
    ]
    diff = np.mean(diffs, axis=0)
    local = np.zeros(length)
    count = 0
    if fc.local_points:
        for f in frames:
            grads = image_gradients(f)
            for p in detect_interest_points(f, fc.local_points):
                local += standardize_column(local_descriptor(f, p, grads), length)
                count += 1
    if count:
        local /= count
    return np.concatenate([hist, diff, local])
