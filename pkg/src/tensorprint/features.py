"""Per-frame global, temporal and local features.

A frame is a 2-D uint8 array indexed ``[y, x]``. Each frame becomes an
``L x (2 + K)`` slice: gray histogram, absolute histogram difference to the
previous frame, then ``K`` interest-point descriptors, every column
resampled to the standard length ``L``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FeatureConfig",
    "global_histogram",
    "temporal_diff",
    "integral_image",
    "hessian_response",
    "detect_interest_points",
    "image_gradients",
    "local_descriptor",
    "standardize_column",
    "build_slice",
]

HESSIAN_FILTER = 9
DESCRIPTOR_PATCH = 20
DESCRIPTOR_GRID = 4
MIN_DETECT_SIZE = 16


@dataclass(frozen=True)
class FeatureConfig:
    standard_length: int = 64
    histogram_bins: int = 64
    local_points: int = 4

    def __post_init__(self):
        if self.standard_length < 2:
            raise ValueError("standard_length must be at least 2")
        if self.histogram_bins < 2:
            raise ValueError("histogram_bins must be at least 2")
        if self.local_points < 0:
            raise ValueError("local_points must be non-negative")

    @property
    def columns(self) -> int:
        return 2 + self.local_points


def global_histogram(frame: np.ndarray, bins: int = 64) -> np.ndarray:
    """Normalized gray histogram; pixel ``p`` lands in bin ``floor(p * bins / 256)``."""
    if bins < 2:
        raise ValueError("bins must be at least 2")
    pix = np.asarray(frame, dtype=np.int64).ravel()
    counts = np.bincount((pix * bins) // 256, minlength=bins)
    return counts / pix.size


def temporal_diff(prev: np.ndarray, nxt: np.ndarray, bins: int = 64) -> np.ndarray:
    """L1-normalized ``|h(next) - h(prev)|``; the zero vector when histograms agree."""
    prev = np.asarray(prev)
    nxt = np.asarray(nxt)
    if prev.shape != nxt.shape:
        raise ValueError(f"frame sizes differ: {prev.shape} vs {nxt.shape}")
    diff = np.abs(global_histogram(nxt, bins) - global_histogram(prev, bins))
    total = diff.sum()
    return diff / total if total > 0 else diff


def integral_image(frame: np.ndarray) -> np.ndarray:
    """Zero-padded summed-area table, exact in int64."""
    frame = np.asarray(frame, dtype=np.int64)
    ii = np.zeros((frame.shape[0] + 1, frame.shape[1] + 1), dtype=np.int64)
    ii[1:, 1:] = frame.cumsum(0).cumsum(1)
    return ii


def _box(ii, ys, xs, r0, r1, c0, c1):
    """Sum over rows ``y+r0..y+r1`` and cols ``x+c0..x+c1`` (inclusive) for every center."""
    return (
        ii[ys + r1 + 1, xs + c1 + 1]
        - ii[ys + r0, xs + c1 + 1]
        - ii[ys + r1 + 1, xs + c0]
        + ii[ys + r0, xs + c0]
    )


def hessian_response(frame: np.ndarray) -> np.ndarray:
    """Determinant-of-Hessian map from 9x9 box filters (zero where the filter does not fit)."""
    frame = np.asarray(frame)
    h, w = frame.shape
    out = np.zeros((h, w))
    m = HESSIAN_FILTER // 2
    if h < HESSIAN_FILTER or w < HESSIAN_FILTER:
        return out
    ii = integral_image(frame)
    ys, xs = np.mgrid[m : h - m, m : w - m]
    dyy = (
        _box(ii, ys, xs, -4, -2, -2, 2)
        - 2 * _box(ii, ys, xs, -1, 1, -2, 2)
        + _box(ii, ys, xs, 2, 4, -2, 2)
    )
    dxx = (
        _box(ii, ys, xs, -2, 2, -4, -2)
        - 2 * _box(ii, ys, xs, -2, 2, -1, 1)
        + _box(ii, ys, xs, -2, 2, 2, 4)
    )
    dxy = (
        _box(ii, ys, xs, -3, -1, -3, -1)
        - _box(ii, ys, xs, -3, -1, 1, 3)
        - _box(ii, ys, xs, 1, 3, -3, -1)
        + _box(ii, ys, xs, 1, 3, 1, 3)
    )
    area = float(HESSIAN_FILTER * HESSIAN_FILTER)
    dxx, dyy, dxy = dxx / area, dyy / area, dxy / area
    out[m : h - m, m : w - m] = dxx * dyy - (0.9 * dxy) ** 2
    return out


def detect_interest_points(frame: np.ndarray, k: int = 4) -> list:
    """Up to ``k`` strongest positive Hessian maxima as ``(x, y, response)``.

    A pixel qualifies when its response is positive and no smaller than any
    of its 8 neighbours. Candidates are taken in order of decreasing
    response, ties in ``(y, x)`` scan order, skipping any candidate adjacent
    to an already accepted point.
    """
    if k <= 0:
        return []
    frame = np.asarray(frame)
    if min(frame.shape) < MIN_DETECT_SIZE:
        raise ValueError(f"frames must be at least {MIN_DETECT_SIZE}x{MIN_DETECT_SIZE} for detection")
    resp = hessian_response(frame)
    padded = np.pad(resp, 1, constant_values=-np.inf)
    h, w = resp.shape
    neigh = np.max(
        np.stack(
            [
                padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
                for dy in (-1, 0, 1)
                for dx in (-1, 0, 1)
                if dy or dx
            ]
        ),
        axis=0,
    )
    ys, xs = np.nonzero((resp > 0) & (resp >= neigh))
    vals = resp[ys, xs]
    order = np.lexsort((xs, ys, -vals))
    points = []
    for i in order:
        y, x = int(ys[i]), int(xs[i])
        if any(abs(y - py) <= 1 and abs(x - px) <= 1 for px, py, _ in points):
            continue
        points.append((x, y, float(vals[i])))
        if len(points) == k:
            break
    return points


def image_gradients(frame: np.ndarray):
    f = np.asarray(frame, dtype=np.float64)
    padded = np.pad(f, 1, mode="edge")
    dx = 0.5 * (padded[1:-1, 2:] - padded[1:-1, :-2])
    dy = 0.5 * (padded[2:, 1:-1] - padded[:-2, 1:-1])
    return dx, dy


# Offsets -10..-1 and 1..10: twenty samples placed symmetrically about the
# point, so a mirrored frame yields a mirrored grid.
_HALF = DESCRIPTOR_PATCH // 2
_OFFSETS = np.concatenate([np.arange(-_HALF, 0), np.arange(1, _HALF + 1)])


def local_descriptor(frame: np.ndarray, point, gradients=None) -> np.ndarray:
    """64-value gradient-sum descriptor around ``point = (x, y, ...)``.

    A 20x20 sample patch is split into a 4x4 grid; each cell contributes
    ``(sum dx, sum dy, sum |dx|, sum |dy|)`` of central-difference gradients.
    Cells are ordered row-major. Samples outside the frame are clamped to
    the border. The result is L2-normalized unless it is all zero.
    """
    frame = np.asarray(frame)
    h, w = frame.shape
    x, y = int(point[0]), int(point[1])
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"point ({x}, {y}) outside a {w}x{h} frame")
    dx, dy = gradients if gradients is not None else image_gradients(frame)
    rows = np.clip(y + _OFFSETS, 0, h - 1)
    cols = np.clip(x + _OFFSETS, 0, w - 1)
    cell = DESCRIPTOR_PATCH // DESCRIPTOR_GRID
    shape = (DESCRIPTOR_GRID, cell, DESCRIPTOR_GRID, cell)
    px = dx[np.ix_(rows, cols)].reshape(shape)
    py = dy[np.ix_(rows, cols)].reshape(shape)
    desc = np.stack(
        [
            px.sum(axis=(1, 3)),
            py.sum(axis=(1, 3)),
            np.abs(px).sum(axis=(1, 3)),
            np.abs(py).sum(axis=(1, 3)),
        ],
        axis=-1,
    ).ravel()
    norm = np.linalg.norm(desc)
    return desc / norm if norm > 0 else desc


def standardize_column(v, length: int) -> np.ndarray:
    """Linear-interpolation resampling of ``v`` onto ``length`` evenly spaced positions."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot standardize an empty vector")
    if v.size == length:
        return v.copy()
    if v.size == 1:
        return np.full(length, v[0])
    return np.interp(np.linspace(0.0, v.size - 1, length), np.arange(v.size), v)


def build_slice(prev, frame: np.ndarray, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Frontal slice ``L x (2 + K)`` for ``frame``; ``prev`` is None for the first frame."""
    length = config.standard_length
    bins = config.histogram_bins
    out = np.zeros((length, config.columns))
    out[:, 0] = standardize_column(global_histogram(frame, bins), length)
    if prev is not None:
        out[:, 1] = standardize_column(temporal_diff(prev, frame, bins), length)
    if config.local_points:
        grads = image_gradients(frame)
        for i, point in enumerate(detect_interest_points(frame, config.local_points)):
            out[:, 2 + i] = standardize_column(local_descriptor(frame, point, grads), length)
    return out
