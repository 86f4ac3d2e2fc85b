"""Procedural test videos: a textured, slowly drifting background with moving shapes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..frames import FrameSequence

__all__ = ["CorpusSpec", "synth_video", "synth_corpus", "video_rng"]


@dataclass(frozen=True)
class CorpusSpec:
    n_videos: int = 50
    frames: int = 64
    width: int = 128
    height: int = 96
    seed: int = 0
    min_shapes: int = 2
    max_shapes: int = 5
    max_speed: float = 2.5  # pixels per frame
    texture_amplitude: float = 25.0

    def __post_init__(self):
        if self.n_videos < 2:
            raise ValueError("a corpus needs at least 2 videos")
        if self.width < 32 or self.height < 32:
            raise ValueError("frames must be at least 32x32")
        if self.frames < 2:
            raise ValueError("videos need at least 2 frames")
        if not 1 <= self.min_shapes <= self.max_shapes:
            raise ValueError("need 1 <= min_shapes <= max_shapes")


def video_rng(seed: int, index: int) -> np.random.Generator:
    """Per-video generator derived from the corpus seed and the video index."""
    return np.random.default_rng([int(seed), int(index)])


def _bounce(start, velocity, lo, hi, steps):
    """Positions of a point moving at constant speed and reflecting off [lo, hi]."""
    span = hi - lo
    raw = start - lo + velocity * np.arange(steps)
    if span <= 0:
        return np.full(steps, float(lo))
    folded = np.mod(raw, 2 * span)
    return lo + np.where(folded > span, 2 * span - folded, folded)


def synth_video(spec: CorpusSpec, index: int) -> FrameSequence:
    rng = video_rng(spec.seed, index)
    h, w, n = spec.height, spec.width, spec.frames
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    # background: linear gradient plus a drifting sinusoidal texture
    angle = rng.uniform(0, 2 * np.pi)
    lo, hi = np.sort(rng.uniform(10, 245, size=2))
    ramp = (np.cos(angle) * xx / w + np.sin(angle) * yy / h + 1.0) / 2.0
    gradient = lo + (hi - lo) * ramp
    fx, fy = rng.uniform(0.5, 4.0, size=2) * 2 * np.pi / np.array([w, h])
    phase0 = rng.uniform(0, 2 * np.pi)
    drift = rng.uniform(-0.15, 0.15)
    amp = spec.texture_amplitude * rng.uniform(0.3, 1.0)

    count = int(rng.integers(spec.min_shapes, spec.max_shapes + 1))
    shapes = []
    for _ in range(count):
        kind = "disc" if rng.random() < 0.5 else "rect"
        # capped so a shape always fits inside small frames
        sw, sh = np.minimum(rng.uniform(6, 26, size=2), min(w, h) / 3)
        if kind == "disc":
            sh = sw
        vx, vy = rng.uniform(-spec.max_speed, spec.max_speed, size=2)
        cx = _bounce(rng.uniform(sw, w - sw), vx, sw / 2, w - sw / 2, n)
        cy = _bounce(rng.uniform(sh, h - sh), vy, sh / 2, h - sh / 2, n)
        level = rng.uniform(0, 255)
        shapes.append((kind, sw, sh, cx, cy, level))

    frames = np.empty((n, h, w), dtype=np.uint8)
    for t in range(n):
        img = gradient + amp * np.sin(fx * xx + fy * yy + phase0 + drift * t)
        for kind, sw, sh, cx, cy, level in shapes:
            if kind == "disc":
                mask = (xx - cx[t]) ** 2 + (yy - cy[t]) ** 2 <= (sw / 2) ** 2
            else:
                mask = (np.abs(xx - cx[t]) <= sw / 2) & (np.abs(yy - cy[t]) <= sh / 2)
            img = np.where(mask, level, img)
        frames[t] = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return FrameSequence(frames)


def synth_corpus(spec: CorpusSpec) -> list:
    """``spec.n_videos`` deterministic videos; video ``i`` depends only on (seed, i)."""
    return [synth_video(spec, i) for i in range(spec.n_videos)]
