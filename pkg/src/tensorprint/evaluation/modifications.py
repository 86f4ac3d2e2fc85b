"""Content-preserving video modifications used as copy attacks.

Every modification maps a :class:`FrameSequence` to a new one of the same
frame size. Geometric operations use bilinear sampling with black fill;
photometric ones clamp to [0, 255].
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..frames import FrameSequence

__all__ = [
    "Kind",
    "Modification",
    "ModificationError",
    "apply_modification",
    "single_modifications",
    "combined_modifications",
    "by_name",
]


class ModificationError(ValueError):
    pass


class Kind(str, enum.Enum):
    IDENTITY = "identity"
    ROTATION = "rotation"
    AWGN = "awgn"
    MOTION_BLUR = "motion_blur"
    CONTRAST = "contrast"
    LETTERBOX = "letterbox"
    CAPTION = "caption"
    LOGO = "logo"
    PICTURE_IN_PICTURE = "pip"
    CROP = "crop"
    FLIP = "flip"
    FRAME_RESAMPLE = "resample"
    AFFINE = "affine"
    GAMMA = "gamma"
    SHIFT = "shift"
    COMBO1 = "combo1"
    COMBO2 = "combo2"
    COMBO3 = "combo3"
    COMBO4 = "combo4"


# Default attack strengths. The AWGN level of 110 is a noise variance on
# the 0-255 scale.
DEFAULTS = {
    Kind.IDENTITY: {},
    Kind.ROTATION: {"angle": 5.0},
    Kind.AWGN: {"sigma": math.sqrt(110.0)},
    Kind.MOTION_BLUR: {"length": 10},
    Kind.CONTRAST: {"saturation": 0.01},
    Kind.LETTERBOX: {"fraction": 0.10},
    Kind.CAPTION: {"height_fraction": 0.12},
    Kind.LOGO: {"size_fraction": 0.15},
    Kind.PICTURE_IN_PICTURE: {"size": 100},
    Kind.CROP: {"fraction": 0.25},
    Kind.FLIP: {},
    Kind.FRAME_RESAMPLE: {"fraction": 0.05},
    Kind.AFFINE: {"matrix": ((1.0, 0.0, 0.0), (0.5, 1.0, 0.0), (0.0, 0.0, 1.0))},
    Kind.GAMMA: {"gamma": 0.8},
    Kind.SHIFT: {"fraction": 0.05},
}

COMBOS = {
    Kind.COMBO1: (Kind.CONTRAST, Kind.GAMMA, Kind.AWGN),
    Kind.COMBO2: (Kind.CONTRAST, Kind.GAMMA, Kind.AWGN, Kind.MOTION_BLUR, Kind.FRAME_RESAMPLE),
    Kind.COMBO3: (Kind.CROP, Kind.FLIP, Kind.LOGO),
    Kind.COMBO4: (Kind.CROP, Kind.FLIP, Kind.LOGO, Kind.PICTURE_IN_PICTURE, Kind.SHIFT),
}


@dataclass(frozen=True)
class Modification:
    kind: Kind
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in COMBOS:
            if self.params:
                raise ModificationError("combined modifications take no parameters")
            return
        merged = dict(DEFAULTS[kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ModificationError(f"unknown parameters for {kind.value}: {sorted(unknown)}")
        merged.update(self.params)
        _validate(kind, merged)
        object.__setattr__(self, "params", merged)

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def members(self) -> tuple:
        """Ordered member list; a single-element tuple for simple kinds."""
        if self.kind in COMBOS:
            return tuple(Modification(k) for k in COMBOS[self.kind])
        return (self,)


def _validate(kind: Kind, p: dict) -> None:
    def need(ok, msg):
        if not ok:
            raise ModificationError(f"{kind.value}: {msg}")

    if kind is Kind.ROTATION:
        need(-180 <= p["angle"] <= 180, "angle must lie in [-180, 180] degrees")
    elif kind is Kind.AWGN:
        need(p["sigma"] >= 0, "sigma must be non-negative")
    elif kind is Kind.MOTION_BLUR:
        need(int(p["length"]) == p["length"] and p["length"] >= 1, "length must be a positive integer")
    elif kind is Kind.CONTRAST:
        need(0 <= p["saturation"] < 0.5, "saturation must lie in [0, 0.5)")
    elif kind is Kind.LETTERBOX:
        need(0 <= p["fraction"] < 0.5, "fraction must lie in [0, 0.5)")
    elif kind is Kind.CAPTION:
        need(0 < p["height_fraction"] <= 0.5, "height_fraction must lie in (0, 0.5]")
    elif kind is Kind.LOGO:
        need(0 < p["size_fraction"] <= 0.5, "size_fraction must lie in (0, 0.5]")
    elif kind is Kind.PICTURE_IN_PICTURE:
        need(p["size"] >= 1, "size must be positive")
    elif kind is Kind.CROP:
        need(0 <= p["fraction"] < 1, "fraction must lie in [0, 1)")
    elif kind is Kind.FRAME_RESAMPLE:
        need(0 <= p["fraction"] <= 1, "fraction must lie in [0, 1]")
    elif kind is Kind.AFFINE:
        m = np.asarray(p["matrix"], dtype=np.float64)
        need(m.shape == (3, 3), "matrix must be 3x3")
        need(abs(np.linalg.det(m[:2, :2])) > 1e-9, "matrix must be invertible")
    elif kind is Kind.GAMMA:
        need(p["gamma"] > 0, "gamma must be positive")
    elif kind is Kind.SHIFT:
        need(-1 < p["fraction"] < 1, "fraction must lie in (-1, 1)")


def _to_frames(arr) -> np.ndarray:
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def _warp(frames: np.ndarray, src_x: np.ndarray, src_y: np.ndarray) -> np.ndarray:
    """Bilinear resampling of every frame at the given source coordinates, black fill."""
    out = np.empty(frames.shape, dtype=np.float64)
    coords = np.stack([src_y, src_x])
    for i, f in enumerate(frames):
        out[i] = ndimage.map_coordinates(f.astype(np.float64), coords, order=1, mode="constant", cval=0.0)
    return out


def _grid(h, w):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return xx, yy, (w - 1) / 2.0, (h - 1) / 2.0


def _rotate(frames, angle):
    if angle == 0:
        return frames.copy()
    h, w = frames.shape[1:]
    xx, yy, cx, cy = _grid(h, w)
    th = math.radians(angle)
    u, v = xx - cx, cy - yy  # v points up, so positive angles turn counterclockwise
    us = u * math.cos(th) + v * math.sin(th)
    vs = -u * math.sin(th) + v * math.cos(th)
    return _to_frames(_warp(frames, cx + us, cy - vs))


def _affine(frames, matrix):
    # row-vector convention [u v 1] = [x y 1] @ T, applied about the frame center
    t = np.asarray(matrix, dtype=np.float64)
    h, w = frames.shape[1:]
    xx, yy, cx, cy = _grid(h, w)
    inv = np.linalg.inv(t)
    pts = np.stack([xx - cx, yy - cy, np.ones_like(xx)], axis=-1) @ inv
    return _to_frames(_warp(frames, pts[..., 0] + cx, pts[..., 1] + cy))


def _crop(frames, fraction):
    if fraction == 0:
        return frames.copy()
    h, w = frames.shape[1:]
    scale = math.sqrt(1.0 - fraction)
    cw, ch = w * scale, h * scale
    xx, yy, _, _ = _grid(h, w)
    src_x = (w - cw) / 2.0 + (xx + 0.5) * cw / w - 0.5
    src_y = (h - ch) / 2.0 + (yy + 0.5) * ch / h - 0.5
    return _to_frames(_warp(frames, src_x, src_y))


def _shift(frames, fraction):
    dx = int(round(fraction * frames.shape[2]))
    out = np.zeros_like(frames)
    if dx >= 0:
        out[:, :, dx:] = frames[:, :, : frames.shape[2] - dx]
    else:
        out[:, :, :dx] = frames[:, :, -dx:]
    return out


def _contrast(frames, saturation):
    out = np.empty(frames.shape, dtype=np.float64)
    for i, f in enumerate(frames):
        lo, hi = np.quantile(f, [saturation, 1.0 - saturation])
        if hi <= lo:
            out[i] = f
        else:
            out[i] = (f.astype(np.float64) - lo) * (255.0 / (hi - lo))
    return _to_frames(out)


# 3x5 glyph bitmaps drawn from a fixed generator: a stand-in for a line of text
_GLYPHS = np.random.default_rng(20170405).random((24, 5, 3)) < 0.55


def _caption(frames, height_fraction):
    out = frames.copy()
    h, w = frames.shape[1:]
    strip = max(7, int(round(height_fraction * h)))
    scale = max(1, (strip - 2) // 5)
    glyph_w, glyph_h = 3 * scale, 5 * scale
    top = h - strip + (strip - glyph_h) // 2
    out[:, h - strip :, :] = 0
    x = scale
    for g in _GLYPHS:
        if x + glyph_w > w - scale:
            break
        block = np.kron(g, np.ones((scale, scale), dtype=bool))
        region = out[:, top : top + glyph_h, x : x + glyph_w]
        region[:, block] = 255
        x += glyph_w + scale
    return out


def _logo(frames, size_fraction):
    out = frames.copy()
    h, w = frames.shape[1:]
    size = max(2, int(round(size_fraction * min(h, w))))
    margin = max(1, size // 4)
    out[:, margin : margin + size, w - margin - size : w - margin] = 255
    return out


def _pip(frames, size, seed):
    h, w = frames.shape[1:]
    side = int(min(size, w // 3, h // 3))
    out = frames.copy()
    if side < 1:
        return out
    rng = np.random.default_rng([int(seed), 7])
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    fx, fy = rng.uniform(1, 3, size=2) * 2 * np.pi / side
    base = rng.uniform(60, 200)
    top, left = h // 10, w // 10
    for t in range(frames.shape[0]):
        patch = base + 50 * np.sin(fx * xx + 0.2 * t) * np.cos(fy * yy - 0.1 * t)
        out[t, top : top + side, left : left + side] = _to_frames(patch)
    return out


def _resample(frames, fraction, seed):
    n = frames.shape[0]
    count = int(round(fraction * n))
    out = frames.copy()
    if count == 0 or n < 2:
        return out
    rng = np.random.default_rng([int(seed), 11])
    picks = np.sort(rng.choice(np.arange(1, n), size=min(count, n - 1), replace=False))
    for i in picks:
        out[i] = frames[i - 1]
    return out


def _apply_simple(frames: np.ndarray, m: Modification, seed: int) -> np.ndarray:
    p = m.params
    k = m.kind
    if k is Kind.IDENTITY:
        return frames.copy()
    if k is Kind.ROTATION:
        return _rotate(frames, p["angle"])
    if k is Kind.AWGN:
        if p["sigma"] == 0:
            return frames.copy()
        noise = np.random.default_rng([int(seed), 3]).normal(0.0, p["sigma"], frames.shape)
        return _to_frames(frames + noise)
    if k is Kind.MOTION_BLUR:
        blurred = ndimage.uniform_filter1d(frames.astype(np.float64), int(p["length"]), axis=2, mode="nearest")
        return _to_frames(blurred)
    if k is Kind.CONTRAST:
        return _contrast(frames, p["saturation"])
    if k is Kind.LETTERBOX:
        out = frames.copy()
        bar = int(round(p["fraction"] * frames.shape[1]))
        if bar:
            out[:, :bar, :] = 0
            out[:, frames.shape[1] - bar :, :] = 0
        return out
    if k is Kind.CAPTION:
        return _caption(frames, p["height_fraction"])
    if k is Kind.LOGO:
        return _logo(frames, p["size_fraction"])
    if k is Kind.PICTURE_IN_PICTURE:
        return _pip(frames, p["size"], seed)
    if k is Kind.CROP:
        return _crop(frames, p["fraction"])
    if k is Kind.FLIP:
        return frames[:, :, ::-1].copy()
    if k is Kind.FRAME_RESAMPLE:
        return _resample(frames, p["fraction"], seed)
    if k is Kind.AFFINE:
        return _affine(frames, p["matrix"])
    if k is Kind.GAMMA:
        return _to_frames(255.0 * (frames / 255.0) ** p["gamma"])
    if k is Kind.SHIFT:
        return _shift(frames, p["fraction"])
    raise ModificationError(f"unsupported modification {k}")


def apply_modification(seq: FrameSequence, m: Modification, seed: int = 0) -> FrameSequence:
    """Apply ``m`` (members in order for combined kinds); ``seed`` drives any randomness."""
    frames = seq.frames
    for member in m.members:
        frames = _apply_simple(frames, member, seed)
    return FrameSequence(frames)


SINGLE_KINDS = (
    Kind.ROTATION,
    Kind.AWGN,
    Kind.MOTION_BLUR,
    Kind.CONTRAST,
    Kind.LETTERBOX,
    Kind.CAPTION,
    Kind.CROP,
    Kind.FLIP,
    Kind.PICTURE_IN_PICTURE,
    Kind.AFFINE,
    Kind.FRAME_RESAMPLE,
)


def single_modifications() -> list:
    """The eleven single attacks at their default settings."""
    return [Modification(k) for k in SINGLE_KINDS]


def combined_modifications() -> list:
    return [Modification(k) for k in COMBOS]


def by_name(name: str) -> Modification:
    try:
        return Modification(Kind(name.strip().lower()))
    except ValueError as exc:
        raise ModificationError(f"unknown modification {name!r}") from exc
