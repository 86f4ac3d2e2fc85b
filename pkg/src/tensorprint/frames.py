"""Grayscale frame sequences and their on-disk formats.

Two formats are supported:

* a directory of binary PGM (P5, maxval 255) images read in lexicographic
  filename order;
* a raw planar pair: ``<name>.json`` holding ``{"width", "height",
  "frame_count"}`` and ``<name>.raw`` holding ``width*height*frame_count``
  bytes, frame after frame, row-major.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "FrameError",
    "FrameSequence",
    "load_frames",
    "read_pgm",
    "write_pgm",
    "write_pgm_sequence",
    "read_raw",
    "write_raw",
    "sample_frames",
    "sample_indices",
]


class FrameError(ValueError):
    """Unreadable, inconsistent or too short frame input."""


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """``frames`` is a uint8 array of shape ``(frame_count, height, width)``."""

    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 3:
            raise FrameError(f"frames must have shape (count, height, width), got {frames.shape}")
        if frames.shape[0] < 2:
            raise FrameError("a frame sequence needs at least 2 frames")
        if frames.dtype != np.uint8:
            if frames.size and (frames.min() < 0 or frames.max() > 255):
                raise FrameError("pixel values must lie in [0, 255]")
            frames = np.rint(frames).astype(np.uint8)
        frames = np.ascontiguousarray(frames)
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def frame_count(self) -> int:
        return int(self.frames.shape[0])

    @property
    def height(self) -> int:
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        return int(self.frames.shape[2])

    def __len__(self):
        return self.frame_count

    def __eq__(self, other):
        if not isinstance(other, FrameSequence):
            return NotImplemented
        return np.array_equal(self.frames, other.frames)

    __hash__ = None


_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if not m:
            raise FrameError(f"{path}: truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise FrameError(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = (int(x) for x in tokens[1:])
    except ValueError as exc:
        raise FrameError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise FrameError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    pos += 1  # single whitespace after maxval
    pixels = data[pos : pos + width * height]
    if len(pixels) != width * height:
        raise FrameError(f"{path}: expected {width * height} pixel bytes, found {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width)


def write_pgm(path, frame: np.ndarray) -> None:
    frame = np.asarray(frame, dtype=np.uint8)
    header = f"P5\n{frame.shape[1]} {frame.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + frame.tobytes())


def write_pgm_sequence(directory, seq: FrameSequence) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(seq.frame_count - 1)))
    for i, frame in enumerate(seq.frames):
        write_pgm(directory / f"frame_{i:0{width}d}.pgm", frame)


def write_raw(base, seq: FrameSequence) -> None:
    """Write ``base.json`` and ``base.raw``."""
    base = Path(base)
    header = {"width": seq.width, "height": seq.height, "frame_count": seq.frame_count}
    base.with_suffix(".json").write_text(json.dumps(header), encoding="utf-8")
    base.with_suffix(".raw").write_bytes(seq.frames.tobytes())


def read_raw(base) -> FrameSequence:
    base = Path(base)
    header_path = base.with_suffix(".json")
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
        width, height, count = (int(header[k]) for k in ("width", "height", "frame_count"))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise FrameError(f"{header_path}: unreadable raw header ({exc})") from exc
    try:
        payload = base.with_suffix(".raw").read_bytes()
    except OSError as exc:
        raise FrameError(f"{base.with_suffix('.raw')}: {exc}") from exc
    if len(payload) != width * height * count:
        raise FrameError(
            f"raw payload has {len(payload)} bytes, header implies {width * height * count}"
        )
    frames = np.frombuffer(payload, dtype=np.uint8).reshape(count, height, width)
    return FrameSequence(frames)


def load_frames(path) -> FrameSequence:
    """Load a PGM directory, or a raw pair given either file of the pair."""
    path = Path(path)
    if path.is_dir():
        names = sorted(n for n in os.listdir(path) if n.lower().endswith(".pgm"))
        if not names:
            raise FrameError(f"{path}: no .pgm files found")
        frames = [read_pgm(path / n) for n in names]
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            raise FrameError(f"{path}: inconsistent frame dimensions {sorted(shapes)}")
        return FrameSequence(np.stack(frames))
    if path.suffix in (".raw", ".json") or path.with_suffix(".json").exists():
        return read_raw(path)
    raise FrameError(f"{path}: not a PGM directory or raw frame file")


def sample_indices(count: int, target: int) -> np.ndarray:
    """``round(j * (count - 1) / (target - 1))`` for ``j = 0 .. target-1``, half up."""
    if target < 2:
        raise FrameError("target frame count must be at least 2")
    j = np.arange(target, dtype=np.int64)
    # exact integer rounding, half up
    return (2 * j * (count - 1) + (target - 1)) // (2 * (target - 1))


def sample_frames(seq: FrameSequence, target: int) -> FrameSequence:
    if target == seq.frame_count:
        return seq
    return FrameSequence(seq.frames[sample_indices(seq.frame_count, target)])
