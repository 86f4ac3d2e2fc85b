"""Video tensor assembly, comprehensive-feature fingerprints and match tags."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .ard import ArdConfig, ard_select_ranks
from .features import FeatureConfig, build_slice
from .frames import FrameSequence, sample_frames
from .tensor_core import TuckerModel, as_tensor, matricize

__all__ = [
    "PipelineConfig",
    "Fingerprint",
    "ConditionReport",
    "build_video_tensor",
    "compute_fingerprint",
    "fingerprint_video",
    "compute_match_tag",
    "comprehensive_feature",
    "core_condition_number",
    "condition_report",
    "format_float",
]


@dataclass(frozen=True)
class PipelineConfig:
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    frames: int = 64  # I3
    ard: ArdConfig = field(default_factory=ArdConfig)
    seed: int = 0

    def __post_init__(self):
        if self.frames < 2:
            raise ValueError("the frame count I3 must be at least 2")

    @property
    def dims(self) -> tuple:
        return (self.feature.standard_length, self.feature.columns, self.frames)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ard"]["prior"] = self.ard.prior.value
        d["ard"]["max_ranks"] = list(self.ard.max_ranks)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        feature = FeatureConfig(**d.pop("feature", {}))
        ard = ArdConfig(**d.pop("ard", {}))
        return cls(feature=feature, ard=ard, **d)

    def digest(self) -> str:
        """Stable short hash of every setting that influences a fingerprint."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class Fingerprint:
    vector: np.ndarray
    tag: float
    ranks: tuple
    config_digest: str

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("fingerprint vector must be finite")
        if not np.isfinite(self.tag):
            raise ValueError("match tag must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "tag", float(self.tag))
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))

    def __eq__(self, other):
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return (
            np.array_equal(self.vector, other.vector)
            and self.tag == other.tag
            and self.ranks == other.ranks
            and self.config_digest == other.config_digest
        )

    __hash__ = None

    def to_json(self, id: str | None = None) -> str:
        """One JSON object; floats carry 17 significant digits."""
        parts = []
        if id is not None:
            parts.append(f'"id":{json.dumps(str(id))}')
        parts.append('"y":[' + ",".join(format_float(x) for x in self.vector) + "]")
        parts.append(f'"tag":{format_float(self.tag)}')
        parts.append('"ranks":[' + ",".join(str(r) for r in self.ranks) + "]")
        parts.append(f'"config_digest":{json.dumps(self.config_digest)}')
        return "{" + ",".join(parts) + "}"

    @classmethod
    def from_obj(cls, obj: dict) -> "Fingerprint":
        return cls(
            np.asarray(obj["y"], dtype=np.float64),
            float(obj["tag"]),
            tuple(obj["ranks"]),
            str(obj["config_digest"]),
        )


def build_video_tensor(seq: FrameSequence, config: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """Stack per-frame feature slices along mode 3: shape ``(L, 2 + K, I3)``."""
    sampled = sample_frames(seq, config.frames)
    slices = []
    prev = None
    for frame in sampled.frames:
        slices.append(build_slice(prev, frame, config.feature))
        prev = frame
    return np.stack(slices, axis=2)


def compute_match_tag(core: np.ndarray) -> float:
    """Signed sum of all core entries."""
    return float(np.sum(np.asarray(core, dtype=np.float64)))


def comprehensive_feature(model: TuckerModel) -> np.ndarray:
    """Row means of ``|A^(n)|`` for the three factors, concatenated."""
    return np.concatenate([np.mean(np.abs(a), axis=1) for a in model.factors])


def compute_fingerprint(
    t: np.ndarray, config: PipelineConfig = PipelineConfig(), return_model: bool = False
):
    """ARD-Tucker decomposition of a video tensor, then the comprehensive feature.

    The pipeline has no random component, so ``config.seed`` only enters the
    config digest. With ``return_model`` the fitted Tucker model is returned
    as a second value.
    """
    t = as_tensor(t)
    result = ard_select_ranks(t, config.ard)
    model = result.model
    fp = Fingerprint(
        comprehensive_feature(model),
        compute_match_tag(model.core),
        result.selected_ranks,
        config.digest(),
    )
    return (fp, model) if return_model else fp


def fingerprint_video(seq: FrameSequence, config: PipelineConfig = PipelineConfig(), return_model=False):
    return compute_fingerprint(build_video_tensor(seq, config), config, return_model)


def core_condition_number(core: np.ndarray) -> float:
    """2-norm condition number of the mode-3 core unfolding; inf when rank deficient."""
    s = np.linalg.svd(matricize(core, 3), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return float("inf")
    cutoff = max(core.shape[2], core.shape[0] * core.shape[1]) * np.finfo(float).eps * s[0]
    if s[-1] <= cutoff:
        return float("inf")
    return float(s[0] / s[-1])


@dataclass(frozen=True)
class ConditionReport:
    values: tuple
    singular: int
    minimum: float
    median: float
    maximum: float

    def to_csv(self, ids=None) -> str:
        ids = ids if ids is not None else range(len(self.values))
        rows = ["id,condition"] + [f"{i},{format_float(v)}" for i, v in zip(ids, self.values)]
        return "\n".join(rows) + "\n"


def condition_report(models) -> ConditionReport:
    """Condition numbers of every model's core with summary stats.

    Rank-deficient cores count as +inf in the stats and in ``singular``.
    """
    models = list(models)
    if not models:
        raise ValueError("condition_report needs at least one model")
    values = tuple(core_condition_number(m.core) for m in models)
    arr = np.array(values)
    singular = int(np.sum(~np.isfinite(arr)))
    return ConditionReport(values, singular, float(arr.min()), float(np.median(arr)), float(arr.max()))
