"""Fingerprint database with match-tag pre-filtering and threshold decisions.

Records live in memory in insertion order; an index sorted by match tag
turns the pre-match interval query into two binary searches. On disk the
database is a JSON-lines file whose first line is a header
``{"version": 1, "config_digest": ...}``.
"""

from __future__ import annotations

import enum
import json
import math
import os
import tempfile
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fingerprint import Fingerprint, format_float

__all__ = [
    "MatchError",
    "Decision",
    "FingerprintRecord",
    "SearchHit",
    "FingerprintDatabase",
    "ThresholdModel",
    "CalibrationCurve",
    "l2_distance",
    "decide_copy",
    "tag_interval",
    "fit_threshold",
    "calibrate_adjustment_factor",
    "DB_VERSION",
]

DB_VERSION = 1
PS_TARGET = 0.95


class MatchError(ValueError):
    pass


class Decision(str, enum.Enum):
    COPY = "copy"
    DIFFERENT = "different"


@dataclass(frozen=True)
class FingerprintRecord:
    id: str
    fingerprint: Fingerprint
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise MatchError("record id must be a non-empty string")
        object.__setattr__(self, "meta", {str(k): str(v) for k, v in dict(self.meta).items()})

    def to_json(self) -> str:
        line = self.fingerprint.to_json(self.id)
        if self.meta:
            line = line[:-1] + ',"meta":' + json.dumps(self.meta, sort_keys=True) + "}"
        return line

    @classmethod
    def from_obj(cls, obj: dict) -> "FingerprintRecord":
        return cls(str(obj["id"]), Fingerprint.from_obj(obj), obj.get("meta", {}))


@dataclass(frozen=True)
class SearchHit:
    id: str
    distance: float
    decision: Decision


def l2_distance(f1: Fingerprint, f2: Fingerprint) -> float:
    if f1.config_digest != f2.config_digest:
        raise MatchError(
            f"fingerprints come from different configs ({f1.config_digest} vs {f2.config_digest})"
        )
    if f1.vector.shape != f2.vector.shape:
        raise MatchError(f"fingerprint lengths differ: {f1.vector.size} vs {f2.vector.size}")
    return float(np.linalg.norm(f1.vector - f2.vector))


def decide_copy(distance: float, tau: float) -> Decision:
    """Copy when ``distance <= tau`` (inclusive boundary)."""
    if not tau > 0:
        raise MatchError("tau must be positive")
    return Decision.COPY if distance <= tau else Decision.DIFFERENT


def tag_interval(tag: float, a: float) -> tuple:
    """``[tag - a|tag|, tag + a|tag|]``; the absolute value keeps negative tags well ordered."""
    if not 0.0 <= a <= 1.0:
        raise MatchError(f"adjustment factor must lie in [0, 1], got {a}")
    half = a * abs(tag)
    return tag - half, tag + half


class FingerprintDatabase:
    """In-memory fingerprint store bound to one pipeline config digest.

    Reads work on an immutable snapshot of the tag index, so searches may
    run from several threads while a single writer inserts.
    """

    def __init__(self, config_digest: str):
        if not config_digest:
            raise MatchError("a database needs a config digest")
        self.config_digest = str(config_digest)
        self._records: list = []
        self._ids: dict = {}
        self._lock = threading.Lock()
        self._snapshot = None

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(list(self._records))

    def __contains__(self, rid) -> bool:
        return rid in self._ids

    def get(self, rid: str) -> FingerprintRecord:
        try:
            return self._records[self._ids[rid]]
        except KeyError:
            raise MatchError(f"unknown record id {rid!r}") from None

    @property
    def records(self) -> tuple:
        return tuple(self._records)

    def insert(self, record: FingerprintRecord) -> None:
        if record.fingerprint.config_digest != self.config_digest:
            raise MatchError(
                f"record {record.id!r} has config digest {record.fingerprint.config_digest}, "
                f"database expects {self.config_digest}"
            )
        with self._lock:
            if record.id in self._ids:
                raise MatchError(f"duplicate record id {record.id!r}")
            self._ids[record.id] = len(self._records)
            self._records.append(record)
            self._snapshot = None

    def add(self, rid: str, fp: Fingerprint, meta: dict | None = None) -> FingerprintRecord:
        rec = FingerprintRecord(rid, fp, meta or {})
        self.insert(rec)
        return rec

    # -- index -------------------------------------------------------------

    def _index(self):
        snap = self._snapshot
        if snap is None:
            with self._lock:
                recs = tuple(self._records)
                tags = np.array([r.fingerprint.tag for r in recs], dtype=np.float64)
                order = np.argsort(tags, kind="stable")
                vectors = (
                    np.stack([r.fingerprint.vector for r in recs])
                    if recs
                    else np.zeros((0, 0))
                )
                snap = (recs, tags[order], order, vectors)
                self._snapshot = snap
        return snap

    def pre_match_indices(self, query_tag: float, a: float) -> np.ndarray:
        """Insertion-order indices of records whose tag lies in the query interval."""
        lo, hi = tag_interval(query_tag, a)
        _, sorted_tags, order, _ = self._index()
        left = np.searchsorted(sorted_tags, lo, side="left")
        right = np.searchsorted(sorted_tags, hi, side="right")
        return np.sort(order[left:right])

    def pre_match(self, query_tag: float, a: float) -> list:
        recs = self._index()[0]
        return [recs[i] for i in self.pre_match_indices(query_tag, a)]

    def _rank(self, query: Fingerprint, idx: np.ndarray, tau: float) -> list:
        recs, _, _, vectors = self._index()
        if idx.size == 0:
            return []
        if query.config_digest != self.config_digest:
            raise MatchError(
                f"query config digest {query.config_digest} does not match database {self.config_digest}"
            )
        if vectors.shape[1] != query.vector.size:
            raise MatchError(f"query length {query.vector.size} != stored length {vectors.shape[1]}")
        dist = np.linalg.norm(vectors[idx] - query.vector, axis=1)
        order = np.lexsort((idx, dist))
        return [
            SearchHit(recs[idx[k]].id, float(dist[k]), decide_copy(float(dist[k]), tau))
            for k in order
        ]

    def search(self, query: Fingerprint, a: float, tau: float) -> list:
        """Pre-match by tag, then rank the candidates by L2 distance (ties by insertion order)."""
        decide_copy(0.0, tau)
        return self._rank(query, self.pre_match_indices(query.tag, a), tau)

    def search_exhaustive(self, query: Fingerprint, tau: float) -> list:
        """Rank every record; the ground truth that pre-matched search approximates."""
        decide_copy(0.0, tau)
        return self._rank(query, np.arange(len(self._index()[0])), tau)

    # -- persistence -------------------------------------------------------

    def dumps(self) -> str:
        header = json.dumps({"version": DB_VERSION, "config_digest": self.config_digest}, sort_keys=True)
        return "".join([header + "\n"] + [r.to_json() + "\n" for r in self._records])

    def save(self, path) -> None:
        """Write atomically: a temp file in the target directory, then rename."""
        path = os.fspath(path)
        directory = os.path.dirname(os.path.abspath(path))
        text = self.dumps()
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".jsonl", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def loads(cls, text: str) -> "FingerprintDatabase":
        lines = text.splitlines()
        if not lines:
            raise MatchError("line 1: missing database header")
        try:
            header = json.loads(lines[0])
            version, digest = header["version"], header["config_digest"]
        except (ValueError, KeyError, TypeError) as exc:
            raise MatchError(f"line 1: malformed header ({exc})") from None
        if version != DB_VERSION:
            raise MatchError(f"line 1: unsupported database version {version}")
        db = cls(digest)
        for no, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                rec = FingerprintRecord.from_obj(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise MatchError(f"line {no}: malformed record ({exc})") from None
            try:
                db.insert(rec)
            except MatchError as exc:
                raise MatchError(f"line {no}: {exc}") from None
        return db

    @classmethod
    def load(cls, path) -> "FingerprintDatabase":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.loads(fh.read())


@dataclass(frozen=True)
class ThresholdModel:
    mu_v: float
    sigma_v: float
    mu_w: float
    sigma_w: float
    tau: float

    def to_csv(self) -> str:
        rows = [
            "class,mu,sigma,tau",
            f"v,{format_float(self.mu_v)},{format_float(self.sigma_v)},{format_float(self.tau)}",
            f"w,{format_float(self.mu_w)},{format_float(self.sigma_w)},{format_float(self.tau)}",
        ]
        return "\n".join(rows) + "\n"


def _gaussian_fit(samples, name):
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise MatchError(f"need at least 2 {name} samples")
    if not np.all(np.isfinite(x)):
        raise MatchError(f"{name} samples must be finite")
    sigma = float(np.std(x))
    if not sigma > 0:
        raise MatchError(f"{name} samples have zero variance")
    return float(np.mean(x)), sigma


def fit_threshold(v_samples: Sequence[float], w_samples: Sequence[float]) -> ThresholdModel:
    """Gaussian fits to copy distances ``v`` and non-copy distances ``w``; tau at their crossing.

    The crossing solves ``N(x; mu_v, s_v) = N(x; mu_w, s_w)``, a quadratic in
    ``x``. The root between the means is used (the one nearest the midpoint
    if both qualify). If the densities do not cross between the means the
    midpoint is returned.
    """
    mv, sv = _gaussian_fit(v_samples, "copy")
    mw, sw = _gaussian_fit(w_samples, "non-copy")
    if mv >= mw:
        raise MatchError(
            f"copies are not closer than non-copies (mu_v={mv:.6g} >= mu_w={mw:.6g}); the system is unusable"
        )
    mid = 0.5 * (mv + mw)
    qa = 1.0 / sv**2 - 1.0 / sw**2
    qb = -2.0 * (mv / sv**2 - mw / sw**2)
    qc = mv**2 / sv**2 - mw**2 / sw**2 + 2.0 * math.log(sv / sw)
    if abs(qa) <= 1e-12 * max(1.0 / sv**2, 1.0 / sw**2):
        roots = [-qc / qb]
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0:
            roots = []
        else:
            sq = math.sqrt(disc)
            # numerically stable pair of roots
            q = -0.5 * (qb + math.copysign(sq, qb))
            roots = [q / qa, qc / q] if q != 0 else [-qb / (2.0 * qa)]
    inside = [r for r in roots if mv <= r <= mw]
    tau = min(inside, key=lambda r: abs(r - mid)) if inside else mid
    if not tau > 0:
        raise MatchError(f"fitted threshold {tau:.6g} is not positive")
    return ThresholdModel(mv, sv, mw, sw, float(tau))


@dataclass(frozen=True)
class CalibrationCurve:
    a: tuple
    ps: tuple
    pnd: tuple
    chosen: float
    meets_target: bool

    def to_csv(self) -> str:
        rows = ["a,Ps,Pnd"] + [
            f"{format_float(a)},{format_float(p)},{format_float(n)}"
            for a, p, n in zip(self.a, self.ps, self.pnd)
        ]
        return "\n".join(rows) + "\n"


def calibrate_adjustment_factor(
    db: FingerprintDatabase,
    labeled_pairs: Iterable,
    a_grid: Sequence[float],
    ps_target: float = PS_TARGET,
) -> CalibrationCurve:
    """Measure pre-match retention ``Ps`` and exclusion ``Pnd`` over a grid of ``a``.

    ``labeled_pairs`` holds ``(query fingerprint, ids of its true copies)``.
    ``Ps`` is the fraction of (query, true copy) pairs whose stored record
    survives pre-matching; ``Pnd`` is the fraction of (query, other record)
    pairs that are filtered out. The chosen ``a`` is the smallest grid value
    reaching ``ps_target``; failing that, the first value where ``Ps``
    catches up with ``Pnd``, else the largest value.
    """
    grid = sorted(float(a) for a in a_grid)
    if not grid:
        raise MatchError("the a grid is empty")
    for a in grid:
        tag_interval(0.0, a)
    pairs = []
    for query, ids in labeled_pairs:
        ids = {ids} if isinstance(ids, str) else set(ids)
        missing = [i for i in ids if i not in db]
        if missing:
            raise MatchError(f"unknown positive ids {sorted(missing)}")
        pairs.append((query, ids))
    n_pos = sum(len(ids) for _, ids in pairs)
    if n_pos == 0:
        raise MatchError("calibration needs at least one labeled positive")
    n_neg = sum(len(db) - len(ids) for _, ids in pairs)
    recs = db.records
    ps, pnd = [], []
    for a in grid:
        kept_pos = 0
        kept_neg = 0
        for query, ids in pairs:
            cand = db.pre_match_indices(query.tag, a)
            hit = sum(1 for i in cand if recs[i].id in ids)
            kept_pos += hit
            kept_neg += cand.size - hit
        ps.append(kept_pos / n_pos)
        pnd.append(1.0 - kept_neg / n_neg if n_neg else 1.0)
    meets = [a for a, p in zip(grid, ps) if p >= ps_target]
    if meets:
        chosen = meets[0]
    else:
        crossing = [a for a, p, n in zip(grid, ps, pnd) if p >= n]
        chosen = crossing[0] if crossing else grid[-1]
    return CalibrationCurve(tuple(grid), tuple(ps), tuple(pnd), chosen, bool(meets))
