"""Copy-detection evaluation over a corpus and a set of modifications.

Positive pairs are (original i, modified copy of i); negative pairs are
(original i, modified copy of j) for every j != i, per modification.
"""

from __future__ import annotations

import enum
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..fingerprint import Fingerprint, PipelineConfig, fingerprint_video, format_float
from ..frames import FrameSequence
from ..matchdb import ThresholdModel, fit_threshold
from .baseline import concatenated_baseline_fingerprint
from .metrics import Counts, counts_at, miss_false_alarm_area, roc_curve
from .modifications import Modification, apply_modification

__all__ = [
    "System",
    "SystemOutputs",
    "ModificationResult",
    "EvalReport",
    "modification_seed",
    "compute_outputs",
    "evaluate_outputs",
    "run_evaluation",
]


class System(str, enum.Enum):
    COMPREHENSIVE = "comprehensive"
    CONCATENATED = "concatenated"


def modification_seed(seed: int, video: int, mod: int) -> int:
    """Independent 63-bit seed for modifying video ``video`` with modification ``mod``."""
    state = np.random.SeedSequence([int(seed), int(video), int(mod)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def _job(args):
    system, seq, config, mod, seed = args
    if mod is not None:
        seq = apply_modification(seq, mod, seed)
    if system is System.CONCATENATED:
        return concatenated_baseline_fingerprint(seq, config), None
    fp, model = fingerprint_video(seq, config, return_model=True)
    return fp, model


def _run_jobs(jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


@dataclass
class SystemOutputs:
    """Fingerprints of the originals and of every modified copy for one system.

    ``originals`` and each ``modified[name]`` hold :class:`Fingerprint`
    objects for the comprehensive system and plain vectors for the baseline.
    ``models`` keeps the Tucker models of the originals (comprehensive only).
    """

    system: System
    originals: list
    modified: dict
    models: list
    seconds: float

    def vectors(self, items) -> np.ndarray:
        return np.stack([it.vector if isinstance(it, Fingerprint) else np.asarray(it) for it in items])

    def distances(self, name: str) -> np.ndarray:
        """Matrix ``D[i, j]`` = distance between original ``i`` and modified copy ``j``."""
        a = self.vectors(self.originals)
        b = self.vectors(self.modified[name])
        return np.sqrt(np.maximum(0.0, ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)))


def compute_outputs(
    corpus: Sequence[FrameSequence],
    modifications: Sequence[Modification],
    system: System = System.COMPREHENSIVE,
    config: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    workers: int = 1,
) -> SystemOutputs:
    corpus = list(corpus)
    if len(corpus) < 2:
        raise ValueError("evaluation needs at least 2 videos")
    system = System(system)
    names = [m.name for m in modifications]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate modifications: {names}")
    workers = int(workers) if workers else (os.cpu_count() or 1)
    start = time.perf_counter()
    jobs = [(system, seq, config, None, 0) for seq in corpus]
    for k, m in enumerate(modifications):
        jobs += [(system, seq, config, m, modification_seed(seed, i, k)) for i, seq in enumerate(corpus)]
    results = _run_jobs(jobs, workers)
    n = len(corpus)
    originals = [r[0] for r in results[:n]]
    models = [r[1] for r in results[:n]] if system is System.COMPREHENSIVE else []
    modified = {
        m.name: [r[0] for r in results[n * (k + 1) : n * (k + 2)]] for k, m in enumerate(modifications)
    }
    return SystemOutputs(system, originals, modified, models, time.perf_counter() - start)


@dataclass(frozen=True)
class ModificationResult:
    name: str
    system: str
    decision: Counts
    beta: float
    roc: tuple
    sweep: tuple
    positives: np.ndarray = field(repr=False)
    negatives: np.ndarray = field(repr=False)

    @property
    def precision(self) -> float:
        return self.decision.precision

    @property
    def recall(self) -> float:
        return self.decision.recall

    @property
    def f_score(self) -> float:
        return self.decision.f_score(self.beta)

    @property
    def roc_area(self) -> float:
        return miss_false_alarm_area(self.roc)


@dataclass(frozen=True)
class EvalReport:
    system: str
    tau: float
    threshold_model: ThresholdModel | None
    beta: float
    results: tuple
    seconds: float
    header: dict = field(default_factory=dict)

    def result(self, name: str) -> ModificationResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_csv(self) -> str:
        """One row per (modification, system, threshold); ``#`` lines carry the run settings."""
        lines = [f"# {k}={v}" for k, v in sorted(self.header.items())]
        lines.append(f"# tau={format_float(self.tau)}")
        lines.append("modification,system,threshold,tp,fp,tn,fn,precision,recall,f_beta,miss,false_alarm")
        for r in self.results:
            for c in r.sweep:
                lines.append(
                    ",".join(
                        [r.name, r.system, format_float(c.tau), str(c.tp), str(c.fp), str(c.tn), str(c.fn)]
                        + [
                            format_float(x)
                            for x in (c.precision, c.recall, c.f_score(self.beta), c.miss, c.false_alarm)
                        ]
                    )
                )
        return "\n".join(lines) + "\n"

    def roc_csv(self) -> str:
        lines = ["modification,system,false_alarm,miss"]
        for r in self.results:
            lines += [f"{r.name},{r.system},{format_float(fa)},{format_float(m)}" for fa, m in r.roc]
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        rows = [f"system={self.system} tau={self.tau:.4f} beta={self.beta}"]
        for r in self.results:
            rows.append(
                f"{r.name:<12} precision={r.precision:.3f} recall={r.recall:.3f} "
                f"F={r.f_score:.3f} miss_fa_area={r.roc_area:.4f}"
            )
        return "\n".join(rows)


def evaluate_outputs(
    outputs: SystemOutputs,
    tau: float | None = None,
    thresholds: Sequence[float] = (),
    beta: float = 0.5,
    header: dict | None = None,
) -> EvalReport:
    """Metrics at the decision threshold plus the full ROC for every modification.

    Without ``tau`` the decision threshold is fitted with
    :func:`fit_threshold` on the copy and non-copy distances pooled over all
    modifications. ``thresholds`` adds extra report rows.
    """
    names = list(outputs.modified)
    if not names:
        raise ValueError("no modifications to evaluate")
    pos, neg = {}, {}
    for name in names:
        d = outputs.distances(name)
        off = ~np.eye(d.shape[0], dtype=bool)
        pos[name], neg[name] = np.diag(d).copy(), d[off]
    model = None
    if tau is None:
        model = fit_threshold(np.concatenate(list(pos.values())), np.concatenate(list(neg.values())))
        tau = model.tau
    results = []
    for name in names:
        pairs = [(x, True) for x in pos[name]] + [(x, False) for x in neg[name]]
        decision = counts_at(pairs, tau)
        taus = sorted({float(tau), *map(float, thresholds)})
        results.append(
            ModificationResult(
                name,
                outputs.system.value,
                decision,
                beta,
                tuple(roc_curve(pairs)),
                tuple(counts_at(pairs, t) for t in taus),
                pos[name],
                neg[name],
            )
        )
    return EvalReport(outputs.system.value, float(tau), model, beta, tuple(results), outputs.seconds, header or {})


def run_evaluation(
    corpus: Sequence[FrameSequence],
    modifications: Sequence[Modification],
    system: System = System.COMPREHENSIVE,
    thresholds: Sequence[float] = (),
    tau: float | None = None,
    config: PipelineConfig = PipelineConfig(),
    seed: int = 0,
    beta: float = 0.5,
    workers: int = 1,
) -> EvalReport:
    """Fingerprint originals and modified copies, then score every modification."""
    outputs = compute_outputs(corpus, modifications, system, config, seed, workers)
    header = {"config_digest": config.digest(), "seed": seed, "videos": len(outputs.originals)}
    return evaluate_outputs(outputs, tau, thresholds, beta, header)
