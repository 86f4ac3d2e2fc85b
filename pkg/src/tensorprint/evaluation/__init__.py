"""Synthetic corpus, copy modifications, baseline fingerprint and detection metrics."""

from .baseline import concatenated_baseline_fingerprint
from .corpus import CorpusSpec, synth_corpus, synth_video
from .metrics import Counts, f_score, miss_false_alarm_area, roc_curve
from .modifications import (
    Kind,
    Modification,
    ModificationError,
    apply_modification,
    by_name,
    combined_modifications,
    single_modifications,
)
from .runner import EvalReport, System, compute_outputs, evaluate_outputs, run_evaluation

__all__ = [
    "CorpusSpec",
    "synth_corpus",
    "synth_video",
    "Kind",
    "Modification",
    "ModificationError",
    "apply_modification",
    "by_name",
    "single_modifications",
    "combined_modifications",
    "concatenated_baseline_fingerprint",
    "Counts",
    "f_score",
    "roc_curve",
    "miss_false_alarm_area",
    "System",
    "EvalReport",
    "compute_outputs",
    "evaluate_outputs",
    "run_evaluation",
]
