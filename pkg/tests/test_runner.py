import numpy as np
import pytest

from tensorprint.ard import ArdConfig
from tensorprint.evaluation.baseline import concatenated_baseline_fingerprint
from tensorprint.evaluation.corpus import CorpusSpec, synth_corpus
from tensorprint.evaluation.modifications import Kind, Modification
from tensorprint.evaluation.runner import (
    System,
    SystemOutputs,
    compute_outputs,
    evaluate_outputs,
    modification_seed,
    run_evaluation,
)
from tensorprint.fingerprint import PipelineConfig

SMALL = PipelineConfig(frames=8, ard=ArdConfig(max_ranks=(3, 3, 3)))


@pytest.fixture(scope="module")
def videos():
    return synth_corpus(CorpusSpec(n_videos=3, frames=12, width=48, height=40))


def test_pair_enumeration():
    # two videos: copies at distance 0.1, non-copies at 0.9
    outputs = SystemOutputs(
        System.CONCATENATED,
        [np.array([0.0]), np.array([10.0])],
        {"identity": [np.array([0.1]), np.array([10.1])]},
        [],
        0.0,
    )
    report = evaluate_outputs(outputs, tau=0.5)
    r = report.result("identity")
    assert r.positives.tolist() == pytest.approx([0.1, 0.1])
    assert sorted(r.negatives.tolist()) == pytest.approx([9.9, 10.1])
    c = r.decision
    assert (c.tp, c.fp, c.tn, c.fn) == (2, 0, 2, 0)
    assert r.roc_area == 0.0


def test_distances_orientation():
    outputs = SystemOutputs(
        System.CONCATENATED, [np.array([0.0]), np.array([1.0])], {"m": [np.array([3.0]), np.array([7.0])]}, [], 0.0
    )
    np.testing.assert_allclose(outputs.distances("m"), [[3.0, 7.0], [2.0, 6.0]])


def test_seeds_are_distinct_and_stable():
    seeds = {modification_seed(0, v, m) for v in range(20) for m in range(5)}
    assert len(seeds) == 100
    assert modification_seed(1, 2, 3) == modification_seed(1, 2, 3)


def test_identity_copies_match_exactly(videos):
    report = run_evaluation(videos, [Modification(Kind.IDENTITY), Modification(Kind.FLIP)], config=SMALL)
    ident = report.result("identity")
    assert np.all(ident.positives == 0)
    assert report.threshold_model is not None and report.tau == report.threshold_model.tau
    lines = report.to_csv().splitlines()
    assert lines[0].startswith("# config_digest=")
    assert sum(1 for line in lines if line.startswith("identity,comprehensive,")) == 1
    assert report.roc_csv().startswith("modification,system,false_alarm,miss")
    assert "identity" in report.summary()


def test_extra_thresholds_add_rows(videos):
    report = run_evaluation(
        videos, [Modification(Kind.IDENTITY)], thresholds=[0.1, 0.2], tau=0.3, config=SMALL
    )
    assert [c.tau for c in report.result("identity").sweep] == [0.1, 0.2, 0.3]


def test_workers_do_not_change_results(videos):
    mods = [Modification(Kind.AWGN)]
    one = compute_outputs(videos, mods, config=SMALL, workers=1)
    two = compute_outputs(videos, mods, config=SMALL, workers=2)
    assert np.array_equal(one.distances("awgn"), two.distances("awgn"))


def test_baseline_vector(videos):
    v = concatenated_baseline_fingerprint(videos[0], SMALL)
    assert v.shape == (3 * 64,)
    assert v[:64].sum() == pytest.approx(1.0)
    outputs = compute_outputs(videos, [Modification(Kind.IDENTITY)], System.CONCATENATED, SMALL)
    assert outputs.models == []
    assert np.allclose(np.diag(outputs.distances("identity")), 0.0)


def test_duplicate_modifications_rejected(videos):
    with pytest.raises(ValueError):
        compute_outputs(videos, [Modification(Kind.FLIP)] * 2, config=SMALL)
