import itertools

import numpy as np
import pytest

from gazeprint.errors import ConfigurationError, InsufficientDataError
from gazeprint.evaluation import compute_eer
from gazeprint.pipeline import PipelineConfig, RecordingFeatures, config_from_dict, extract_recording, select_subjects
from gazeprint.rbfn import train_network
from gazeprint.segmentation import FIXATION
from gazeprint.selection import N_TOTAL, SelectionRun, _Objective, backward_pass, backward_select, eer_objective, make_split
from gazeprint.synth import generate_recording, make_profiles, subject_name

SMALL = config_from_dict({"k_per_subject": "6"})


def separable(n_subjects, sessions=("S1", "S2"), n_rows=25, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_subjects):
        for s in sessions:
            fix = i + 0.05 * rng.uniform(size=(n_rows, 12))
            sac = i + 0.05 * rng.uniform(size=(n_rows, 46))
            out.append(RecordingFeatures(f"P{i}", s, fix, sac))
    return out


def two_feature_eer(mask, train, test):
    """EER of a single RBF network using the selected columns of a 2-feature toy set."""
    cols = np.flatnonzero(mask)
    (xa, ya), (xb, yb) = train, test
    net = train_network(FIXATION, xa[:, cols], ya, ("a", "b"), k=3)
    out = net.outputs(xb[:, cols])
    genuine = out[np.arange(len(yb)), yb]
    impostor = out[np.arange(len(yb)), 1 - yb]
    return compute_eer(genuine, impostor)[0]


def test_toy_noise_feature_dropped():
    rng = np.random.default_rng(0)

    def draw(n):
        y = np.repeat([0, 1], n)
        x = np.column_stack([rng.uniform(size=2 * n), y + 0.1 * rng.uniform(size=2 * n)])
        return x, y

    train, test = draw(30), draw(30)
    objective = lambda m: two_feature_eer(m, train, test)  # noqa: E731
    mask, trace = backward_pass(2, objective)
    assert mask.tolist() == [False, True]
    # exhaustive search over the four masks (empty mask scores +inf)
    scores = {m: (objective(np.array(m)) if any(m) else np.inf) for m in itertools.product([False, True], repeat=2)}
    best = min(scores.values())
    smallest = min((m for m, v in scores.items() if v == best), key=sum)
    assert tuple(mask.tolist()) == smallest
    assert [(i, j) for i, j, _ in trace] == [(0, False), (0, True), (1, False), (1, True)]


def test_identical_copies_keep_nonempty_mask():
    mask, _ = backward_pass(5, lambda m: 12.5)
    assert mask.any()
    assert mask.tolist() == [False, False, False, False, True]


def test_pass_only_accepts_strict_improvement():
    # objective prefers feature 2 in; everything else indifferent
    mask, trace = backward_pass(4, lambda m: 10.0 - 5.0 * m[2])
    assert mask.tolist() == [False, False, True, False]


def test_separable_eer_is_zero():
    data = separable(4)
    train = [r for r in data if r.session_id == "S1"]
    test = [r for r in data if r.session_id == "S2"]
    assert eer_objective(np.ones(N_TOTAL, bool), train, test, cfg=SMALL) == 0.0


def test_fixation_only_mask_is_finite():
    data = separable(4)
    train = [r for r in data if r.session_id == "S1"]
    test = [r for r in data if r.session_id == "S2"]
    fix = [True] * 12
    eer = eer_objective((fix, [False] * 46), train, test, cfg=SMALL)
    assert np.isfinite(eer) and eer == 0.0
    with pytest.raises(ConfigurationError):
        eer_objective(([False] * 12, [False] * 46), train, test)


@pytest.fixture(scope="module")
def cohort20():
    recs = []
    for i, p in enumerate(make_profiles(20, seed=5)):
        for s in ("S1", "S2"):
            recs.append(extract_recording(generate_recording(p, "RAN", 20.0, session=s, subject_id=subject_name(i))))
    return recs


def test_shuffled_labels_give_chance_eer(cohort20):
    train = [r for r in cohort20 if r.session_id == "S1"]
    test = [r for r in cohort20 if r.session_id == "S2"]
    ids = [r.subject_id for r in test]
    shifted = ids[7:] + ids[:7]  # a derangement of the probe labels
    shuffled = [RecordingFeatures(s, r.session_id, r.fix, r.sacc) for s, r in zip(shifted, test)]
    true_eer = eer_objective(np.ones(N_TOTAL, bool), train, test, cfg=SMALL)
    null_eer = eer_objective(np.ones(N_TOTAL, bool), train, shuffled, cfg=SMALL)
    assert true_eer < null_eer - 20.0
    assert abs(null_eer - 50.0) <= 10.0


def test_backward_select_end_to_end(cohort20):
    data = select_subjects(cohort20, 0.3, 1)
    run = SelectionRun("RAN", iterations=1, subset_fraction=1.0, seed=4)
    a = backward_select(data, run, SMALL)
    b = backward_select(data, run, SMALL)
    assert a.result_mask == b.result_mask and a.eer_trace == b.eer_trace
    assert any(a.result_mask[FIXATION]) or any(a.result_mask[1])
    assert len(a.eer_trace) == 2 * N_TOTAL
    # the returned mask is no worse than all features on the same split
    rng = np.random.default_rng([4, 0])
    subset = select_subjects(data, 1.0, rng)
    objective = _Objective(*make_split(subset, rng), "RAN", SMALL)
    final = np.array(a.iteration_masks[0])
    assert objective(final) <= objective(np.ones(N_TOTAL, bool))
    schemas = a.schemas()
    assert schemas[FIXATION].n_active + schemas[1].n_active == final.sum()


def test_majority_vote_ties_include(cohort20):
    data = select_subjects(cohort20, 0.3, 2)
    run = backward_select(data, SelectionRun("RAN", iterations=2, subset_fraction=1.0, seed=1), SMALL)
    votes = np.array(run.iteration_masks).sum(axis=0)
    final = np.array(run.result_mask[FIXATION] + run.result_mask[1])
    np.testing.assert_array_equal(final, votes >= 1)


def test_single_session_uses_segment_split():
    data = separable(3, sessions=("S1",))
    rng = np.random.default_rng(0)
    train, test = make_split(data, rng)
    for a, b, src in zip(train, test, data):
        assert a.fix.shape[0] + b.fix.shape[0] == src.fix.shape[0]
    run = backward_select(data, SelectionRun(iterations=1, subset_fraction=1.0), SMALL)
    assert run.result_mask is not None


def test_needs_two_subjects():
    with pytest.raises(InsufficientDataError):
        backward_select(separable(1), SelectionRun(iterations=1), PipelineConfig())


def test_run_validation():
    with pytest.raises(ConfigurationError):
        SelectionRun(iterations=0)
    with pytest.raises(ConfigurationError):
        SelectionRun(subset_fraction=0.0)
