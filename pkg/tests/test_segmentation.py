import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazeprint.errors import ConfigurationError, DegenerateInputError
from gazeprint.segmentation import (
    FIXATION,
    SACCADE,
    IvtConfig,
    build_segments,
    ivt_classify,
    segment,
    write_segments_csv,
)

from oracles import algorithm1, segments_bruteforce

F, S = int(FIXATION), int(SACCADE)


def times(n, dt=4.0):
    return np.arange(n) * dt


def test_config_must_be_positive():
    with pytest.raises(ConfigurationError):
        IvtConfig(velocity_threshold=0)


def test_all_slow_is_fixation():
    labels = ivt_classify(np.full(500, 10.0), times(500))
    assert np.all(labels == F)


def test_all_fast_is_saccade():
    assert np.all(ivt_classify(np.full(50, 200.0), times(50)) == S)


def test_short_fixation_relabelled():
    # 20 samples at 4 ms = 80 ms below threshold, flanked by fast runs
    v = np.concatenate([np.full(10, 200.0), np.full(20, 10.0), np.full(10, 200.0)])
    assert np.all(ivt_classify(v, times(40)) == S)


def test_long_fixation_kept():
    v = np.concatenate([np.full(10, 200.0), np.full(30, 10.0), np.full(10, 200.0)])
    labels = ivt_classify(v, times(50))
    assert np.all(labels[10:40] == F)


def test_empty_input():
    with pytest.raises(DegenerateInputError):
        ivt_classify(np.zeros(0), np.zeros(0))


def test_short_saccade_removed_without_merge():
    labels = np.array([F, F, F, S, S, F, F, F])
    segs = build_segments(labels, times(8), IvtConfig(min_fixation_ms=1.0))
    assert [s.kind for s in segs] == [FIXATION, FIXATION]
    assert [(s.start_index, s.end_index) for s in segs] == [(0, 2), (5, 7)]


def test_single_fixation_run():
    segs = build_segments(np.full(100, F), times(100))
    assert len(segs) == 1
    assert (segs[0].start_index, segs[0].end_index) == (0, 99)
    assert segs[0].duration_ms == pytest.approx(400.0)


def test_alternating_labels_leave_nothing():
    labels = np.array([F, S] * 50)
    assert build_segments(labels, times(100)) == []


def test_invalid_samples_break_runs():
    labels = np.full(100, F)
    valid = np.ones(100, bool)
    valid[40:45] = False
    segs = build_segments(labels, times(100), valid=valid)
    assert [(s.start_index, s.end_index) for s in segs] == [(0, 39), (45, 99)]


def test_segments_csv(tmp_path):
    segs = build_segments(np.array([F] * 30 + [S] * 5), times(35))
    write_segments_csv(tmp_path / "s.csv", segs)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "kind,start_index,end_index,duration_ms"
    assert lines[1] == "fixation,0,29,120.0"
    assert lines[2] == "saccade,30,34,20.0"


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 300))
def test_classify_matches_reference_loop(seed, n):
    rng = np.random.default_rng(seed)
    v = rng.choice([10.0, 200.0], size=n, p=[0.8, 0.2]) * rng.uniform(0.5, 1.5, n)
    t = np.cumsum(rng.uniform(2.0, 6.0, n))
    assert ivt_classify(v, t).tolist() == algorithm1(v, t, 50.0, 100.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200))
def test_segments_match_run_enumeration(seed, n):
    rng = np.random.default_rng(seed)
    v = rng.choice([10.0, 200.0], size=n, p=[0.85, 0.15])
    t = times(n)
    valid = rng.uniform(size=n) > 0.03
    got = [(int(s.kind), s.start_index, s.end_index, s.duration_ms) for s in segment(v, t, IvtConfig(), valid)]
    assert got == segments_bruteforce(algorithm1(v, t, 50.0, 100.0), t, 100.0, 12.0, valid.tolist())


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(10, 100), st.floats(0, 100))
def test_raising_threshold_never_loses_candidates(seed, vt, extra):
    v = np.random.default_rng(seed).uniform(0, 200, 100)
    lo = np.sum(v < vt)
    hi = np.sum(v < vt + extra)
    assert hi >= lo


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_segment_invariants(seed):
    rng = np.random.default_rng(seed)
    v = rng.choice([10.0, 200.0], size=300, p=[0.9, 0.1])
    segs = segment(v, times(300))
    cfg = IvtConfig()
    prev_end = -1
    for s in segs:
        assert s.start_index <= s.end_index
        assert s.start_index > prev_end
        prev_end = s.end_index
        limit = cfg.min_fixation_ms if s.kind is FIXATION else cfg.min_saccade_ms
        assert s.duration_ms >= limit
