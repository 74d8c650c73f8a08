"""Velocity-threshold (I-VT) fixation/saccade classification."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ConfigurationError, DegenerateInputError


class SegmentKind(IntEnum):
    FIXATION = 0
    SACCADE = 1

    @property
    def short(self):
        return "fixation" if self is SegmentKind.FIXATION else "saccade"


FIXATION = SegmentKind.FIXATION
SACCADE = SegmentKind.SACCADE


@dataclass(frozen=True)
class IvtConfig:
    velocity_threshold: float = 50.0  # deg/s
    min_fixation_ms: float = 100.0
    min_saccade_ms: float = 12.0

    def __post_init__(self):
        for name in ("velocity_threshold", "min_fixation_ms", "min_saccade_ms"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    start_index: int
    end_index: int  # inclusive
    duration_ms: float

    @property
    def slice(self):
        return slice(self.start_index, self.end_index + 1)

    @property
    def n_samples(self):
        return self.end_index - self.start_index + 1


def _runs(values):
    """Yield ``(start, end_inclusive, value)`` for maximal runs of equal values."""
    values = np.asarray(values)
    if values.size == 0:
        return
    edges = np.flatnonzero(values[1:] != values[:-1]) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges - 1, [values.size - 1]))
    for s, e in zip(starts, ends):
        yield int(s), int(e), values[s]


def ivt_classify(ang_vel, t, cfg=IvtConfig()):
    """Label every sample as fixation or saccade.

    A sample is a fixation candidate when its angular velocity is below the
    threshold. A candidate run that ends in a saccade sample and lasted less
    than ``min_fixation_ms`` (measured up to that saccade sample's timestamp)
    is relabelled as saccade. The final run of the trace is never checked,
    mirroring the reference loop which only tests a fixation when it ends.
    """
    v = np.asarray(ang_vel, dtype=float)
    t = np.asarray(t, dtype=float)
    if v.size == 0:
        raise DegenerateInputError("empty velocity series")
    if v.shape != t.shape:
        raise DegenerateInputError("velocity and time series differ in length")
    labels = np.where(v < cfg.velocity_threshold, FIXATION, SACCADE).astype(np.int8)
    n = v.size
    for start, end, value in _runs(labels == FIXATION):
        if value and end + 1 < n and t[end + 1] - t[start] < cfg.min_fixation_ms:
            labels[start : end + 1] = SACCADE
    return labels


def _sample_period(t):
    return float(np.median(np.diff(t))) if t.size > 1 else 0.0


def build_segments(labels, t, cfg=IvtConfig(), valid=None):
    """Group per-sample labels into cleaned segments.

    Runs are split at invalid samples, which belong to no segment. A run
    lasts from its first sample to the onset of the sample following it
    (for the last sample of the trace, one median sample period is assumed).
    Saccades shorter than ``min_saccade_ms`` are dropped without merging
    their neighbours, as are fixations shorter than ``min_fixation_ms``.
    """
    labels = np.asarray(labels)
    t = np.asarray(t, dtype=float)
    if labels.shape != t.shape:
        raise DegenerateInputError("labels and time series differ in length")
    if labels.size == 0:
        return []
    valid = np.ones(labels.shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    n = labels.size
    period = _sample_period(t)
    # invalid samples get their own code so they form separate runs
    codes = np.where(valid, labels.astype(np.int8), np.int8(-1))
    segments = []
    for start, end, code in _runs(codes):
        if code < 0:
            continue
        kind = SegmentKind(int(code))
        stop = t[end + 1] if end + 1 < n else t[end] + period
        duration = float(stop - t[start])
        limit = cfg.min_fixation_ms if kind is FIXATION else cfg.min_saccade_ms
        if duration < limit:
            continue
        segments.append(Segment(kind, start, end, duration))
    return segments


def segment(ang_vel, t, cfg=IvtConfig(), valid=None):
    return build_segments(ivt_classify(ang_vel, t, cfg), t, cfg, valid)


def write_segments_csv(path, segments):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "start_index", "end_index", "duration_ms"])
        for s in segments:
            w.writerow([s.kind.short, s.start_index, s.end_index, repr(s.duration_ms)])
