"""Biometric evaluation: EER, DET, Rank-n / CMC and greedy one-to-one matching."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ShapeError


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Similarity scores, rows = enrolled subjects, columns = probes.

    ``truth[j]`` is the row index of probe ``j``'s true subject, or -1 when
    the probe's identity is unknown or not enrolled.
    """

    D: np.ndarray
    labeled_ids: tuple
    probe_ids: tuple
    truth: np.ndarray | None = None

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        if D.shape != (len(self.labeled_ids), len(self.probe_ids)):
            raise ShapeError(f"score matrix shape {D.shape} does not match ids")
        if not np.all(np.isfinite(D)):
            raise ShapeError("score matrix contains non-finite entries")
        object.__setattr__(self, "D", D)
        if self.truth is not None:
            object.__setattr__(self, "truth", np.asarray(self.truth, dtype=int))

    def genuine_impostor(self):
        """Split scores into genuine and impostor sets using ``truth``."""
        if self.truth is None:
            raise InsufficientDataError("score matrix has no ground truth")
        known = np.flatnonzero(self.truth >= 0)
        genuine = self.D[self.truth[known], known]
        mask = np.zeros(self.D.shape, dtype=bool)
        mask[:, known] = True
        mask[self.truth[known], known] = False
        return genuine, self.D[mask]


def minmax_normalize(D):
    D = np.asarray(D, dtype=float)
    if D.size == 0:
        return D.copy()
    lo, hi = D.min(), D.max()
    if hi == lo:
        return np.zeros_like(D)
    return (D - lo) / (hi - lo)


def _sweep_thresholds(genuine, impostor):
    scores = np.unique(np.concatenate([genuine, impostor]))
    mids = (scores[:-1] + scores[1:]) / 2
    span = max(scores[-1] - scores[0], 1.0)
    below, above = scores[0] - span, scores[-1] + span
    return np.sort(np.concatenate([[below], scores, mids, [above]]))


def error_rates(genuine, impostor, thresholds):
    """FAR and FRR (fractions) when accepting scores >= threshold."""
    g = np.sort(np.asarray(genuine, dtype=float))
    i = np.sort(np.asarray(impostor, dtype=float))
    thresholds = np.asarray(thresholds, dtype=float)
    far = 1.0 - np.searchsorted(i, thresholds, side="left") / i.size
    frr = np.searchsorted(g, thresholds, side="left") / g.size
    return far, frr


def det_curve(genuine, impostor):
    """``(thresholds, FAR, FRR)`` over the observed scores and their midpoints."""
    genuine = np.asarray(genuine, dtype=float).ravel()
    impostor = np.asarray(impostor, dtype=float).ravel()
    if genuine.size == 0 or impostor.size == 0:
        raise InsufficientDataError("EER needs non-empty genuine and impostor score sets")
    thr = _sweep_thresholds(genuine, impostor)
    far, frr = error_rates(genuine, impostor, thr)
    return thr, far, frr


def compute_eer(genuine, impostor):
    """Equal error rate in percent, with the threshold where it occurs.

    FAR - FRR is non-increasing along the threshold sweep; the crossing is
    located between adjacent sweep points and both rates are interpolated
    linearly there.
    """
    thr, far, frr = det_curve(genuine, impostor)
    diff = far - frr
    exact = np.flatnonzero(diff == 0)
    if exact.size:
        k = exact[0]
        return 100.0 * far[k], float(thr[k])
    k = int(np.flatnonzero(diff > 0)[-1])
    a = diff[k] / (diff[k] - diff[k + 1])
    eer = far[k] + a * (far[k + 1] - far[k])
    return 100.0 * float(eer), float(thr[k] + a * (thr[k + 1] - thr[k]))


def true_ranks(sm):
    """Pessimistic rank of each probe's true subject (1 = best); -1 if unknown."""
    if sm.truth is None:
        raise InsufficientDataError("score matrix has no ground truth")
    ranks = np.full(sm.D.shape[1], -1)
    for j, t in enumerate(sm.truth):
        if t < 0:
            continue
        col = sm.D[:, j]
        others = np.delete(col, t)
        ranks[j] = 1 + int(np.sum(others >= col[t]))
    return ranks


def rank_accuracy(sm, n=1):
    """Percentage of probes whose true subject is among the top ``n`` scores.

    Competitors tied with the true subject are counted as ranked above it.
    """
    ranks = true_ranks(sm)
    ranks = ranks[ranks > 0]
    if ranks.size == 0:
        raise InsufficientDataError("no probe has a known enrolled identity")
    return 100.0 * float(np.mean(ranks <= n))


def cmc_curve(sm):
    """Rank-n accuracy (percent) for n = 1..m."""
    ranks = true_ranks(sm)
    ranks = ranks[ranks > 0]
    if ranks.size == 0:
        raise InsufficientDataError("no probe has a known enrolled identity")
    m = sm.D.shape[0]
    return np.array([100.0 * np.mean(ranks <= n) for n in range(1, m + 1)])


def one_to_one_match(D):
    """Greedy one-to-one assignment of probes (columns) to enrolled rows.

    Repeatedly takes the largest remaining entry, records ``(row, col)`` and
    removes that row and column. This is greedy, not the optimal
    assignment. Ties go to the first entry in row-major order.
    """
    D = np.array(getattr(D, "D", D), dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ShapeError(f"one-to-one matching needs a square matrix, got {D.shape}")
    pairs = []
    for _ in range(D.shape[0]):
        row, col = np.unravel_index(int(np.argmax(D)), D.shape)
        pairs.append((int(row), int(col)))
        D[row, :] = -np.inf
        D[:, col] = -np.inf
    return pairs


def write_det_csv(path, thresholds, far, frr):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "far", "frr"])
        for row in zip(thresholds, far, frr):
            w.writerow([repr(float(v)) for v in row])


def write_cmc_csv(path, cmc):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "accuracy_pct"])
        for n, acc in enumerate(cmc, start=1):
            w.writerow([n, repr(float(acc))])


def build_score_matrix(model, probes, normalized=True):
    """Fused scores of every probe recording against every enrolled subject.

    ``probes`` are objects with ``subject_id``, ``session_id``, ``fix`` and
    ``sacc`` (raw feature matrices). Scores are min-max normalised over the
    whole matrix unless ``normalized`` is false.
    """
    probes = list(probes)
    m = len(model.subject_ids)
    if not probes:
        return ScoreMatrix(np.zeros((m, 0)), tuple(model.subject_ids), (), np.zeros(0, dtype=int))
    cols = [model.score(p.fix, p.sacc) for p in probes]
    D = np.column_stack(cols)
    if normalized:
        D = minmax_normalize(D)
    index = {sid: i for i, sid in enumerate(model.subject_ids)}
    truth = np.array([index.get(p.subject_id, -1) for p in probes], dtype=int)
    probe_ids = tuple(f"{p.subject_id}_{p.session_id}" for p in probes)
    return ScoreMatrix(D, tuple(model.subject_ids), probe_ids, truth)
