"""Slow, literal reference implementations used as test oracles.

None of these import from gazeprint; they are written from the definitions
with plain loops so they share no code path with the package.
"""
import itertools
import math

import numpy as np

FIX, SAC = 0, 1


def sg_bruteforce(x, order, frame):
    """Savitzky-Golay by fitting a polynomial to every window with lstsq.

    Interior samples take the fitted value at the window centre. The first
    and last ``frame // 2`` samples take the value of the first/last full
    window's fit at their own position.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    half = frame // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    V = np.vander(offsets / half, order + 1, increasing=True)
    out = np.empty(n)
    for c in range(half, n - half):
        coef = np.linalg.lstsq(V, x[c - half : c + half + 1], rcond=None)[0]
        out[c] = coef[0]
    for c, at in ((half, range(0, half)), (n - half - 1, range(n - half, n))):
        coef = np.linalg.lstsq(V, x[c - half : c + half + 1], rcond=None)[0]
        for i in at:
            u = (i - c) / half
            out[i] = sum(coef[p] * u**p for p in range(order + 1))
    return out


def algorithm1(velocity, t, vt, mdf):
    """Line-by-line transliteration of the I-VT pseudocode (0-based)."""
    n = len(velocity)
    res = [None] * n
    last_state = None
    fixation_start = 0
    for index in range(n):
        if velocity[index] < vt:
            current = FIX
            if last_state != current:
                fixation_start = index
        else:
            if last_state == FIX:
                duration = t[index] - t[fixation_start]
                if duration < mdf:
                    for i in range(fixation_start, index + 1):
                        res[i] = SAC
            current = SAC
        last_state = current
        res[index] = current
    return res


def segments_bruteforce(labels, t, min_fix, min_sac, valid=None):
    """Enumerate maximal runs by walking the label list, then drop short ones.

    A run ends where the label changes or an invalid sample starts; its
    duration runs to the next sample's timestamp (one median period past
    the last sample for the final run).
    """
    n = len(labels)
    if valid is None:
        valid = [True] * n
    period = float(np.median(np.diff(t))) if n > 1 else 0.0
    out = []
    i = 0
    while i < n:
        if not valid[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and valid[j + 1] and labels[j + 1] == labels[i]:
            j += 1
        stop = t[j + 1] if j + 1 < n else t[j] + period
        dur = stop - t[i]
        limit = min_fix if labels[i] == FIX else min_sac
        if dur >= limit:
            out.append((int(labels[i]), i, j, float(dur)))
        i = j + 1
    return out


def rates_loop(genuine, impostor, thr):
    far = sum(1 for s in impostor if s >= thr) / len(impostor)
    frr = sum(1 for s in genuine if s < thr) / len(genuine)
    return far, frr


def eer_exhaustive(genuine, impostor):
    """EER (percent) from every candidate threshold, with linear interpolation.

    Candidates are all observed scores, all midpoints between consecutive
    distinct scores and one point below and above the range.
    """
    scores = sorted(set(genuine) | set(impostor))
    cands = set(scores)
    for a, b in zip(scores, scores[1:]):
        cands.add((a + b) / 2)
    span = max(scores[-1] - scores[0], 1.0)
    cands |= {scores[0] - span, scores[-1] + span}
    cands = sorted(cands)
    pts = [rates_loop(genuine, impostor, c) for c in cands]
    for far, frr in pts:
        if far == frr:
            return 100.0 * far
    for (f0, r0), (f1, r1) in zip(pts, pts[1:]):
        d0, d1 = f0 - r0, f1 - r1
        if d0 > 0 > d1:
            a = d0 / (d0 - d1)
            return 100.0 * (f0 + a * (f1 - f0))
    raise AssertionError("no crossing")


def greedy_simulation(D):
    """Greedy matching by scanning every remaining cell in row-major order."""
    D = [list(map(float, row)) for row in D]
    m = len(D)
    rows, cols = set(range(m)), set(range(m))
    pairs = []
    while rows:
        best = None
        for r in range(m):
            for c in range(m):
                if r in rows and c in cols and (best is None or D[r][c] > D[best[0]][best[1]]):
                    best = (r, c)
        pairs.append(best)
        rows.discard(best[0])
        cols.discard(best[1])
    return pairs


def best_assignment(D):
    """Optimal assignment by trying every permutation."""
    m = len(D)
    return max(itertools.permutations(range(m)), key=lambda p: sum(D[r][p[r]] for r in range(m)))


def rank_by_sorting(D, truth):
    """Pessimistic true-subject rank per column, by sorting each column."""
    ranks = []
    for j, t in enumerate(truth):
        col = [(D[i][j], i != t) for i in range(len(D))]
        # ties: competitors (True) sort ahead of the true subject (False)
        col.sort(key=lambda p: (-p[0], not p[1]))
        ranks.append(1 + [p[1] for p in col].index(False))
    return ranks


def moments_textbook(x):
    n = len(x)
    mu = sum(x) / n
    m2 = sum((v - mu) ** 2 for v in x) / n
    m3 = sum((v - mu) ** 3 for v in x) / n
    m4 = sum((v - mu) ** 4 for v in x) / n
    return m3 / m2**1.5, m4 / m2**2


def kmeans_two_partition(points):
    """Minimum-distortion split of a small point set into two clusters."""
    n = len(points)
    best = (math.inf, None)
    for bits in range(1, 2 ** (n - 1)):
        a = [points[i] for i in range(n) if bits >> i & 1]
        b = [points[i] for i in range(n) if not bits >> i & 1]
        ca, cb = np.mean(a, axis=0), np.mean(b, axis=0)
        cost = sum(np.sum((p - ca) ** 2) for p in a) + sum(np.sum((p - cb) ** 2) for p in b)
        if cost < best[0]:
            best = (cost, (ca, cb))
    return best[1]
