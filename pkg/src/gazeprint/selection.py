"""Wrapper backward feature selection driven by the fusion model's EER."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, InsufficientDataError
from .evaluation import compute_eer, minmax_normalize
from .features import N_FIXATION_FEATURES, apply_mask, default_schema, fit_normalizer, normalize
from .pipeline import PipelineConfig, RecordingFeatures, select_subjects, sessions_of, split_sessions
from .rbfn import train_network
from .segmentation import FIXATION, SACCADE

N_TOTAL = N_FIXATION_FEATURES + 46


@dataclass(frozen=True)
class SelectionRun:
    stimulus: str = "RAN"
    iterations: int = 10
    subset_fraction: float = 0.5
    seed: int = 0
    result_mask: dict | None = None  # kind -> tuple of bool
    eer_trace: tuple = ()  # (iteration, feature, included, eer)
    iteration_masks: tuple = ()

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if not 0.0 < self.subset_fraction <= 1.0:
            raise ConfigurationError("subset_fraction must lie in (0, 1]")

    def schemas(self):
        if self.result_mask is None:
            raise ConfigurationError("selection has not been run")
        return {k: default_schema(k, self.stimulus).with_mask(self.result_mask[k]) for k in (FIXATION, SACCADE)}


def backward_pass(n_features, objective, start=None):
    """One sequential pass of backward selection over all features.

    For each feature in turn the objective (lower is better) is evaluated
    with the feature excluded and then included, everything else held at
    the current selection; a setting is adopted only if it strictly beats
    the best value seen for that feature, so ties favour exclusion. A mask
    that would select nothing scores +inf.

    Returns the final boolean mask and a list of ``(feature, included, value)``.
    """
    selected = np.ones(n_features, dtype=bool) if start is None else np.array(start, dtype=bool)
    trace = []
    for i in range(n_features):
        trial = selected.copy()
        best = np.inf
        for j in (False, True):
            trial[i] = j
            value = objective(trial) if trial.any() else np.inf
            trace.append((i, j, float(value)))
            if value < best:
                selected[i] = j
                best = value
    return selected, trace


def _split_mask(mask):
    mask = np.asarray(mask, dtype=bool)
    return tuple(mask[:N_FIXATION_FEATURES]), tuple(mask[N_FIXATION_FEATURES:])


class _Objective:
    """EER of the fusion model for a combined 58-flag mask.

    Network outputs are cached per kind and per mask, so flipping a saccade
    feature does not retrain the fixation network.
    """

    def __init__(self, train, evaluation, stimulus, cfg):
        self.cfg = cfg
        self.stimulus = stimulus
        self.subjects = sorted({r.subject_id for r in train})
        index = {s: i for i, s in enumerate(self.subjects)}
        self.train = [r for r in train if r.subject_id in index]
        self.eval = [r for r in evaluation if r.subject_id in index]
        self.index = index
        self.truth = np.array([index[r.subject_id] for r in self.eval], dtype=int)
        self._cache = {}

    def _outputs(self, kind, mask):
        key = (kind, mask)
        if key in self._cache:
            return self._cache[key]
        m, n = len(self.subjects), len(self.eval)
        if not any(mask):
            out = None
        else:
            schema = default_schema(kind, self.stimulus).with_mask(mask)
            attr = "fix" if kind is FIXATION else "sacc"
            raw = np.vstack([getattr(r, attr) for r in self.train])
            labels = np.concatenate([[self.index[r.subject_id]] * getattr(r, attr).shape[0] for r in self.train])
            x = apply_mask(raw, schema)
            stats = fit_normalizer(x)
            net = train_network(kind, normalize(x, stats), labels.astype(int), self.subjects, self.cfg.k_per_subject, self.cfg.seed)
            out = np.full((m, n), np.nan)
            for j, r in enumerate(self.eval):
                probe = getattr(r, attr)
                if probe.shape[0]:
                    out[:, j] = net.outputs(normalize(apply_mask(probe, schema), stats)).mean(axis=0)
        self._cache[key] = out
        return out

    def scores(self, mask):
        fix_mask, sac_mask = _split_mask(mask)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fix = self._outputs(FIXATION, fix_mask)
            sac = self._outputs(SACCADE, sac_mask)
        lam = self.cfg.lam
        if fix is None:
            D = sac
        elif sac is None:
            D = fix
        else:
            D = np.where(np.isnan(fix), sac, np.where(np.isnan(sac), fix, lam * fix + (1 - lam) * sac))
        keep = ~np.isnan(D).any(axis=0)
        return minmax_normalize(D[:, keep]), self.truth[keep]

    def __call__(self, mask):
        D, truth = self.scores(mask)
        if D.shape[1] == 0:
            return np.inf
        cols = np.arange(D.shape[1])
        genuine = D[truth, cols]
        impostor_mask = np.ones(D.shape, dtype=bool)
        impostor_mask[truth, cols] = False
        return compute_eer(genuine, D[impostor_mask])[0]


def _halve(recordings, rng):
    """Split each recording's segments 50/50 into (train, eval) pseudo-recordings."""
    train, evaluation = [], []
    for r in recordings:
        parts = []
        for x in (r.fix, r.sacc):
            perm = rng.permutation(x.shape[0])
            cut = x.shape[0] // 2
            parts.append((x[np.sort(perm[:cut])], x[np.sort(perm[cut:])]))
        train.append(RecordingFeatures(r.subject_id, r.session_id, parts[0][0], parts[1][0], r.stimulus))
        evaluation.append(RecordingFeatures(r.subject_id, r.session_id + "b", parts[0][1], parts[1][1], r.stimulus))
    return train, evaluation


def make_split(recordings, rng):
    """Train/eval split: by session when two exist, else by halving segments.

    Subjects that end up without fixations or saccades on the training side,
    or without any probe segments, are dropped with a warning.
    """
    if len(sessions_of(recordings)) >= 2:
        train, evaluation = split_sessions(recordings)
    else:
        train, evaluation = _halve(recordings, rng)
    ok = set()
    for s in {r.subject_id for r in train}:
        tr = [r for r in train if r.subject_id == s]
        ev = [r for r in evaluation if r.subject_id == s]
        if sum(r.fix.shape[0] for r in tr) and sum(r.sacc.shape[0] for r in tr) and any(
            r.fix.shape[0] + r.sacc.shape[0] for r in ev
        ):
            ok.add(s)
    dropped = sorted({r.subject_id for r in recordings} - ok)
    if dropped:
        warnings.warn(f"dropping subjects lacking segments: {', '.join(dropped)}", RuntimeWarning, stacklevel=2)
    return [r for r in train if r.subject_id in ok], [r for r in evaluation if r.subject_id in ok]


def eer_objective(mask, train, evaluation, stimulus="RAN", cfg=PipelineConfig()):
    """EER (percent) of the fusion model trained on ``train`` under ``mask``.

    ``mask`` is either a ``(fixation_mask, saccade_mask)`` pair or one flat
    58-flag sequence.
    """
    if len(mask) == 2:
        mask = tuple(mask[0]) + tuple(mask[1])
    if not any(mask):
        raise ConfigurationError("mask excludes every feature")
    return _Objective(train, evaluation, stimulus, cfg)(np.asarray(mask, dtype=bool))


def backward_select(dataset, run=SelectionRun(), cfg=PipelineConfig()):
    """Run backward selection ``run.iterations`` times on random subject subsets.

    Each iteration draws ``subset_fraction`` of the subjects with its own RNG
    stream derived from ``(seed, iteration)`` and performs one backward pass.
    The final mask keeps a feature if it survived in at least half of the
    iterations.
    """
    dataset = list(dataset)
    if len({r.subject_id for r in dataset}) < 2:
        raise InsufficientDataError("feature selection needs at least 2 subjects")
    masks, trace = [], []
    for it in range(run.iterations):
        rng = np.random.default_rng([int(run.seed), it])
        subset = select_subjects(dataset, run.subset_fraction, rng)
        train, evaluation = make_split(subset, rng)
        if len({r.subject_id for r in train}) < 2:
            raise InsufficientDataError(f"iteration {it}: fewer than 2 usable subjects")
        objective = _Objective(train, evaluation, run.stimulus, cfg)
        mask, steps = backward_pass(N_TOTAL, objective)
        masks.append(tuple(bool(m) for m in mask))
        trace.extend((it, i, j, v) for i, j, v in steps)
    votes = np.array(masks).sum(axis=0)
    final = 2 * votes >= run.iterations
    if not final.any():
        final[int(np.argmax(votes))] = True
    fix, sac = _split_mask(final)
    return replace(
        run,
        result_mask={FIXATION: fix, SACCADE: sac},
        eer_trace=tuple(trace),
        iteration_masks=tuple(masks),
    )
