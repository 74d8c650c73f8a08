"""Gaussian RBF networks with per-subject K-means prototypes and score fusion.

Each subject contributes ``K`` neurons (K-means centres of that subject's
segment features) to a network; the linear output layer is solved in one
least-squares step against one-hot subject targets. A fixation network and
a saccade network are trained independently and their averaged outputs are
blended with weight ``lam``.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigurationError, InsufficientDataError, SchemaError, ShapeError
from .features import FeatureSchema, NormalizationStats, apply_mask, normalize
from .segmentation import FIXATION, SACCADE, SegmentKind

MODEL_MAGIC = "gazeprint-model"
MODEL_FORMAT_VERSION = 1
DEFAULT_K = 32
PINV_RCOND = 1e-10


def _sqdist(a, b):
    return cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean")


def _kmeans_pp(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _sqdist(points, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[j] = points[idx]
        closest = np.minimum(closest, _sqdist(points, centers[j : j + 1])[:, 0])
    return centers


def kmeans(points, k, max_iter=100, seed=0):
    """Lloyd's K-means with squared Euclidean distance.

    Centres are initialised by k-means++ sampling from ``seed``. Iteration
    stops when assignments no longer change or after ``max_iter`` rounds.
    A cluster that loses all its members is re-seeded with the point lying
    farthest from its own centre. If there are fewer points than ``k``,
    ``k`` is reduced to the number of points.

    Returns
    -------
    centers : (k, p) ndarray
    assignments : (n,) int ndarray
    """
    try:
        points = np.array(points, dtype=float)
    except ValueError:
        raise ShapeError("points have inconsistent dimensions") from None
    if points.ndim != 2:
        raise ShapeError(f"expected an (n, p) matrix, got shape {points.shape}")
    n = points.shape[0]
    if n < 1 or k < 1:
        raise InsufficientDataError(f"kmeans needs n >= 1 and k >= 1 (got n={n}, k={k})")
    if n < k:
        warnings.warn(f"kmeans: only {n} points for k={k}; using k={n}", RuntimeWarning, stacklevel=2)
        k = n
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(points, k, rng)
    assignments = np.full(n, -1)
    for _ in range(max_iter):
        d = _sqdist(points, centers)
        new = np.argmin(d, axis=1)
        if np.array_equal(new, assignments):
            break
        assignments = new
        counts = np.bincount(assignments, minlength=k)
        for j in np.flatnonzero(counts == 0):
            own = d[np.arange(n), assignments]
            far = int(np.argmax(own))
            counts[assignments[far]] -= 1
            assignments[far] = j
            counts[j] = 1
            d[far] = 0.0
        for j in range(k):
            members = assignments == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
    return centers, assignments


@dataclass(frozen=True, eq=False)
class SubjectModel:
    subject_id: str
    prototypes: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        if self.prototypes.shape[0] != self.betas.shape[0]:
            raise ShapeError("one beta per prototype required")
        if not np.all(np.isfinite(self.betas) & (self.betas > 0)):
            raise ConfigurationError(f"subject {self.subject_id}: betas must be positive and finite")


def cluster_widths(points, centers, assignments):
    """Mean member-to-centre distance per cluster (NaN for empty clusters)."""
    k = centers.shape[0]
    dist = np.linalg.norm(points - centers[assignments], axis=1)
    counts = np.bincount(assignments, minlength=k)
    sums = np.bincount(assignments, weights=dist, minlength=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan), counts


def fit_subject(points, k=DEFAULT_K, seed=0, subject_id="?"):
    """K-means prototypes and Gaussian widths for one subject.

    ``beta = 1 / (2 sigma^2)`` with ``sigma`` the mean distance of a
    cluster's members from its centre. Clusters with fewer than two members
    or zero spread take the median beta of the subject's other clusters
    (1.0 if none is usable).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise InsufficientDataError(f"subject {subject_id} has no segments to train on")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        centers, assignments = kmeans(points, min(k, points.shape[0]), seed=seed)
    sigma, counts = cluster_widths(points, centers, assignments)
    ok = (counts >= 2) & (sigma > 0)
    betas = np.empty(centers.shape[0])
    betas[ok] = 1.0 / (2.0 * sigma[ok] ** 2)
    betas[~ok] = float(np.median(betas[ok])) if ok.any() else 1.0
    return SubjectModel(str(subject_id), centers, betas)


@dataclass(frozen=True, eq=False)
class RbfNetwork:
    kind: SegmentKind
    subject_models: tuple
    weights: np.ndarray
    prototypes: np.ndarray = field(init=False, repr=False)
    betas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "prototypes", np.vstack([s.prototypes for s in self.subject_models]))
        object.__setattr__(self, "betas", np.concatenate([s.betas for s in self.subject_models]))
        if self.weights.shape != (self.prototypes.shape[0], len(self.subject_models)):
            raise ShapeError(
                f"weights shape {self.weights.shape} does not match "
                f"{self.prototypes.shape[0]} neurons x {len(self.subject_models)} subjects"
            )

    @property
    def n_subjects(self):
        return len(self.subject_models)

    def outputs(self, x):
        return activations(x, self) @ self.weights


def activations(x, net):
    """Gaussian activations ``exp(-beta_j ||x - mu_j||^2)`` of every neuron."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != net.prototypes.shape[1]:
        raise ShapeError(f"input has {x2.shape[1]} features, network expects {net.prototypes.shape[1]}")
    a = np.exp(-net.betas * _sqdist(x2, net.prototypes))
    return a[0] if single else a


def one_hot(labels, n_classes):
    labels = np.asarray(labels, dtype=int)
    y = np.zeros((labels.shape[0], n_classes))
    y[np.arange(labels.shape[0]), labels] = 1.0
    return y


def train_output_layer(A, labels, n_subjects=None):
    """Least-squares output weights for activation matrix ``A``.

    Solves ``A w = y`` with ``y`` the one-hot subject targets, through the
    SVD pseudoinverse (singular values below ``1e-10 * s_max`` discarded),
    giving the minimum-norm solution when ``A`` is rank deficient.
    """
    A = np.asarray(A, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if A.ndim != 2 or A.shape[0] != labels.shape[0]:
        raise ShapeError("activation rows must match the number of labels")
    m = int(labels.max()) + 1 if n_subjects is None else int(n_subjects)
    missing = sorted(set(range(m)) - set(labels.tolist()))
    if missing:
        raise InsufficientDataError(f"subjects without training samples: {missing}")
    dead = int(np.sum(~A.any(axis=0)))
    if dead:
        warnings.warn(f"{dead} neuron(s) never activate on the training set", RuntimeWarning, stacklevel=2)
    w, *_ = np.linalg.lstsq(A, one_hot(labels, m), rcond=PINV_RCOND)
    return w


def train_network(kind, vectors, labels, subject_ids, k=DEFAULT_K, seed=0):
    """Fit per-subject prototypes then the output layer of one network."""
    vectors = np.asarray(vectors, dtype=float)
    labels = np.asarray(labels, dtype=int)
    kind = SegmentKind(kind)
    models = []
    for j, sid in enumerate(subject_ids):
        sub_seed = np.random.SeedSequence([int(seed), int(kind), j])
        models.append(fit_subject(vectors[labels == j], k=k, seed=sub_seed, subject_id=sid))
    proto = RbfNetwork(kind, tuple(models), np.zeros((sum(len(m.betas) for m in models), len(models))))
    w = train_output_layer(activations(vectors, proto), labels, len(subject_ids))
    return RbfNetwork(kind, tuple(models), w)


@dataclass(frozen=True, eq=False)
class FusionModel:
    """Trained fixation and saccade networks plus everything needed to score.

    Either network may be ``None`` when its feature mask is empty; that kind
    then simply does not contribute.
    """

    subject_ids: tuple
    fix_net: RbfNetwork | None
    sacc_net: RbfNetwork | None
    lam: float
    norm_stats: dict
    schemas: dict
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.fix_net is None and self.sacc_net is None:
            raise ConfigurationError("a fusion model needs at least one network")

    def network(self, kind):
        return self.fix_net if SegmentKind(kind) is FIXATION else self.sacc_net

    def prepare(self, kind, raw):
        """Mask and normalise raw feature rows of one kind."""
        kind = SegmentKind(kind)
        width = len(self.schemas[kind].names)
        raw = np.asarray(raw, dtype=float)
        if raw.shape[-1] != width:
            raise ShapeError(f"expected {width} raw {kind.short} features, got {raw.shape[-1]}")
        raw = raw.reshape(-1, width)
        return normalize(apply_mask(raw, self.schemas[kind]), self.norm_stats[kind])

    def score(self, fix_raw, sacc_raw):
        fix = self.prepare(FIXATION, fix_raw) if self.fix_net is not None else None
        sac = self.prepare(SACCADE, sacc_raw) if self.sacc_net is not None else None
        return fused_score(fix, sac, self)


def _mean_output(net, vectors):
    if net is None or vectors is None:
        return None
    vectors = np.asarray(vectors, dtype=float)
    if vectors.size == 0:
        return None
    return net.outputs(vectors.reshape(-1, net.prototypes.shape[1])).mean(axis=0)


def fused_score(fix_vectors, sacc_vectors, model):
    """Per-subject score: ``lam`` * mean fixation output + (1 - lam) * mean saccade output.

    Vectors must already be masked and normalised. When one kind has no
    segments (or no network), the other kind carries the whole weight.
    """
    fix = _mean_output(model.fix_net, fix_vectors)
    sac = _mean_output(model.sacc_net, sacc_vectors)
    if fix is None and sac is None:
        raise InsufficientDataError("probe has neither fixations nor saccades")
    if sac is None:
        return fix
    if fix is None:
        return sac
    return model.lam * fix + (1.0 - model.lam) * sac


def identify(score):
    """Index of the best-scoring subject; ties go to the lowest index."""
    return int(np.argmax(np.asarray(score, dtype=float)))


def ranked(score, subject_ids):
    score = np.asarray(score, dtype=float)
    order = np.argsort(-score, kind="stable")
    return [(subject_ids[i], float(score[i])) for i in order]


# --- serialisation -----------------------------------------------------------


def schema_hash(schemas):
    h = hashlib.sha256()
    for kind in (FIXATION, SACCADE):
        s = schemas[kind]
        h.update(f"{s.kind.short}|{s.stimulus}|{','.join(s.names)}|".encode())
        h.update("".join("1" if m else "0" for m in s.mask).encode())
    return h.hexdigest()[:16]


def _net_to_dict(net):
    if net is None:
        return None
    return {
        "subjects": [
            {"id": s.subject_id, "prototypes": s.prototypes.tolist(), "betas": s.betas.tolist()}
            for s in net.subject_models
        ],
        "weights": net.weights.tolist(),
    }


def _net_from_dict(kind, d):
    if d is None:
        return None
    models = tuple(
        SubjectModel(s["id"], np.array(s["prototypes"], dtype=float), np.array(s["betas"], dtype=float))
        for s in d["subjects"]
    )
    return RbfNetwork(kind, models, np.array(d["weights"], dtype=float))


def dumps_model(model):
    body = {
        "format_version": MODEL_FORMAT_VERSION,
        "schema_hash": schema_hash(model.schemas),
        "lambda": model.lam,
        "subjects": list(model.subject_ids),
        "config": model.config,
    }
    for kind in (FIXATION, SACCADE):
        s = model.schemas[kind]
        st = model.norm_stats[kind]
        body[kind.short] = {
            "stimulus": s.stimulus,
            "names": list(s.names),
            "mask": [bool(m) for m in s.mask],
            "norm_min": st.minimum.tolist(),
            "norm_max": st.maximum.tolist(),
            "network": _net_to_dict(model.network(kind)),
        }
    return f"{MODEL_MAGIC} {MODEL_FORMAT_VERSION}\n" + json.dumps(body, sort_keys=True, indent=1) + "\n"


def loads_model(text):
    head, _, rest = text.partition("\n")
    parts = head.split()
    if len(parts) != 2 or parts[0] != MODEL_MAGIC:
        raise SchemaError("not a gazeprint model file")
    if int(parts[1]) != MODEL_FORMAT_VERSION:
        raise SchemaError(f"unsupported model format version {parts[1]}")
    body = json.loads(rest)
    schemas, stats, nets = {}, {}, {}
    for kind in (FIXATION, SACCADE):
        d = body[kind.short]
        schemas[kind] = FeatureSchema(kind, d["stimulus"], tuple(d["names"]), tuple(d["mask"]))
        stats[kind] = NormalizationStats(np.array(d["norm_min"], dtype=float), np.array(d["norm_max"], dtype=float))
        nets[kind] = _net_from_dict(kind, d["network"])
    if schema_hash(schemas) != body["schema_hash"]:
        raise SchemaError("model schema hash mismatch; file is corrupt or edited")
    return FusionModel(
        subject_ids=tuple(body["subjects"]),
        fix_net=nets[FIXATION],
        sacc_net=nets[SACCADE],
        lam=float(body["lambda"]),
        norm_stats=stats,
        schemas=schemas,
        config=body.get("config", {}),
    )


def save_model(path, model):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
