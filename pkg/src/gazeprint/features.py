"""Per-segment fixation and saccade features, masking and min-max scaling."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import feature_tables as tables
from .errors import ConfigurationError, DegenerateInputError, InsufficientDataError, ShapeError
from .segmentation import FIXATION, SACCADE, SegmentKind

N_FIXATION_FEATURES = 12
N_SACCADE_FEATURES = 46


@dataclass(frozen=True)
class FeatureSchema:
    kind: SegmentKind
    stimulus: str
    names: tuple
    mask: tuple

    def __post_init__(self):
        if len(self.names) != len(self.mask):
            raise ShapeError("mask length differs from number of feature names")
        expected = N_FIXATION_FEATURES if self.kind is FIXATION else N_SACCADE_FEATURES
        if len(self.names) != expected:
            raise ShapeError(f"{self.kind.short} schema needs {expected} names, got {len(self.names)}")

    @property
    def active_names(self):
        return tuple(n for n, m in zip(self.names, self.mask) if m)

    @property
    def n_active(self):
        return sum(self.mask)

    def with_mask(self, mask):
        return FeatureSchema(self.kind, self.stimulus, self.names, tuple(bool(m) for m in mask))

    def units(self):
        table = tables.FIXATION_UNITS if self.kind is FIXATION else tables.SACCADE_UNITS
        out = {}
        for name in self.names:
            base = name
            for s in tables.STAT_SUFFIXES:
                if name.endswith("_" + s) and name[: -len(s) - 1] in table:
                    base = name[: -len(s) - 1]
            out[name] = table[base]
        return out


def default_schema(kind, stimulus):
    """Schema carrying the published mask for ``stimulus``."""
    if stimulus not in tables.STIMULI:
        raise ConfigurationError(f"unknown stimulus {stimulus!r}")
    kind = SegmentKind(kind)
    table = tables.FIXATION_TABLE if kind is FIXATION else tables.SACCADE_TABLE
    names, mask = tables.expand(table, stimulus)
    return FeatureSchema(kind, stimulus, names, mask)


def full_schema(kind, stimulus):
    s = default_schema(kind, stimulus)
    return s.with_mask([True] * len(s.names))


FIXATION_NAMES = default_schema(FIXATION, "RAN").names
SACCADE_NAMES = default_schema(SACCADE, "RAN").names


def moments(x):
    """Population skewness and non-excess kurtosis; (0, 0) for a constant set."""
    x = np.asarray(x, dtype=float)
    mu = x.mean()
    d = x - mu
    m2 = np.mean(d * d)
    if m2 <= (1e-12 * max(1.0, abs(mu))) ** 2:
        return 0.0, 0.0
    return float(np.mean(d**3) / m2**1.5), float(np.mean(d**4) / m2**2)


def m3s2k(x):
    """Mean, median, max, std, skewness, kurtosis of a series."""
    x = np.asarray(x, dtype=float)
    skew, kurt = moments(x)
    return [float(x.mean()), float(np.median(x)), float(x.max()), float(x.std()), skew, kurt]


def _path_length(x, y):
    return float(np.sum(np.hypot(np.diff(x), np.diff(y))))


def _dispersion(x, y):
    return float((x.max() - x.min()) + (y.max() - y.min()))


def _centroid(seg, profiles):
    return float(profiles.pos_x[seg.slice].mean()), float(profiles.pos_y[seg.slice].mean())


def _wrap(angle):
    return (angle + np.pi) % (2 * np.pi) - np.pi


def _check(seg, kind):
    if seg.kind is not kind:
        raise ConfigurationError(f"expected a {kind.short} segment, got {seg.kind.short}")
    if seg.n_samples < 2:
        raise DegenerateInputError(
            f"{kind.short} at samples {seg.start_index}-{seg.end_index} has fewer than 2 samples"
        )


def fixation_features(seg, profiles, prev=None):
    """The 12 raw fixation features in schema order.

    ``prev`` is the preceding fixation segment; without one the angle and
    distance to it are 0.
    """
    _check(seg, FIXATION)
    x = profiles.pos_x[seg.slice]
    y = profiles.pos_y[seg.slice]
    path = _path_length(x, y)
    angle = distance = 0.0
    if prev is not None:
        px, py = _centroid(prev, profiles)
        dx, dy = x.mean() - px, y.mean() - py
        angle, distance = float(np.arctan2(dy, dx)), float(np.hypot(dx, dy))
    skew_x, kurt_x = moments(x)
    skew_y, kurt_y = moments(y)
    return np.array(
        [
            seg.duration_ms,
            x.std(),
            y.std(),
            path,
            angle,
            distance,
            skew_x,
            skew_y,
            kurt_x,
            kurt_y,
            _dispersion(x, y),
            path / (seg.duration_ms / 1000.0),
        ]
    )


def saccade_angle(seg, profiles):
    x = profiles.pos_x[seg.slice]
    y = profiles.pos_y[seg.slice]
    return float(np.arctan2(y[-1] - y[0], x[-1] - x[0]))


def saccade_features(seg, profiles, prev=None):
    """The 46 raw saccade features in schema order.

    The saccadic ratio is peak angular velocity (deg/s) over duration (ms).
    """
    _check(seg, SACCADE)
    sl = seg.slice
    x = profiles.pos_x[sl]
    y = profiles.pos_y[sl]
    angle = saccade_angle(seg, profiles)
    angle_prev = distance_prev = 0.0
    if prev is not None:
        angle_prev = float(_wrap(angle - saccade_angle(prev, profiles)))
        px, py = _centroid(prev, profiles)
        distance_prev = float(np.hypot(x.mean() - px, y.mean() - py))
    ang_vel = profiles.ang_vel[sl]
    out = [seg.duration_ms, _dispersion(x, y)]
    out += m3s2k(ang_vel)
    out += m3s2k(profiles.ang_acc[sl])
    out += [
        x.std(),
        y.std(),
        _path_length(x, y),
        angle_prev,
        distance_prev,
        float(ang_vel.max()) / seg.duration_ms,
        angle,
        float(np.hypot(x[-1] - x[0], y[-1] - y[0])),
    ]
    for series in (profiles.vel_x, profiles.vel_y, profiles.acc_x, profiles.acc_y):
        out += m3s2k(series[sl])
    return np.array(out)


def segment_features(segments, profiles):
    """Raw feature matrices ``(fixations, saccades)`` for a segment list."""
    fix, sac = [], []
    prev_fix = prev_sac = None
    for seg in segments:
        if seg.kind is FIXATION:
            fix.append(fixation_features(seg, profiles, prev_fix))
            prev_fix = seg
        else:
            sac.append(saccade_features(seg, profiles, prev_sac))
            prev_sac = seg
    fix = np.array(fix).reshape(-1, N_FIXATION_FEATURES)
    sac = np.array(sac).reshape(-1, N_SACCADE_FEATURES)
    return fix, sac


def apply_mask(values, schema):
    """Keep only the active columns of a vector or matrix of raw features."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != len(schema.names):
        raise ShapeError(f"expected {len(schema.names)} raw features, got {values.shape[-1]}")
    if not any(schema.mask):
        raise ConfigurationError(f"{schema.kind.short} mask excludes every feature")
    return values[..., np.asarray(schema.mask, dtype=bool)]


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    minimum: np.ndarray
    maximum: np.ndarray


def fit_normalizer(vectors):
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsufficientDataError("need at least 2 training vectors to fit a normalizer")
    stats = NormalizationStats(x.min(axis=0), x.max(axis=0))
    flat = int(np.sum(stats.maximum <= stats.minimum))
    if flat:
        warnings.warn(f"{flat} constant feature(s) will be scaled to 0.5", RuntimeWarning, stacklevel=2)
    return stats


def normalize(vectors, stats):
    """Min-max scale into [0, 1] using training extremes, clamping outliers.

    Features that were constant during training map to 0.5.
    """
    x = np.asarray(vectors, dtype=float)
    span = stats.maximum - stats.minimum
    flat = span <= 0
    safe = np.where(flat, 1.0, span)
    out = np.clip((x - stats.minimum) / safe, 0.0, 1.0)
    return np.where(flat, 0.5, out)


def mask_to_dict(schemas):
    """JSON-ready description of schemas, masks and units.

    ``schemas`` is a ``(fixation, saccade)`` pair or a ``{kind: schema}`` dict.
    """
    if isinstance(schemas, dict):
        schemas = [schemas[k] for k in sorted(schemas)]
    out = {"stimulus": schemas[0].stimulus}
    for s in schemas:
        out[s.kind.short] = {
            "names": list(s.names),
            "mask": [bool(m) for m in s.mask],
            "units": s.units(),
        }
    return out


def write_mask_file(path, schemas):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(mask_to_dict(schemas), fh, indent=2)
        fh.write("\n")


def read_mask_file(path):
    """Load ``(fixation_schema, saccade_schema)`` from a mask sidecar."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    out = []
    for kind in (FIXATION, SACCADE):
        try:
            stimulus, entry = data["stimulus"], data[kind.short]
        except (KeyError, TypeError):
            raise ConfigurationError(f"{path}: not a mask sidecar") from None
        base = default_schema(kind, stimulus)
        if tuple(entry["names"]) != base.names:
            raise ConfigurationError(f"{path}: {kind.short} feature names do not match this version")
        out.append(base.with_mask(entry["mask"]))
    return tuple(out)
