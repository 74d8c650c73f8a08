"""End-to-end glue: configuration, recording -> features, training."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InsufficientDataError, ParseError
from .features import (
    FIXATION_NAMES,
    N_FIXATION_FEATURES,
    N_SACCADE_FEATURES,
    SACCADE_NAMES,
    NormalizationStats,
    apply_mask,
    default_schema,
    fit_normalizer,
    normalize,
    read_mask_file,
    segment_features,
)
from .gaze_io import decimate_to_250, fill_invalid, parse_recording, read_geometry, to_screen
from .preprocess import SmoothingConfig, compute_profiles, savitzky_golay, smooth_trace
from .rbfn import DEFAULT_K, FusionModel, train_network
from .segmentation import FIXATION, SACCADE, IvtConfig, segment


@dataclass(frozen=True)
class PipelineConfig:
    ivt: IvtConfig = field(default_factory=IvtConfig)
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    k_per_subject: int = DEFAULT_K
    lam: float = 0.5
    stimulus: str = "RAN"
    masks: str = "published"  # "published", "all" or a mask sidecar path
    seed: int = 0

    def __post_init__(self):
        if self.k_per_subject < 1:
            raise ConfigurationError("k_per_subject must be >= 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.stimulus not in ("RAN", "TEX"):
            raise ConfigurationError(f"stimulus must be RAN or TEX, got {self.stimulus!r}")

    def schemas(self):
        """``{kind: FeatureSchema}`` resolved from the ``masks`` setting."""
        if self.masks == "published":
            return {k: default_schema(k, self.stimulus) for k in (FIXATION, SACCADE)}
        if self.masks == "all":
            out = {}
            for k in (FIXATION, SACCADE):
                s = default_schema(k, self.stimulus)
                out[k] = s.with_mask([True] * len(s.names))
            return out
        fix, sac = read_mask_file(self.masks)
        return {FIXATION: fix, SACCADE: sac}

    def as_items(self):
        return [
            ("velocity_threshold", self.ivt.velocity_threshold),
            ("min_fixation_ms", self.ivt.min_fixation_ms),
            ("min_saccade_ms", self.ivt.min_saccade_ms),
            ("poly_order", self.smoothing.poly_order),
            ("frame_len", self.smoothing.frame_len),
            ("edge", self.smoothing.edge),
            ("k_per_subject", self.k_per_subject),
            ("lambda", self.lam),
            ("stimulus", self.stimulus),
            ("masks", self.masks),
            ("seed", self.seed),
        ]

    def as_dict(self):
        return dict(self.as_items())

    def to_text(self):
        return "".join(f"{k} = {v}\n" for k, v in self.as_items())


_FLOAT_KEYS = {"velocity_threshold", "min_fixation_ms", "min_saccade_ms", "lambda"}
_INT_KEYS = {"poly_order", "frame_len", "k_per_subject", "seed"}


def config_from_dict(values, base=None):
    """Overlay ``values`` (config-file keys) on ``base``; unknown keys are errors."""
    base = base or PipelineConfig()
    merged = base.as_dict()
    for key, value in values.items():
        if value is None:
            continue
        if key not in merged:
            raise ConfigurationError(f"unknown config key {key!r}")
        try:
            if key in _FLOAT_KEYS:
                value = float(value)
            elif key in _INT_KEYS:
                value = int(value)
            else:
                value = str(value)
        except ValueError:
            raise ConfigurationError(f"bad value for {key}: {value!r}") from None
        merged[key] = value
    return PipelineConfig(
        ivt=IvtConfig(merged["velocity_threshold"], merged["min_fixation_ms"], merged["min_saccade_ms"]),
        smoothing=SmoothingConfig(merged["poly_order"], merged["frame_len"], merged["edge"]),
        k_per_subject=merged["k_per_subject"],
        lam=merged["lambda"],
        stimulus=merged["stimulus"].upper(),
        masks=merged["masks"],
        seed=merged["seed"],
    )


def read_config(path, base=None):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
    return config_from_dict(values, base)


@dataclass(frozen=True, eq=False)
class RecordingFeatures:
    """Raw (unmasked) feature matrices of one recording."""

    subject_id: str
    session_id: str
    fix: np.ndarray
    sacc: np.ndarray
    stimulus: str = "RAN"


def kinematics(rec, cfg=PipelineConfig()):
    """Decimate, project, smooth and differentiate one recording.

    Returns the (possibly decimated) recording and its profiles.
    """
    rec = decimate_to_250(rec)
    trace = smooth_trace(to_screen(rec), cfg.smoothing)
    theta_x = savitzky_golay(fill_invalid(rec.theta_x, rec.valid), cfg.smoothing)
    theta_y = savitzky_golay(fill_invalid(rec.theta_y, rec.valid), cfg.smoothing)
    dt = 1.0 / rec.geometry.sample_rate_hz
    return rec, compute_profiles(trace, theta_x, theta_y, dt)


def recording_segments(rec, cfg=PipelineConfig()):
    rec, profiles = kinematics(rec, cfg)
    return rec, profiles, segment(profiles.ang_vel, rec.t, cfg.ivt, rec.valid)


def extract_recording(rec, cfg=PipelineConfig()):
    rec, profiles, segments = recording_segments(rec, cfg)
    fix, sacc = segment_features(segments, profiles)
    return RecordingFeatures(rec.subject_id, rec.session_id, fix, sacc, rec.stimulus_kind)


def find_recordings(directory):
    """Recording CSVs in ``directory`` that have a geometry sidecar next to them."""
    out = []
    for csv_path in sorted(Path(directory).glob("*.csv")):
        geom = csv_path.with_suffix(".geom")
        if geom.exists():
            out.append((csv_path, geom))
    return out


def load_recordings(directory, stimulus=None):
    recs = []
    for csv_path, geom in find_recordings(directory):
        rec = parse_recording(csv_path, read_geometry(geom))
        if stimulus is None or rec.stimulus_kind == stimulus:
            recs.append(rec)
    return recs


# --- features CSV ------------------------------------------------------------

FEATURE_COLUMNS = tuple(f"fix_{n}" for n in FIXATION_NAMES) + tuple(f"sac_{n}" for n in SACCADE_NAMES)


def write_features_csv(path, recordings):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("subject", "session", "kind") + FEATURE_COLUMNS)
        for r in recordings:
            blank_sac = [""] * N_SACCADE_FEATURES
            blank_fix = [""] * N_FIXATION_FEATURES
            for row in r.fix:
                w.writerow([r.subject_id, r.session_id, "fixation"] + [repr(float(v)) for v in row] + blank_sac)
            for row in r.sacc:
                w.writerow([r.subject_id, r.session_id, "saccade"] + blank_fix + [repr(float(v)) for v in row])


def read_features_csv(path, stimulus="RAN"):
    """Group a features CSV back into per-recording feature matrices."""
    groups = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:3]) != ("subject", "session", "kind") or tuple(header[3:]) != FEATURE_COLUMNS:
            raise ParseError("unexpected features CSV header", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            subject, session, kind = row[:3]
            if kind == "fixation":
                cells = row[3 : 3 + N_FIXATION_FEATURES]
            elif kind == "saccade":
                cells = row[3 + N_FIXATION_FEATURES :]
            else:
                raise ParseError(f"unknown segment kind {kind!r}", line=lineno)
            try:
                values = [float(c) for c in cells]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError("non-finite feature value", line=lineno)
            entry = groups.setdefault((subject, session), ([], []))
            entry[0 if kind == "fixation" else 1].append(values)
    return [
        RecordingFeatures(
            sid,
            sess,
            np.array(fix, dtype=float).reshape(-1, N_FIXATION_FEATURES),
            np.array(sac, dtype=float).reshape(-1, N_SACCADE_FEATURES),
            stimulus,
        )
        for (sid, sess), (fix, sac) in groups.items()
    ]


# --- training ----------------------------------------------------------------


def sessions_of(recordings):
    return sorted({r.session_id for r in recordings})


def split_sessions(recordings, train_session=None, test_session=None):
    """Split into (enrollment, probe) recordings by session id.

    Defaults to the first and second session ids in sorted order.
    """
    sessions = sessions_of(recordings)
    if train_session is None:
        train_session = sessions[0]
    if test_session is None:
        rest = [s for s in sessions if s != train_session]
        test_session = rest[0] if rest else None
    train = [r for r in recordings if r.session_id == train_session]
    test = [r for r in recordings if r.session_id == test_session] if test_session else []
    return train, test


def select_subjects(recordings, fraction, seed):
    """Random subset holding ``fraction`` of the subjects (at least 2)."""
    subjects = sorted({r.subject_id for r in recordings})
    if fraction >= 1.0:
        return list(recordings)
    n = max(2, int(round(fraction * len(subjects))))
    rng = np.random.default_rng(seed)
    keep = set(rng.choice(subjects, size=min(n, len(subjects)), replace=False).tolist())
    return [r for r in recordings if r.subject_id in keep]


def _stack(recordings, kind, subject_index):
    rows, labels = [], []
    for r in recordings:
        x = r.fix if kind is FIXATION else r.sacc
        rows.append(x)
        labels.extend([subject_index[r.subject_id]] * x.shape[0])
    width = N_FIXATION_FEATURES if kind is FIXATION else N_SACCADE_FEATURES
    return np.vstack(rows) if rows else np.zeros((0, width)), np.array(labels, dtype=int)


def usable_subjects(recordings, schemas):
    """Subjects having at least one segment of every kind whose mask is non-empty."""
    counts = {}
    for r in recordings:
        c = counts.setdefault(r.subject_id, [0, 0])
        c[0] += r.fix.shape[0]
        c[1] += r.sacc.shape[0]
    need_fix = any(schemas[FIXATION].mask)
    need_sac = any(schemas[SACCADE].mask)
    return sorted(s for s, (nf, ns) in counts.items() if (nf > 0 or not need_fix) and (ns > 0 or not need_sac))


def train_model(recordings, cfg=PipelineConfig(), schemas=None, drop_incomplete=False):
    """Train a fusion model on enrollment recordings.

    Every subject needs at least one segment of each kind in use; with
    ``drop_incomplete`` such subjects are dropped with a warning instead of
    raising.
    """
    schemas = schemas or cfg.schemas()
    recordings = list(recordings)
    subjects = sorted({r.subject_id for r in recordings})
    usable = usable_subjects(recordings, schemas)
    if len(usable) != len(subjects):
        missing = sorted(set(subjects) - set(usable))
        if not drop_incomplete:
            raise InsufficientDataError(f"subjects without segments of a required kind: {', '.join(missing)}")
        warnings.warn(f"dropping subjects without segments: {', '.join(missing)}", RuntimeWarning, stacklevel=2)
        recordings = [r for r in recordings if r.subject_id in set(usable)]
    subjects = usable
    if not subjects:
        raise InsufficientDataError("no subjects to train on")
    index = {s: i for i, s in enumerate(subjects)}
    nets, stats = {}, {}
    for kind in (FIXATION, SACCADE):
        schema = schemas[kind]
        if not any(schema.mask):
            nets[kind] = None
            stats[kind] = NormalizationStats(np.zeros(0), np.zeros(0))
            continue
        raw, labels = _stack(recordings, kind, index)
        x = apply_mask(raw, schema)
        stats[kind] = fit_normalizer(x)
        nets[kind] = train_network(kind, normalize(x, stats[kind]), labels, subjects, cfg.k_per_subject, cfg.seed)
    return FusionModel(
        subject_ids=tuple(subjects),
        fix_net=nets[FIXATION],
        sacc_net=nets[SACCADE],
        lam=cfg.lam,
        norm_stats=stats,
        schemas=schemas,
        config=cfg.as_dict(),
    )


def config_for_model(model):
    """Rebuild the pipeline configuration a model was trained with."""
    return config_from_dict({k: v for k, v in model.config.items() if k != "masks"}, PipelineConfig())

