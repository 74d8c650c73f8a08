"""Reading, validating and resampling gaze recordings.

Recordings are stored as a headered CSV with angles in degrees plus a
key-value geometry sidecar. In memory everything is kept in radians as
read-only numpy column arrays.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import signal

from .errors import ConfigurationError, DomainError, ParseError, SchemaError

CSV_HEADER = ("t_ms", "theta_x_deg", "theta_y_deg", "stim_x_deg", "stim_y_deg", "valid")
GEOMETRY_KEYS = (
    "head_distance_mm",
    "screen_width_mm",
    "screen_height_mm",
    "screen_width_px",
    "screen_height_px",
    "sample_rate_hz",
)
SUPPORTED_RATES = (250, 1000)
WORKING_RATE = 250

# anti-aliasing FIR used by decimate_to_250
DECIMATION_FACTOR = 4
FIR_ORDER = 48
FIR_CUTOFF = 0.8  # fraction of the post-decimation Nyquist frequency


@dataclass(frozen=True)
class AcquisitionGeometry:
    head_distance_mm: float
    screen_width_mm: float
    screen_height_mm: float
    screen_width_px: int
    screen_height_px: int
    sample_rate_hz: int

    def __post_init__(self):
        for key in GEOMETRY_KEYS:
            value = getattr(self, key)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"geometry field {key} must be positive, got {value!r}")

    def with_rate(self, rate):
        return replace(self, sample_rate_hz=rate)


class GazeSample(NamedTuple):
    t: float
    theta_x: float
    theta_y: float
    stim_x: float
    stim_y: float
    valid: bool


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GazeRecording:
    """One eye-tracking recording. Times in ms, angles in radians."""

    subject_id: str
    session_id: str
    stimulus_kind: str
    geometry: AcquisitionGeometry
    t: np.ndarray
    theta_x: np.ndarray
    theta_y: np.ndarray
    stim_x: np.ndarray
    stim_y: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        for name in ("t", "theta_x", "theta_y", "stim_x", "stim_y"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "valid", _frozen(self.valid, dtype=bool))
        n = self.t.shape[0]
        if n == 0:
            raise SchemaError("recording has no samples")
        for name in ("theta_x", "theta_y", "stim_x", "stim_y", "valid"):
            if getattr(self, name).shape != (n,):
                raise SchemaError(f"column {name} has shape {getattr(self, name).shape}, expected ({n},)")
        steps = np.diff(self.t)
        if np.any(~(steps > 0)):
            bad = int(np.argmax(~(steps > 0))) + 1
            raise SchemaError(f"timestamps not strictly increasing at sample {bad}")
        if self.stimulus_kind not in ("RAN", "TEX"):
            raise SchemaError(f"unknown stimulus kind {self.stimulus_kind!r}")

    def __len__(self):
        return self.t.shape[0]

    def sample(self, i):
        return GazeSample(
            float(self.t[i]),
            float(self.theta_x[i]),
            float(self.theta_y[i]),
            float(self.stim_x[i]),
            float(self.stim_y[i]),
            bool(self.valid[i]),
        )

    @property
    def samples(self):
        return [self.sample(i) for i in range(len(self))]


@dataclass(frozen=True, eq=False)
class ScreenTrace:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    valid: np.ndarray = field(repr=False)

    def __len__(self):
        return self.t.shape[0]


def read_geometry(path):
    """Parse a ``key = value`` (or ``key: value``) geometry sidecar."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            for sep in ("=", ":"):
                if sep in line:
                    key, value = (s.strip() for s in line.split(sep, 1))
                    break
            else:
                raise ParseError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
            if key not in GEOMETRY_KEYS:
                raise ParseError(f"unknown geometry key {key!r}", line=lineno)
            try:
                values[key] = float(value)
            except ValueError:
                raise ParseError(f"non-numeric value for {key}: {value!r}", line=lineno) from None
    missing = [k for k in GEOMETRY_KEYS if k not in values]
    if missing:
        raise ConfigurationError(f"geometry file {path} is missing keys: {', '.join(missing)}")
    for key in ("screen_width_px", "screen_height_px", "sample_rate_hz"):
        values[key] = int(round(values[key]))
    return AcquisitionGeometry(**values)


def write_geometry(path, geometry):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in GEOMETRY_KEYS:
            fh.write(f"{key} = {getattr(geometry, key)!r}\n")


def parse_recording(path, geometry, subject_id=None, session_id=None, stimulus_kind=None):
    """Load a recording CSV.

    Subject, session and stimulus default to the ``<subject>_<session>_<stimulus>``
    pattern of the file stem. Invalid rows are kept; their angle cells may
    be empty or ``nan``.
    """
    path = Path(path)
    if geometry.sample_rate_hz not in SUPPORTED_RATES:
        raise ConfigurationError(
            f"sample rate {geometry.sample_rate_hz} Hz not supported (expected one of {SUPPORTED_RATES})"
        )
    stem_parts = path.stem.split("_")
    if subject_id is None:
        subject_id = stem_parts[0]
    if session_id is None:
        session_id = stem_parts[1] if len(stem_parts) > 1 else "S1"
    if stimulus_kind is None:
        stimulus_kind = stem_parts[2].upper() if len(stem_parts) > 2 else "RAN"

    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ParseError(f"expected header {','.join(CSV_HEADER)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", line=lineno)
            flag = row[5].strip()
            if flag not in ("0", "1"):
                raise ParseError(f"valid must be 0 or 1, got {flag!r}", line=lineno)
            valid = flag == "1"
            try:
                t = float(row[0])
                angles = [float(c) if c.strip() else math.nan for c in row[1:5]]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not math.isfinite(t):
                raise ParseError("timestamp must be finite", line=lineno)
            if valid and not all(math.isfinite(a) for a in angles[:2]):
                raise ParseError("valid sample with missing gaze angle", line=lineno)
            for a in angles[:2]:
                if math.isfinite(a) and abs(a) >= 90.0:
                    raise ParseError(f"gaze angle {a} deg outside (-90, 90)", line=lineno)
            rows.append((t, *angles, valid))
    if not rows:
        raise SchemaError(f"{path} contains no samples")
    cols = list(zip(*rows))
    return GazeRecording(
        subject_id=str(subject_id),
        session_id=str(session_id),
        stimulus_kind=str(stimulus_kind),
        geometry=geometry,
        t=np.array(cols[0]),
        theta_x=np.radians(cols[1]),
        theta_y=np.radians(cols[2]),
        stim_x=np.radians(cols[3]),
        stim_y=np.radians(cols[4]),
        valid=np.array(cols[5], dtype=bool),
    )


def _fmt(v):
    return "nan" if not math.isfinite(v) else repr(float(v))


def write_recording(path, rec):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        deg = [np.degrees(c) for c in (rec.theta_x, rec.theta_y, rec.stim_x, rec.stim_y)]
        for i in range(len(rec)):
            fields = [_fmt(rec.t[i])] + [_fmt(c[i]) for c in deg] + ["1" if rec.valid[i] else "0"]
            fh.write(",".join(fields) + "\n")


def fill_invalid(values, valid):
    """Linearly interpolate over invalid or non-finite samples.

    Used only to feed filters; the filled values never leave the pipeline
    as valid data.
    """
    values = np.asarray(values, dtype=float)
    good = np.asarray(valid, dtype=bool) & np.isfinite(values)
    if good.all():
        return values.copy()
    if not good.any():
        raise DomainError("no valid samples to interpolate from")
    idx = np.arange(values.shape[0])
    return np.interp(idx, idx[good], values[good])


def anti_alias_taps():
    return signal.firwin(FIR_ORDER + 1, FIR_CUTOFF / DECIMATION_FACTOR)


def decimate_to_250(rec):
    """Low-pass and downsample a 1000 Hz recording to 250 Hz.

    Uses a linear-phase FIR (order 48) so no group delay is introduced; the
    signal is padded by symmetric reflection before filtering. Output sample
    ``k`` sits at source sample ``4k`` and is valid only if all four source
    samples ``4k..4k+3`` were valid. Recordings already at 250 Hz are
    returned unchanged.
    """
    rate = rec.geometry.sample_rate_hz
    if rate == WORKING_RATE:
        return rec
    if rate != 1000:
        raise ConfigurationError(f"cannot decimate from {rate} Hz")
    q = DECIMATION_FACTOR
    n_out = len(rec) // q
    if n_out == 0:
        raise DomainError(f"recording of {len(rec)} samples is too short to decimate")
    taps = anti_alias_taps()
    half = FIR_ORDER // 2

    def lowpass(x):
        x = fill_invalid(x, rec.valid)
        padded = np.pad(x, half, mode="symmetric")
        return np.convolve(padded, taps, mode="valid")[: n_out * q : q]

    valid = rec.valid[: n_out * q].reshape(n_out, q).all(axis=1)
    return GazeRecording(
        subject_id=rec.subject_id,
        session_id=rec.session_id,
        stimulus_kind=rec.stimulus_kind,
        geometry=rec.geometry.with_rate(WORKING_RATE),
        t=rec.t[: n_out * q : q],
        theta_x=lowpass(rec.theta_x),
        theta_y=lowpass(rec.theta_y),
        stim_x=lowpass(rec.stim_x),
        stim_y=lowpass(rec.stim_y),
        valid=valid,
    )


def _check_domain(theta, axis):
    bad = np.flatnonzero(np.isfinite(theta) & (np.abs(theta) >= np.pi / 2))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"|theta_{axis}| >= pi/2 at sample {i} ({theta[i]!r} rad)", index=i)


def to_screen(rec):
    """Project visual angles onto the screen plane in pixels."""
    g = rec.geometry
    _check_domain(rec.theta_x, "x")
    _check_domain(rec.theta_y, "y")
    sx = g.head_distance_mm * g.screen_width_px / g.screen_width_mm
    sy = g.head_distance_mm * g.screen_height_px / g.screen_height_mm
    x = sx * np.tan(rec.theta_x) + g.screen_width_px / 2
    y = sy * np.tan(rec.theta_y) + g.screen_height_px / 2
    return ScreenTrace(t=rec.t, x=_frozen(x), y=_frozen(y), valid=rec.valid)


def from_screen(x, y, geometry):
    """Inverse of :func:`to_screen`; returns ``(theta_x, theta_y)`` in radians."""
    g = geometry
    sx = g.head_distance_mm * g.screen_width_px / g.screen_width_mm
    sy = g.head_distance_mm * g.screen_height_px / g.screen_height_mm
    theta_x = np.arctan((np.asarray(x) - g.screen_width_px / 2) / sx)
    theta_y = np.arctan((np.asarray(y) - g.screen_height_px / 2) / sy)
    return theta_x, theta_y
