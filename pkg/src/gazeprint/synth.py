"""Synthetic multi-subject gaze recordings.

Saccades follow a minimum-jerk position profile whose duration comes from
a main-sequence rule scaled by the subject's velocity gain; a time warp
makes the velocity peak early or late. Fixations hold the landing point
with Ornstein-Uhlenbeck tremor. The generated cohort deliberately
exaggerates inter-subject differences: it exists to exercise the pipeline,
not to model real oculomotor physiology.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import ConfigurationError, DegenerateInputError
from .gaze_io import AcquisitionGeometry, GazeRecording, write_geometry, write_recording

DEFAULT_GEOMETRY = AcquisitionGeometry(
    head_distance_mm=550.0,
    screen_width_mm=474.0,
    screen_height_mm=297.0,
    screen_width_px=1680,
    screen_height_px=1050,
    sample_rate_hz=250,
)

RAN_RANGE_DEG = (12.0, 8.0)  # half-width, half-height of the dot field
TREMOR_TAU_MS = 40.0


@dataclass(frozen=True)
class SubjectProfile:
    peak_velocity_gain: float = 1.0
    fixation_tremor_std: float = 0.1  # deg
    saccade_duration_bias: float = 0.0  # ms
    skew_tendency: float = 0.0  # >0 puts the velocity peak early
    seed: int = 0
    latency_ms: float = 200.0
    reading_span_deg: float = 2.0

    def __post_init__(self):
        if not self.peak_velocity_gain > 0:
            raise ConfigurationError("peak_velocity_gain must be positive")
        if self.fixation_tremor_std < 0:
            raise ConfigurationError("fixation_tremor_std must be non-negative")
        if not self.latency_ms > 0 or not self.reading_span_deg > 0:
            raise ConfigurationError("latency_ms and reading_span_deg must be positive")


def min_jerk(u):
    """Normalised minimum-jerk position profile on u in [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def saccade_duration_ms(amplitude_deg, profile):
    # main-sequence duration, shortened by the velocity gain
    base = 2.2 * amplitude_deg + 21.0
    return base / profile.peak_velocity_gain + profile.saccade_duration_bias


def _ou(n, std, dt_ms, rng):
    """Stationary-variance OU noise of length n starting at 0, in 2-D."""
    out = np.zeros((n, 2))
    if std == 0 or n == 0:
        return out
    a = np.exp(-dt_ms / TREMOR_TAU_MS)
    kick = std * np.sqrt(1.0 - a * a)
    eps = rng.standard_normal((n - 1, 2))
    out[1:] = signal.lfilter([kick], [1.0, -a], eps, axis=0)
    return out


class _Writer:
    """Fills a gaze trajectory forward in time."""

    def __init__(self, n, dt_ms, profile, rng):
        self.gaze = np.zeros((n, 2))
        self.stim = np.zeros((n, 2))
        self.n = n
        self.dt = dt_ms
        self.profile = profile
        self.rng = rng
        self.i = 0
        self.pos = np.zeros(2)

    def fixate(self, until, stim):
        j = min(until, self.n)
        if j <= self.i:
            return
        self.gaze[self.i : j] = self.pos + _ou(j - self.i, self.profile.fixation_tremor_std, self.dt, self.rng)
        if stim is not None:
            self.stim[self.i : j] = stim
        self.pos = self.gaze[j - 1].copy()
        self.i = j

    def saccade(self, target, stim):
        p = self.profile
        amp = float(np.hypot(*(target - self.pos)))
        dur = max(saccade_duration_ms(amp, p), 2 * self.dt)
        n = max(int(np.ceil(dur / self.dt)), 1)
        tau = np.arange(1, n + 1) * self.dt / dur
        warp = np.exp(-p.skew_tendency)
        s = min_jerk(tau**warp)[:, None]
        j = min(self.i + n, self.n)
        start = self.pos.copy()
        self.gaze[self.i : j] = start + (target - start) * s[: j - self.i]
        if stim is not None:
            self.stim[self.i : j] = stim
        self.i = j
        self.pos = target.copy()


def _ran(w, rng):
    hx, hy = RAN_RANGE_DEG
    p = w.profile
    targets = [np.array([rng.uniform(-hx, hx), rng.uniform(-hy, hy)])]
    w.pos = targets[0].copy()
    k = 0
    while w.i < w.n:
        k += 1
        targets.append(np.array([rng.uniform(-hx, hx), rng.uniform(-hy, hy)]))
        latency = p.latency_ms * rng.uniform(0.85, 1.15)
        w.fixate(int(round((1000.0 * k + latency) / w.dt)), None)
        if w.i < w.n:
            w.saccade(targets[k] + rng.normal(0.0, 0.2, size=2), None)
    # the dot jumps on the second boundary, independent of the gaze
    slot = np.minimum((np.arange(w.n) * w.dt // 1000.0).astype(int), len(targets) - 1)
    w.stim[:] = np.array(targets)[slot]


def _tex(w, rng):
    p = w.profile
    left, right = -12.0, 12.0
    top, spacing, n_lines = -8.0, 1.6, 11
    line = 0
    w.pos = np.array([left, top])
    while w.i < w.n:
        y = top + spacing * (line % n_lines)
        x = left
        while x < right and w.i < w.n:
            hold = rng.uniform(0.75, 1.25) * (p.latency_ms + 40.0)
            w.fixate(w.i + max(int(round(hold / w.dt)), 1), np.array([x, y]))
            step = p.reading_span_deg * rng.uniform(0.6, 1.4)
            if rng.uniform() < 0.1:
                step = -0.5 * step  # regression
            x = x + step
            if w.i < w.n and x < right:
                w.saccade(np.array([x, y]) + rng.normal(0.0, 0.1, size=2), np.array([x, y]))
        line += 1
        if w.i < w.n:
            y = top + spacing * (line % n_lines)
            w.saccade(np.array([left, y]) + rng.normal(0.0, 0.2, size=2), np.array([left, y]))


def generate_recording(
    profile,
    stimulus_kind="RAN",
    duration_s=100.0,
    rate_hz=250,
    session="S1",
    subject_id="P000",
    geometry=DEFAULT_GEOMETRY,
):
    """Synthesize one recording for ``profile``.

    RAN moves a dot to a new uniformly random position every second and the
    gaze follows it after a latency. TEX reads lines left to right with
    profile-dependent saccade lengths, occasional regressions and a return
    sweep at the end of each line. The output is fully determined by
    ``(profile.seed, session)``.
    """
    if duration_s < 5:
        raise DegenerateInputError(f"duration must be at least 5 s, got {duration_s}")
    if stimulus_kind not in ("RAN", "TEX"):
        raise ConfigurationError(f"unknown stimulus {stimulus_kind!r}")
    if rate_hz not in (250, 1000):
        raise ConfigurationError(f"rate must be 250 or 1000 Hz, got {rate_hz}")
    session_key = [ord(c) for c in str(session)]
    rng = np.random.default_rng([int(profile.seed), *session_key, 0 if stimulus_kind == "RAN" else 1])
    dt_ms = 1000.0 / rate_hz
    n = int(round(duration_s * rate_hz))
    w = _Writer(n, dt_ms, profile, rng)
    (_ran if stimulus_kind == "RAN" else _tex)(w, rng)
    return GazeRecording(
        subject_id=subject_id,
        session_id=str(session),
        stimulus_kind=stimulus_kind,
        geometry=replace(geometry, sample_rate_hz=rate_hz),
        t=np.arange(n) * dt_ms,
        theta_x=np.radians(w.gaze[:, 0]),
        theta_y=np.radians(w.gaze[:, 1]),
        stim_x=np.radians(w.stim[:, 0]),
        stim_y=np.radians(w.stim[:, 1]),
        valid=np.ones(n, dtype=bool),
    )


# parameter ranges spanned by a well-separated cohort
PROFILE_RANGES = {
    "peak_velocity_gain": (0.6, 1.6),
    "fixation_tremor_std": (0.03, 0.25),
    "saccade_duration_bias": (0.0, 24.0),
    "skew_tendency": (-0.4, 0.4),
    "latency_ms": (150.0, 300.0),
    "reading_span_deg": (1.5, 3.0),
}


def _profile_at(u, seed):
    kw = {k: lo + (hi - lo) * float(x) for (k, (lo, hi)), x in zip(PROFILE_RANGES.items(), u)}
    return SubjectProfile(seed=seed, **kw)


def make_profiles(n_subjects, seed=0, archetypes=None, jitter=0.01):
    """Profiles for a synthetic cohort.

    Without ``archetypes`` the subjects fill the parameter box as a scrambled
    Halton sequence, which keeps them well apart. With ``archetypes=a`` the
    cohort is split round-robin among ``a`` distinct archetypes and members
    of one archetype differ only by ``jitter`` (fraction of each range).
    """
    from scipy.stats import qmc

    dim = len(PROFILE_RANGES)
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**31 - 1, size=n_subjects)
    if archetypes is None:
        pts = qmc.Halton(d=dim, scramble=True, seed=rng).random(n_subjects)
        return [_profile_at(u, int(s)) for u, s in zip(pts, seeds)]
    centres = np.array([[0.1 + 0.8 * ((a * (k + 1)) % archetypes) / max(archetypes - 1, 1) for k in range(dim)]
                        for a in range(archetypes)])
    out = []
    for i in range(n_subjects):
        u = np.clip(centres[i % archetypes] + rng.uniform(-jitter, jitter, size=dim), 0.0, 1.0)
        out.append(_profile_at(u, int(seeds[i])))
    return out


def subject_name(i):
    return f"P{i + 1:03d}"


def write_cohort(out_dir, profiles, sessions=2, stimulus="RAN", duration_s=100.0, rate_hz=250):
    """Write ``<subject>_<session>_<stimulus>.csv`` + ``.geom`` for every recording.

    A ``profiles.csv`` with the generating parameters is written alongside.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, prof in enumerate(profiles):
        for s in range(1, sessions + 1):
            rec = generate_recording(prof, stimulus, duration_s, rate_hz, f"S{s}", subject_name(i))
            stem = out / f"{rec.subject_id}_{rec.session_id}_{stimulus}"
            write_recording(stem.with_suffix(".csv"), rec)
            write_geometry(stem.with_suffix(".geom"), rec.geometry)
            paths.append(stem.with_suffix(".csv"))
    keys = ["seed", *PROFILE_RANGES]
    with open(out / "profiles.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["subject", *keys]) + "\n")
        for i, p in enumerate(profiles):
            fh.write(",".join([subject_name(i)] + [repr(getattr(p, k)) for k in keys]) + "\n")
    return paths
