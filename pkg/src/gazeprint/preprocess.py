"""Smoothing and kinematic profiles (velocity / acceleration)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ConfigurationError, DegenerateInputError
from .gaze_io import ScreenTrace, fill_invalid

EDGE_MODES = ("interp", "symmetric")


@dataclass(frozen=True)
class SmoothingConfig:
    poly_order: int = 6
    frame_len: int = 15
    edge: str = "interp"

    def __post_init__(self):
        if self.frame_len % 2 != 1 or self.frame_len <= 0:
            raise ConfigurationError(f"frame_len must be a positive odd number, got {self.frame_len}")
        if not 0 <= self.poly_order < self.frame_len:
            raise ConfigurationError(
                f"poly_order must satisfy 0 <= poly_order < frame_len, got {self.poly_order}"
            )
        if self.edge not in EDGE_MODES:
            raise ConfigurationError(f"edge must be one of {EDGE_MODES}, got {self.edge!r}")


@dataclass(frozen=True, eq=False)
class KinematicProfiles:
    """Per-sample kinematics of one recording.

    Screen series are in px, px/s and px/s^2; angular series in deg/s and
    deg/s^2. ``ang_vel`` is the magnitude of the 2-D angular velocity.
    """

    pos_x: np.ndarray
    pos_y: np.ndarray
    vel_x: np.ndarray
    vel_y: np.ndarray
    acc_x: np.ndarray
    acc_y: np.ndarray
    ang_vel: np.ndarray
    ang_acc: np.ndarray

    def __len__(self):
        return self.pos_x.shape[0]


def savitzky_golay(series, cfg=SmoothingConfig()):
    """Savitzky-Golay smoothing.

    Interior points take the value at the centre of the least-squares
    polynomial fitted to the surrounding ``frame_len`` samples. With
    ``edge="interp"`` the first and last half-frames are evaluated on the
    polynomial fitted to the first/last full frame, so any polynomial of
    degree <= ``poly_order`` passes through unchanged. ``edge="symmetric"``
    mirrors the series about its ends (edge sample repeated) instead.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DegenerateInputError("savitzky_golay expects a 1-D series")
    if x.shape[0] < cfg.frame_len:
        raise DegenerateInputError(
            f"series of length {x.shape[0]} is shorter than the frame ({cfg.frame_len})"
        )
    if cfg.edge == "interp":
        return signal.savgol_filter(x, cfg.frame_len, cfg.poly_order, mode="interp")
    half = cfg.frame_len // 2
    coeffs = signal.savgol_coeffs(cfg.frame_len, cfg.poly_order, use="dot")
    padded = np.pad(x, half, mode="symmetric")
    windows = np.lib.stride_tricks.sliding_window_view(padded, cfg.frame_len)
    return windows @ coeffs


def differentiate(series, dt):
    """Forward difference; the last value is repeated so lengths match."""
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 2:
        raise DegenerateInputError("need at least 2 samples to differentiate")
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    d = np.empty_like(x)
    d[:-1] = np.diff(x) / dt
    d[-1] = d[-2]
    return d


def smooth_trace(trace, cfg=SmoothingConfig()):
    """Smooth screen positions; invalid samples are bridged for the filter only."""
    x = savitzky_golay(fill_invalid(trace.x, trace.valid), cfg)
    y = savitzky_golay(fill_invalid(trace.y, trace.valid), cfg)
    return ScreenTrace(t=trace.t, x=x, y=y, valid=trace.valid)


def compute_profiles(trace, theta_x, theta_y, dt):
    """Build velocity and acceleration profiles.

    ``trace`` holds already smoothed screen positions and ``theta_x`` /
    ``theta_y`` the smoothed visual angles in radians. ``dt`` is in seconds.
    """
    theta_x = np.asarray(theta_x, dtype=float)
    theta_y = np.asarray(theta_y, dtype=float)
    n = len(trace)
    if theta_x.shape != (n,) or theta_y.shape != (n,):
        raise DegenerateInputError("angle series must match the trace length")
    vel_x = differentiate(trace.x, dt)
    vel_y = differentiate(trace.y, dt)
    omega_x = differentiate(np.degrees(theta_x), dt)
    omega_y = differentiate(np.degrees(theta_y), dt)
    ang_vel = np.hypot(omega_x, omega_y)
    return KinematicProfiles(
        pos_x=np.asarray(trace.x, dtype=float),
        pos_y=np.asarray(trace.y, dtype=float),
        vel_x=vel_x,
        vel_y=vel_y,
        acc_x=differentiate(vel_x, dt),
        acc_y=differentiate(vel_y, dt),
        ang_vel=ang_vel,
        ang_acc=differentiate(ang_vel, dt),
    )
