"""Feature names and the published per-stimulus selection masks.

Each row is ``(feature or group, TEX flags, RAN flags)``. A group stands
for the six statistics mean, median, max, std, skewness, kurtosis and
carries one flag per statistic in that order. Flags are kept verbatim
(``Y`` = used, ``N`` = dropped) so they can be checked against the
printed tables by eye.
"""

STIMULI = ("RAN", "TEX")
STAT_SUFFIXES = ("mean", "median", "max", "std", "skew", "kurtosis")

FIXATION_TABLE = (
    ("duration", "N", "Y"),
    ("std_x", "N", "N"),
    ("std_y", "Y", "N"),
    ("path_length", "Y", "Y"),
    ("angle_prev", "Y", "Y"),
    ("distance_prev", "Y", "Y"),
    ("skew_x", "Y", "Y"),
    ("skew_y", "Y", "Y"),
    ("kurtosis_x", "N", "N"),
    ("kurtosis_y", "Y", "Y"),
    ("dispersion", "Y", "Y"),
    ("avg_velocity", "Y", "Y"),
)

SACCADE_TABLE = (
    ("duration", "N", "N"),
    ("dispersion", "Y", "Y"),
    ("ang_vel*", "NYYYYY", "NNNYYY"),
    ("ang_acc*", "YYYYYN", "YYYYYY"),
    ("std_x", "Y", "Y"),
    ("std_y", "Y", "Y"),
    ("path_length", "Y", "Y"),
    ("angle_prev", "Y", "Y"),
    ("distance_prev", "Y", "Y"),
    ("saccadic_ratio", "Y", "Y"),
    ("angle", "Y", "Y"),
    ("amplitude", "Y", "Y"),
    ("vel_x*", "YYYYYY", "YYYYYY"),
    ("vel_y*", "YYYYYY", "YYYYNY"),
    ("acc_x*", "YYYYYY", "YYYYYY"),
    ("acc_y*", "YYYYYY", "YYNYYY"),
)

# durations ms, screen quantities px, angular kinematics deg, directions rad
FIXATION_UNITS = {
    "duration": "ms",
    "std_x": "px",
    "std_y": "px",
    "path_length": "px",
    "angle_prev": "rad",
    "distance_prev": "px",
    "skew_x": "1",
    "skew_y": "1",
    "kurtosis_x": "1",
    "kurtosis_y": "1",
    "dispersion": "px",
    "avg_velocity": "px/s",
}

SACCADE_UNITS = {
    "duration": "ms",
    "dispersion": "px",
    "ang_vel": "deg/s",
    "ang_acc": "deg/s^2",
    "std_x": "px",
    "std_y": "px",
    "path_length": "px",
    "angle_prev": "rad",
    "distance_prev": "px",
    "saccadic_ratio": "deg/s/ms",
    "angle": "rad",
    "amplitude": "px",
    "vel_x": "px/s",
    "vel_y": "px/s",
    "acc_x": "px/s^2",
    "acc_y": "px/s^2",
}


def expand(table, stimulus):
    """Flatten a table into ``(names, mask)`` for one stimulus."""
    col = 1 if stimulus == "TEX" else 2
    names, mask = [], []
    for row in table:
        label, flags = row[0], row[col]
        if label.endswith("*"):
            base = label[:-1]
            if len(flags) != len(STAT_SUFFIXES):
                raise ValueError(f"group {base} needs {len(STAT_SUFFIXES)} flags, got {flags!r}")
            names.extend(f"{base}_{s}" for s in STAT_SUFFIXES)
            mask.extend(f == "Y" for f in flags)
        else:
            names.append(label)
            mask.append(flags == "Y")
    return tuple(names), tuple(mask)
