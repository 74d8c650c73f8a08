"""Score-level fusion eye-movement biometrics."""

__version__ = "0.1.0"
