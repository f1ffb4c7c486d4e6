"""Sampled curve container and its CSV form."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

CURVE_KINDS = ("avg_fidelity", "fidelity_x", "fidelity_y", "fidelity_z", "population_0", "coherence", "envelope")


@dataclass(frozen=True)
class FidelityCurve:
    """Sampled ensemble average with per-sample standard errors.

    ``times`` are in seconds and strictly increasing.  ``meta`` carries
    free-form provenance such as the frame or observable convention.
    """

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray = None
    n_realizations: int = 1
    kind: str = "avg_fidelity"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise InvalidArgument("times and values must be 1-D arrays of equal length")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise InvalidArgument("curve times must be strictly increasing")
        if self.kind not in CURVE_KINDS:
            raise InvalidArgument(f"unknown curve kind {self.kind!r}")
        se = np.zeros_like(v) if self.stderr is None else np.asarray(self.stderr, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "stderr", se)

    def __len__(self):
        return len(self.times)

    def with_values(self, values, kind=None):
        return FidelityCurve(self.times, values, np.zeros(len(self.times)), self.n_realizations,
                             kind or self.kind, dict(self.meta))


def format_float(x):
    return repr(float(x))


def write_curve_csv(curve, path):
    """Write ``t_s,value,stderr`` rows using round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "value", "stderr"])
        for t, v, s in zip(curve.times, curve.values, curve.stderr):
            w.writerow([format_float(t), format_float(v), format_float(s)])


def read_curve_csv(path, kind="avg_fidelity"):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0][:2]] != ["t_s", "value"]:
        raise InvalidArgument(f"{path}: expected a header starting with t_s,value")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    if data.size == 0:
        raise InvalidArgument(f"{path}: no data rows")
    stderr = data[:, 2] if data.shape[1] > 2 else None
    return FidelityCurve(data[:, 0], data[:, 1], stderr, kind=kind)
