"""Closed-form drive arithmetic: dressed gaps, shift formulas, sensing factors.

All frequencies are angular (rad/s).  ``omega1`` is the first drive's Rabi
frequency, ``omega2`` the second drive's, and ``omega1_tilde`` the
modulation frequency of the second drive.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

SHIFT_POLICIES = ("resonant", "correlated", "correlated_bs", "explicit")
SENSING_KINDS = ("high_attenuation", "low_attenuation")


def optimal_shift_exact(omega1, omega2, c):
    """Modulation frequency minimizing the first-order gap spread.

    Uses the closed-form root of the variance derivative.  At ``c = 0`` the
    expression is 0/0 and the limit ``omega1`` is returned.
    """
    _check_c(c)
    if abs(c) < 1e-12:
        return float(omega1)
    o1, o2 = float(omega1), float(omega2)
    d = o2 * o2 - o1 * o1
    root = np.sqrt(4.0 * c * c * o2 * o2 * o1 * o1 + d * d)
    return float((root + 2.0 * c * o1 * o1 + d) / (2.0 * c * o1))


def optimal_shift_approx(omega1, omega2, c, bloch_siegert=False):
    """Leading-order shift ``omega1 + c*omega2^2/omega1``.

    With ``bloch_siegert`` the coefficient becomes ``c + 1/4`` to absorb the
    counter-rotating resonance shift of a linearly polarized second drive.
    """
    _check_c(c)
    coeff = c + 0.25 if bloch_siegert else c
    return float(omega1 + coeff * omega2 * omega2 / omega1)


def shift_scan_grid(omega1, omega2, n_list):
    """Modulation frequencies ``omega1 + (N/4) omega2^2/omega1`` for each N."""
    n_list = list(n_list)
    if not n_list:
        raise InvalidArgument("shift scan needs at least one N")
    return [float(omega1 + 0.25 * n * omega2 * omega2 / omega1) for n in n_list]


def _check_c(c):
    if not (-1.0 <= c <= 1.0):
        raise InvalidArgument(f"cross-correlation must satisfy |c| <= 1, got {c}")


@dataclass(frozen=True)
class DriveConfig:
    """Drive amplitudes and modulation frequency.

    Use :meth:`with_policy` to derive ``omega1_tilde`` from a named shift
    rule; the rule and its correlation argument are kept for reporting.
    """

    omega1: float
    omega2: float
    omega1_tilde: float
    shift_policy: str = "explicit"
    shift_c: float = 0.0

    def __post_init__(self):
        if self.shift_policy not in SHIFT_POLICIES:
            raise InvalidArgument(f"unknown shift policy {self.shift_policy!r}")
        if not self.omega1 > 0:
            raise InvalidArgument("omega1 must be positive")
        if not (0 <= self.omega2 < self.omega1):
            raise InvalidArgument("omega2 must satisfy 0 <= omega2 < omega1")
        if not self.omega1_tilde > 0:
            raise InvalidArgument("omega1_tilde must be positive")
        if self.omega2 / self.omega1 > 0.3:
            warnings.warn(
                f"omega2/omega1 = {self.omega2 / self.omega1:.3f} > 0.3 strains the "
                "second rotating-wave approximation",
                stacklevel=2,
            )

    @classmethod
    def with_policy(cls, omega1, omega2, policy="correlated", c=1.0, omega1_tilde=None):
        if policy == "resonant":
            wt = omega1
        elif policy == "correlated":
            wt = optimal_shift_exact(omega1, omega2, c)
        elif policy == "correlated_bs":
            wt = optimal_shift_approx(omega1, omega2, c, bloch_siegert=True)
        elif policy == "explicit":
            if omega1_tilde is None:
                raise InvalidArgument("explicit shift policy needs omega1_tilde")
            wt = omega1_tilde
        else:
            raise InvalidArgument(f"unknown shift policy {policy!r}")
        return cls(float(omega1), float(omega2), float(wt), policy, float(c))

    @property
    def detuning(self):
        """``omega1 - omega1_tilde``."""
        return self.omega1 - self.omega1_tilde


@dataclass(frozen=True)
class SensingScheme:
    kind: str
    omega0: float
    g0: float

    def __post_init__(self):
        if self.kind not in SENSING_KINDS:
            raise InvalidArgument(f"unknown sensing scheme {self.kind!r}")
        if self.g0 < 0:
            raise InvalidArgument("signal amplitude g0 must be non-negative")


def omega_e(d):
    """Effective Rabi frequency in the second rotating frame."""
    return float(np.hypot(d.omega2, d.detuning))


def dressed_gap(d, eps1, eps2):
    """Exact second-frame gap with relative amplitude errors eps1, eps2."""
    return float(np.hypot(d.omega2 * (1.0 + eps2), d.detuning + d.omega1 * eps1))


def gap_std(d, c, sigma):
    """First-order standard deviation of the dressed gap.

    ``sigma`` is the common relative amplitude std of both drives and ``c``
    their zero-lag correlation.
    """
    _check_c(c)
    if sigma < 0:
        raise InvalidArgument("sigma must be non-negative")
    o1, o2, dl = d.omega1, d.omega2, d.detuning
    den = dl * dl + o2 * o2
    var = (o1 * o1 * dl * dl + o2**4) / den + c * 2.0 * o1 * o2 * o2 * dl / den
    return float(sigma * np.sqrt(max(var, 0.0)))


def sensing_params(s, d):
    """Resonance frequency and attenuation factors for a sensing scheme.

    Returns ``(omega_g, alpha_dd, alpha_tilde, phi)``; the total
    attenuation is ``alpha_dd * alpha_tilde``.
    """
    oe = omega_e(d)
    if s.kind == "high_attenuation":
        return (s.omega0 - d.omega1_tilde - oe, 0.25, (d.detuning + oe) / oe, np.pi / 2)
    return (s.omega0 - oe, 0.5, -d.omega2 / oe, 0.0)


def clock_curvature(omega1, omega2):
    """Second-order coefficient of the gap at the c = 1 clock point."""
    return omega1 * np.sqrt(omega1**2 + omega2**2) / (2.0 * omega2)
