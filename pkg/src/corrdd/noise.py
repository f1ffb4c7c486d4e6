"""Ornstein-Uhlenbeck noise traces with deterministic, splittable seeding.

An OU process with correlation time ``tau`` and diffusion constant ``D``
has stationary variance ``D*tau/2``.  Traces are generated with the exact
one-step update, so any sample spacing is valid.
"""

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidArgument

# role labels used to derive independent RNG streams per realization
ROLE_DELTA = 0
ROLE_EPS1 = 1
ROLE_EPS_IND = 2


@dataclass(frozen=True)
class OuParams:
    """OU process parameters.

    Parameters
    ----------
    tau : float
        Correlation time in seconds.
    sigma : float
        Stationary standard deviation (rad/s for detuning noise,
        dimensionless for relative amplitude noise).
    dt : float, optional
        Sample spacing in seconds.  The dynamics engine fills this in when
        it picks a noise grid.
    """

    tau: float
    sigma: float
    dt: float = None

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise InvalidArgument(f"OU correlation time must be positive, got {self.tau}")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise InvalidArgument(f"OU sigma must be non-negative, got {self.sigma}")
        if self.dt is not None and not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidArgument(f"OU sample spacing must be positive, got {self.dt}")

    @property
    def diffusion(self):
        return 2.0 * self.sigma**2 / self.tau

    @classmethod
    def from_diffusion(cls, tau, D, dt=None):
        if D < 0:
            raise InvalidArgument("diffusion constant must be non-negative")
        return cls(tau=tau, sigma=float(np.sqrt(D * tau / 2.0)), dt=dt)

    def with_dt(self, dt):
        return replace(self, dt=dt)


@dataclass(frozen=True)
class NoiseConfig:
    """Detuning noise, relative drive-amplitude noise and their settings.

    ``delta`` is in rad/s; ``eps`` is relative to the drive amplitude.
    ``c`` is the zero-lag cross-correlation between the two drive errors.
    """

    delta: OuParams
    eps: OuParams
    c: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (-1.0 <= self.c <= 1.0):
            raise InvalidArgument(f"cross-correlation must satisfy |c| <= 1, got {self.c}")
        if self.eps.sigma > 0.2:
            warnings.warn(
                f"relative amplitude noise sigma={self.eps.sigma} is large; "
                "the perturbative shift formulas assume sigma << 1",
                stacklevel=2,
            )

    @classmethod
    def from_t2star(cls, t2_star, tau_delta, tau_omega, delta_omega, c=1.0, seed=0):
        """Build the noise model from T2*, the detuning correlation time and delta_Omega.

        The detuning diffusion constant is ``D = 4 / (T2*^2 tau)``, giving a
        stationary std of ``sqrt(2)/T2*``.
        """
        if t2_star <= 0:
            raise InvalidArgument("T2* must be positive")
        D = 4.0 / (t2_star**2 * tau_delta)
        return cls(
            delta=OuParams.from_diffusion(tau_delta, D),
            eps=OuParams(tau=tau_omega, sigma=delta_omega),
            c=c,
            seed=seed,
        )

    @classmethod
    def quiet(cls, seed=0):
        """A noise model with every amplitude set to zero."""
        return cls(delta=OuParams(1.0, 0.0), eps=OuParams(1.0, 0.0), c=1.0, seed=seed)

    @property
    def is_silent(self):
        return self.delta.sigma == 0 and self.eps.sigma == 0


@dataclass(frozen=True)
class NoiseTrace:
    dt: float
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) < 1:
            raise InvalidArgument("a noise trace needs at least one sample")

    @property
    def times(self):
        return self.dt * np.arange(len(self.values))

    def __len__(self):
        return len(self.values)


def stream(seed, realization=0, role=ROLE_DELTA):
    """Independent generator for a (seed, realization, role) triple.

    Streams are derived through ``SeedSequence`` spawn keys so they do not
    depend on the order in which realizations are scheduled.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(realization), int(role)))
    return np.random.Generator(np.random.PCG64(ss))


def ou_step(x, dt, tau, D, n):
    """Exact OU update over one interval ``dt`` with unit-normal draw ``n``."""
    if tau <= 0 or dt <= 0:
        raise InvalidArgument("tau and dt must be positive")
    if D < 0:
        raise InvalidArgument("diffusion constant must be non-negative")
    decay = np.exp(-dt / tau)
    return x * decay + n * np.sqrt(D * tau / 2.0 * -np.expm1(-2.0 * dt / tau))


def _ou_filter(draws, params):
    # x_k = a x_{k-1} + s n_k is a first-order IIR filter over the draws
    a = np.exp(-params.dt / params.tau)
    s = params.sigma * np.sqrt(-np.expm1(-2.0 * params.dt / params.tau))
    drive = s * draws
    drive[0] = params.sigma * draws[0]
    return lfilter([1.0], [1.0, -a], drive)


def make_ou_trace(params, n_steps, rng):
    """Stationary OU trace of ``n_steps`` samples spaced ``params.dt``."""
    if params.dt is None:
        raise InvalidArgument("OuParams.dt must be set to generate a trace")
    n_steps = int(n_steps)
    if n_steps < 1:
        raise InvalidArgument("n_steps must be at least 1")
    if params.sigma == 0:
        return NoiseTrace(params.dt, np.zeros(n_steps))
    return NoiseTrace(params.dt, _ou_filter(rng.standard_normal(n_steps), params))


def make_correlated_pair(params, c, n_steps, rng, rng_ind):
    """Two OU traces with identical marginals and zero-lag correlation ``c``.

    The second trace is ``c*eps1 + sqrt(1 - c^2)*eps_ind``.  ``rng_ind`` feeds
    the independent component and is not consumed when ``|c| == 1``.
    """
    if not (-1.0 <= c <= 1.0):
        raise InvalidArgument(f"cross-correlation must satisfy |c| <= 1, got {c}")
    first = make_ou_trace(params, n_steps, rng)
    if abs(c) == 1.0:
        return first, NoiseTrace(first.dt, c * first.values)
    ind = make_ou_trace(params, n_steps, rng_ind)
    second = c * first.values + np.sqrt(1.0 - c * c) * ind.values
    return first, NoiseTrace(first.dt, second)


def quasi_static(sigma, size, rng):
    """Time-independent Gaussian offsets, the tau -> infinity limit."""
    if sigma < 0:
        raise InvalidArgument("sigma must be non-negative")
    return sigma * rng.standard_normal(size)


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "value"])
        for t, v in zip(trace.times, trace.values):
            w.writerow([repr(float(t)), repr(float(v))])
