"""Post-processing of simulated curves: envelopes, decay fits, sensitivity.

Coherence times are read from the upper envelope of a fidelity curve.
The envelope is normalized against the curve's long-time floor (2/3 for
the average fidelity, 1/2 for a single-axis fidelity) so that the
normalized signal starts at 1 and decays to 0.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import curve_fit, least_squares

from .curves import FidelityCurve
from .errors import FitFailure, InvalidArgument

GAMMA_NV = 2 * np.pi * 28e9  # rad/(s T), 28 Hz/nT
BETA_BOUNDS = (0.2, 4.0)
AVG_FLOOR = 2.0 / 3.0
AXIS_FLOOR = 0.5


def default_threshold(floor):
    """Fidelity at which the normalized decay reaches 1/e."""
    return floor + (1.0 - floor) * np.exp(-1.0)


@dataclass(frozen=True)
class CoherenceFit:
    t2: float
    beta: float
    rms_residual: float
    method: str = "stretched_exp"
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.t2 > 0:
            raise InvalidArgument("fitted T2 must be positive")


@dataclass(frozen=True)
class ThresholdTime:
    time: float
    reached: bool


@dataclass(frozen=True)
class CoherenceResult:
    """Envelope-based coherence estimate of a single curve."""

    envelope: FidelityCurve
    threshold: ThresholdTime
    fit: CoherenceFit
    floor: float

    @property
    def t2(self):
        return self.threshold.time if self.threshold.reached else self.fit.t2

    @property
    def method(self):
        return "threshold" if self.threshold.reached else self.fit.method


def _count_extrema(v):
    d = np.diff(v)
    d = d[d != 0]
    return int(np.sum(np.sign(d[1:]) != np.sign(d[:-1])))


def _estimate_period(t, v):
    inner = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1
    if len(inner) < 2:
        return None
    return float(np.median(np.diff(t[inner])))


def extract_envelope(curve, period=None, min_points=4):
    """Upper and lower envelopes of an oscillating curve.

    The curve is cut greedily into windows no longer than one oscillation
    period.  In each window a sinusoid with that period plus an offset is
    fitted by linear least squares, giving ``offset +/- amplitude`` at the
    window's mean time.  Window estimates are joined by monotone cubic
    interpolation.  A curve with fewer than five local extrema is treated
    as monotone and returned unchanged as both envelopes.

    Parameters
    ----------
    curve : FidelityCurve
    period : float, optional
        Oscillation period in seconds.  Estimated from the spacing of local
        maxima when omitted.
    min_points : int
        Windows with fewer samples are skipped.
    """
    t, v = curve.times, curve.values
    if len(t) < 3:
        raise InvalidArgument("envelope extraction needs at least 3 samples")
    if _count_extrema(v) < 5:
        return curve.with_values(v.copy(), "envelope"), curve.with_values(v.copy(), "envelope")
    if period is None:
        period = _estimate_period(t, v)
        if period is None:
            return curve.with_values(v.copy(), "envelope"), curve.with_values(v.copy(), "envelope")
    w = 2 * np.pi / period

    centers, up, lo = [], [], []
    i, n = 0, len(t)
    while i < n:
        j = int(np.searchsorted(t, t[i] + period, side="left"))
        j = max(j, i + 1)
        tw, vw = t[i:j], v[i:j]
        if len(tw) >= min_points and tw[-1] - tw[0] >= 0.5 * period:
            a = np.column_stack([np.ones_like(tw), np.cos(w * tw), np.sin(w * tw)])
            coef = np.linalg.lstsq(a, vw, rcond=None)[0]
            amp = np.hypot(coef[1], coef[2])
            centers.append(tw.mean())
            up.append(coef[0] + amp)
            lo.append(coef[0] - amp)
        i = j
    if len(centers) < 2:
        return curve.with_values(v.copy(), "envelope"), curve.with_values(v.copy(), "envelope")

    centers = np.asarray(centers)
    tc = np.clip(t, centers[0], centers[-1])
    upper = PchipInterpolator(centers, up)(tc)
    lower = PchipInterpolator(centers, lo)(tc)
    # before the first full window the raw samples are the best estimate
    head = t < centers[0]
    upper[head] = np.maximum(upper[head], v[head])
    lower[head] = np.minimum(lower[head], v[head])
    return curve.with_values(upper, "envelope"), curve.with_values(lower, "envelope")


def _stretched(t, t2, beta, amp):
    return amp * np.exp(-np.power(t / t2, beta))


def fit_stretched_exp(times, values, weights=None, amplitude="first", beta=None):
    """Least-squares fit of ``A exp(-(t/T2)^beta)``.

    A coarse log-grid search seeds a bounded local refinement.

    Parameters
    ----------
    amplitude : "first", float or None
        ``"first"`` fixes A to the first value, a number fixes it to that
        number and ``None`` leaves it free.
    beta : float, optional
        Hold the stretch exponent fixed.

    Raises
    ------
    FitFailure
        When the refinement does not converge; the grid optimum is attached.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or len(t) < 8:
        raise InvalidArgument("stretched-exponential fit needs at least 8 points")
    tpos = t[t > 0]
    if len(tpos) == 0 or tpos.max() / tpos.min() < 5:
        raise InvalidArgument("fit points must span at least a factor of 5 in time")
    wts = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)

    if amplitude is None:
        amp0 = float(y[0]) if y[0] > 0 else 1.0
    elif amplitude == "first":
        amp0 = float(y[0])
    else:
        amp0 = float(amplitude)

    t2_grid = np.geomspace(tpos.min() / 3, tpos.max() * 30, 80)
    b_grid = [beta] if beta is not None else np.linspace(0.3, 3.8, 36)
    best = (np.inf, None, None)
    for b in b_grid:
        pred = amp0 * np.exp(-np.power(t[:, None] / t2_grid[None, :], b))
        sse = np.sum((wts[:, None] * (pred - y[:, None])) ** 2, axis=0)
        k = int(np.argmin(sse))
        if sse[k] < best[0]:
            best = (sse[k], t2_grid[k], b)
    _, t2g, bg = best
    grid_fit = CoherenceFit(float(t2g), float(bg), float(np.sqrt(best[0] / len(t))), "stretched_exp", amp0)

    def unpack(p):
        lt = p[0]
        b = beta if beta is not None else p[1]
        a = p[-1] if amplitude is None else amp0
        return np.exp(lt), b, a

    p0 = [np.log(t2g)]
    lb, ub = [-np.inf], [np.inf]
    if beta is None:
        p0.append(bg)
        lb.append(BETA_BOUNDS[0] + 1e-9)
        ub.append(BETA_BOUNDS[1] - 1e-9)
    if amplitude is None:
        p0.append(amp0)
        lb.append(0.0)
        ub.append(2.0 * max(abs(amp0), 1.0))

    def resid(p):
        t2, b, a = unpack(p)
        return wts * (_stretched(t, t2, b, a) - y)

    sol = least_squares(resid, p0, bounds=(lb, ub), xtol=1e-10, ftol=1e-10, gtol=1e-10, max_nfev=2000)
    if not sol.success:
        raise FitFailure("stretched-exponential refinement did not converge", fallback=grid_fit)
    t2, b, a = unpack(sol.x)
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    return CoherenceFit(float(t2), float(b), rms, "stretched_exp", float(a))


def threshold_time(curve, threshold):
    """First downward crossing of ``threshold`` with linear interpolation.

    Returns ``ThresholdTime(duration, False)`` when the curve never
    drops below the threshold.
    """
    t, v = curve.times, curve.values
    if len(t) < 2:
        raise InvalidArgument("threshold crossing needs at least 2 samples")
    if v[0] < threshold:
        raise InvalidArgument("curve starts below the threshold")
    below = np.flatnonzero(v < threshold)
    if len(below) == 0:
        return ThresholdTime(float(t[-1]), False)
    k = int(below[0])
    t0, t1, v0, v1 = t[k - 1], t[k], v[k - 1], v[k]
    return ThresholdTime(float(t0 + (v0 - threshold) * (t1 - t0) / (v0 - v1)), True)


def coherence_time(curve, floor, period=None, threshold=None, min_signal=0.05):
    """Envelope, threshold crossing and stretched-exponential fit of a curve.

    The upper envelope is normalized to ``(E - floor)/(1 - floor)`` and points
    above ``min_signal`` are fitted with unit amplitude.
    """
    if threshold is None:
        threshold = default_threshold(floor)
    upper, _ = extract_envelope(curve, period)
    env = np.minimum(upper.values, 1.0)
    upper = upper.with_values(env, "envelope")
    crossing = threshold_time(upper, threshold)
    norm = (env - floor) / (1.0 - floor)
    keep = (norm > min_signal) & (curve.times > 0)
    try:
        fit = fit_stretched_exp(curve.times[keep], norm[keep], amplitude=1.0)
    except FitFailure as exc:
        fit = exc.fallback
    except InvalidArgument:
        fit = CoherenceFit(crossing.time, 1.0, float("nan"), "threshold")
    return CoherenceResult(upper, crossing, fit, floor)


def fit_oscillation(times, values, guess=None):
    """Fit ``A cos(w t + phi) + C`` and return the angular frequency ``w``.

    Without a guess the starting frequency comes from the FFT peak of the
    curve resampled on a uniform grid.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(t) < 8:
        raise InvalidArgument("oscillation fit needs at least 8 points")
    if guess is None:
        tu = np.linspace(t[0], t[-1], 4 * len(t))
        yu = np.interp(tu, t, y) - np.mean(y)
        spec = np.abs(np.fft.rfft(yu))
        freqs = np.fft.rfftfreq(len(tu), tu[1] - tu[0])
        guess = 2 * np.pi * freqs[1 + int(np.argmax(spec[1:]))]

    def model(tt, a, w, ph, c):
        return a * np.cos(w * tt + ph) + c

    amp0 = 0.5 * (np.max(y) - np.min(y))
    p, _ = curve_fit(model, t, y, p0=[amp0, guess, 0.0, np.mean(y)], maxfev=20000)
    return abs(float(p[1]))


@dataclass(frozen=True)
class SensitivityInputs:
    """Shot-noise sensitivity inputs.

    Either ``contrast`` is given directly or it is computed as
    ``(a - b) exp(-(tau/t2rho)^p)``.
    """

    alpha: float
    n_ph: float
    tau: float
    contrast: float = None
    a: float = None
    b: float = None
    t2rho: float = None
    p: float = 1.0
    gamma_nv: float = GAMMA_NV
    t_r: float = 0.0
    overhead_factor: float = 1.0

    def __post_init__(self):
        if self.alpha == 0:
            raise InvalidArgument("attenuation factor must be non-zero")
        if not self.n_ph > 0:
            raise InvalidArgument("photon number per run must be positive")
        if not self.tau > 0:
            raise InvalidArgument("interrogation time must be positive")
        if self.overhead_factor < 1:
            raise InvalidArgument("overhead factor must be at least 1")
        if self.contrast is None:
            if None in (self.a, self.b, self.t2rho):
                raise InvalidArgument("give either contrast or a, b and t2rho")
            if not self.a > self.b:
                raise InvalidArgument("bright signal a must exceed dark signal b")

    def contrast_at(self, tau):
        if self.contrast is not None:
            return float(self.contrast)
        return float((self.a - self.b) * np.exp(-((tau / self.t2rho) ** self.p)))


@dataclass(frozen=True)
class SensitivityResult:
    eta: float  # T/sqrt(Hz)
    contrast: float
    delta_b_min_sqrt_t: float  # includes dead time
    tau_opt: float = None
    eta_opt: float = None


def _eta(inp, tau, contrast):
    return 2.0 * np.sqrt(inp.overhead_factor) / (
        inp.gamma_nv * abs(inp.alpha) * contrast * np.sqrt(inp.n_ph * tau))


def sensitivity(inp):
    """Photon-shot-noise limited sensitivity.

    ``eta = 2 sqrt(overhead) / (gamma |alpha| C sqrt(N_ph tau))``.  The
    dead-time corrected value multiplies by ``sqrt((tau + t_r)/tau)``.  When
    the contrast follows a decay law the ``tau = T2/2`` value is reported too.
    """
    c = inp.contrast_at(inp.tau)
    if not c > 0:
        raise InvalidArgument("contrast must be positive")
    eta = _eta(inp, inp.tau, c)
    dbm = eta * np.sqrt((inp.tau + inp.t_r) / inp.tau)
    tau_opt = eta_opt = None
    if inp.contrast is None:
        tau_opt = inp.t2rho / 2.0 if inp.p == 1 else inp.t2rho * (2 * inp.p) ** (-1 / inp.p)
        eta_opt = _eta(inp, tau_opt, inp.contrast_at(tau_opt))
    return SensitivityResult(float(eta), c, float(dbm), tau_opt, eta_opt)


FIT_HEADER = ["scenario", "protocol", "t2_s", "beta", "method", "residual"]


def write_fit_csv(rows, path):
    """Rows are ``(scenario, protocol, CoherenceResult or CoherenceFit)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIT_HEADER)
        for scenario, protocol, res in rows:
            if isinstance(res, CoherenceResult):
                w.writerow([scenario, protocol, repr(res.threshold.time), repr(res.fit.beta),
                            "threshold" if res.threshold.reached else "threshold_not_reached",
                            repr(0.0)])
                w.writerow([scenario, protocol, repr(res.fit.t2), repr(res.fit.beta),
                            res.fit.method, repr(res.fit.rms_residual)])
            else:
                w.writerow([scenario, protocol, repr(res.t2), repr(res.beta), res.method,
                            repr(res.rms_residual)])
