"""Monte Carlo propagation of the doubly driven qubit in the first rotating frame.

The Hamiltonian per realization is

    H_I(t) = (delta/2) sz + (Omega1 (1+eps1)/2) sx + Omega2 (1+eps2) cos(Omega1~ t) sy

with no second rotating-wave approximation.  Time evolution uses
piecewise-constant exponentials evaluated at step midpoints.  Each
realization owns its RNG streams, and ensemble sums run in realization
order, so results do not depend on the thread count.
"""

from dataclasses import dataclass, field, replace

import numba
import numpy as np

from . import _kernels
from .analysis import AXIS_FLOOR, AVG_FLOOR, coherence_time
from .curves import FidelityCurve
from .errors import InvalidArgument
from .noise import ROLE_DELTA, ROLE_EPS1, ROLE_EPS_IND, NoiseConfig, make_correlated_pair, make_ou_trace, stream
from .protocol import DriveConfig, SensingScheme, omega_e, sensing_params
from .smallmat import pauli_hamiltonian

KINDS = ("free", "single_drive", "double_drive")
AXES = {"x": 0, "y": 1, "z": 2}
STEPS_PER_PERIOD = 40
FREE_DT = 0.5e-9
NOISE_POINTS_PER_TAU = 50
BATCH = 16


def set_workers(n):
    """Set the number of compiled-loop threads; results are unaffected."""
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def default_dt(kind, drive):
    if kind == "free":
        return FREE_DT
    fastest = drive.omega1 if kind == "single_drive" else max(drive.omega1, drive.omega1_tilde)
    return 2 * np.pi / fastest / STEPS_PER_PERIOD


@dataclass(frozen=True)
class ProtocolSpec:
    """One protocol run: drive, noise, optional sensing signal, step and horizon.

    ``kind`` zeroes unused drive terms: ``single_drive`` drops the second
    drive and ``free`` drops both.  ``dt`` defaults to 1/40 of the fastest
    drive period.
    """

    kind: str
    drive: DriveConfig
    noise: NoiseConfig
    duration: float
    signal: SensingScheme = None
    dt: float = None
    signal_phase: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown protocol kind {self.kind!r}")
        if self.dt is None:
            object.__setattr__(self, "dt", default_dt(self.kind, self.drive))
        if not self.dt > 0:
            raise InvalidArgument("dt must be positive")
        if self.kind != "free":
            fastest = self.drive.omega1 if self.kind == "single_drive" else max(
                self.drive.omega1, self.drive.omega1_tilde)
            if self.dt > 2 * np.pi / fastest / 20 * (1 + 1e-12):
                raise InvalidArgument("dt must resolve the fastest drive with at least 20 steps")
        if not self.duration >= self.dt:
            raise InvalidArgument("duration must be at least one step")

    @property
    def omega1(self):
        return 0.0 if self.kind == "free" else self.drive.omega1

    @property
    def omega2(self):
        return self.drive.omega2 if self.kind == "double_drive" else 0.0

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    def oscillation_period(self):
        """Period of the slowest coherent oscillation seen by a fixed-axis fidelity."""
        if self.kind == "free":
            return None
        if self.kind == "single_drive":
            return 2 * np.pi / self.drive.omega1
        return 2 * np.pi / omega_e(self.drive)

    def signal_terms(self):
        """(g0, signal detuning in the first frame, phase) or zeros."""
        if self.signal is None or self.signal.g0 == 0:
            return 0.0, 0.0, 0.0
        omega_g = sensing_params(self.signal, self.drive)[0]
        return self.signal.g0, self.signal.omega0 - omega_g, self.signal_phase


def h_first_ip(t, spec, delta, eps1, eps2):
    """First-frame Hamiltonian at time ``t`` for given noise values (2x2, rad/s)."""
    hx = spec.omega1 * (1 + eps1)
    hy = 2.0 * spec.omega2 * (1 + eps2) * np.cos(spec.drive.omega1_tilde * t)
    g0, dsig, phi0 = spec.signal_terms()
    if g0:
        hx -= g0 * np.sin(dsig * t + phi0)
        hy -= g0 * np.cos(dsig * t + phi0)
    return pauli_hamiltonian(hx, hy, delta)


def _ratio(tau, dt):
    return max(1, int(tau / NOISE_POINTS_PER_TAU / dt))


@dataclass
class Realization:
    """Noise traces of one realization on integer multiples of ``dt``.

    ``delta`` is sampled every ``rd`` steps and the amplitude errors every
    ``re`` steps.
    """

    delta: np.ndarray
    rd: int
    eps1: np.ndarray
    eps2: np.ndarray
    re: int
    meta: dict = field(default_factory=dict)


def noise_layout(spec):
    """Return (rd, n_delta, re, n_eps) for a spec's noise grid."""
    n = spec.n_steps
    nz = spec.noise
    rd = _ratio(nz.delta.tau, spec.dt) if nz.delta.sigma > 0 else n + 1
    use_eps = nz.eps.sigma > 0 and spec.kind != "free"
    re = _ratio(nz.eps.tau, spec.dt) if use_eps else n + 1
    return rd, n // rd + 1, re, n // re + 1


def draw_realization(spec, index):
    """Noise traces for realization ``index`` derived from the spec's seed."""
    nz = spec.noise
    rd, nd, re, ne = noise_layout(spec)
    if nz.delta.sigma > 0:
        dl = make_ou_trace(nz.delta.with_dt(rd * spec.dt), nd, stream(nz.seed, index, ROLE_DELTA)).values
    else:
        dl = np.zeros(nd)
    if nz.eps.sigma > 0 and spec.kind != "free":
        e1, e2 = make_correlated_pair(nz.eps.with_dt(re * spec.dt), nz.c, ne,
                                      stream(nz.seed, index, ROLE_EPS1),
                                      stream(nz.seed, index, ROLE_EPS_IND))
        e1, e2 = e1.values, e2.values
    else:
        e1 = e2 = np.zeros(ne)
    return Realization(dl, rd, e1, e2, re)


def quiet_realization(spec):
    rd, nd, re, ne = noise_layout(spec)
    return Realization(np.zeros(nd), rd, np.zeros(ne), np.zeros(ne), re)


def _run_kernel(spec, steps, reals, signal=True):
    n_steps = int(steps[-1]) if len(steps) else 0
    b = len(reals)
    out = np.zeros((b, len(steps), 4))
    g0, dsig, phi0 = spec.signal_terms() if signal else (0.0, 0.0, 0.0)
    dl = np.ascontiguousarray(np.stack([r.delta for r in reals]))
    e1 = np.ascontiguousarray(np.stack([r.eps1 for r in reals]))
    e2 = np.ascontiguousarray(np.stack([r.eps2 for r in reals]))
    _kernels.propagate_batch(float(spec.omega1), float(spec.omega2), float(spec.drive.omega1_tilde),
                             float(spec.dt), n_steps, steps, dl, reals[0].rd, e1, e2, reals[0].re,
                             float(g0), float(dsig), float(phi0), out)
    return out


def propagate(spec, realization, t_end):
    """Unitary ``U_I(t_end)`` for one realization as a 2x2 complex array."""
    n = int(round(t_end / spec.dt))
    if n < 0:
        raise InvalidArgument("t_end must be non-negative")
    if n > 0 and ((n - 1) // realization.rd >= len(realization.delta)
                  or (n - 1) // realization.re >= len(realization.eps1)):
        raise InvalidArgument("noise traces do not cover the requested time")
    q = _run_kernel(spec, np.array([n], dtype=np.int64), [realization])[0, 0]
    return _kernels.quat_to_unitary(q)


def to_steps(spec, sample_times):
    """Round sample times onto the step grid; returns unique increasing step indices."""
    t = np.asarray(sample_times, dtype=float)
    if t.ndim != 1 or len(t) == 0:
        raise InvalidArgument("sample_times must be a non-empty 1-D sequence")
    if np.any(t < 0) or np.any(t > spec.duration * (1 + 1e-9) + spec.dt):
        raise InvalidArgument("sample times must lie within [0, duration]")
    steps = np.unique(np.round(t / spec.dt).astype(np.int64))
    return steps


def sample_grid(spec, n_points=400, burst=1, period=None, t_min=None):
    """Log-spaced anchor times, each optionally followed by a burst of samples.

    With ``burst > 1`` every anchor gets ``burst`` samples spread over one
    ``period`` so that oscillation envelopes can be measured anywhere on the
    log axis.
    """
    t_min = spec.dt if t_min is None else t_min
    span = period if (period is not None and burst > 1) else 0.0
    t_end = spec.duration - span
    if t_end <= t_min:
        t_end = spec.duration
        span = 0.0
    anchors = np.geomspace(t_min, t_end, n_points)
    if span > 0:
        offs = np.arange(burst) * span / burst
        anchors = (anchors[:, None] + offs[None, :]).ravel()
    t = np.concatenate([[0.0], anchors])
    return np.unique(np.round(t / spec.dt)) * spec.dt


def _frame_quats(spec, times):
    # U_II = exp(+i Omega1~ t sx / 2) U_I
    half = 0.5 * spec.drive.omega1_tilde * times
    f = np.zeros((len(times), 4))
    f[:, 0] = np.cos(half)
    f[:, 1] = -np.sin(half)
    return f


def _resolve_frame(spec, frame):
    if frame == "auto":
        return "first" if spec.kind == "free" else "second"
    if frame not in ("first", "second"):
        raise InvalidArgument(f"unknown frame {frame!r}")
    return frame


def _ensemble(spec, n_realizations, steps, reducer, frame="first"):
    """Ordered sum and sum of squares of ``reducer(quats)`` over realizations."""
    if n_realizations < 1:
        raise InvalidArgument("n_realizations must be at least 1")
    times = steps * spec.dt
    fq = _frame_quats(spec, times) if frame == "second" else None
    acc = acc2 = None
    for start in range(0, n_realizations, BATCH):
        idx = range(start, min(start + BATCH, n_realizations))
        reals = [draw_realization(spec, i) for i in idx]
        q = _run_kernel(spec, steps, reals)
        if fq is not None:
            q = _kernels.quat_mul(fq[None, :, :], q)
        vals = reducer(q)
        if acc is None:
            acc = np.zeros(vals.shape[1:])
            acc2 = np.zeros(vals.shape[1:])
        for row in vals:
            acc += row
            acc2 += row * row
    n = n_realizations
    mean = acc / n
    if n > 1:
        var = np.maximum(acc2 - n * mean * mean, 0.0) / (n - 1)
        se = np.sqrt(var / n)
    else:
        se = np.zeros_like(mean)
    return times, mean, se


def _meta(spec, frame, **extra):
    m = {"kind": spec.kind, "frame": frame, "dt": spec.dt, "seed": spec.noise.seed}
    m.update(extra)
    return m


def average_fidelity_curve(spec, n_realizations, sample_times, frame="auto"):
    """Initial-state averaged fidelity ``F = 1/2 + Tr(R)/6``.

    Averaging the fidelities of the three Bloch-axis initial states equals
    this trace form of the mean rotation.  ``frame`` selects the first
    rotating frame or the second one rotating at ``omega1_tilde`` about x
    ("auto": first for free evolution, second otherwise).
    """
    frame = _resolve_frame(spec, frame)
    steps = to_steps(spec, sample_times)

    def reducer(q):
        w, x, y, z = np.moveaxis(q, -1, 0)
        tr = 3 - 4 * (x * x + y * y + z * z)
        return 0.5 + tr / 6.0

    t, m, se = _ensemble(spec, n_realizations, steps, reducer, frame)
    return FidelityCurve(t, m, se, n_realizations, "avg_fidelity", _meta(spec, frame))


def state_fidelity_curve(spec, axis, n_realizations, sample_times, frame="auto"):
    """Fidelity ``(1 + R_kk)/2`` of the initial state polarized along ``axis``."""
    if axis not in AXES:
        raise InvalidArgument(f"axis must be one of x, y, z; got {axis!r}")
    frame = _resolve_frame(spec, frame)
    k = AXES[axis]
    steps = to_steps(spec, sample_times)

    def reducer(q):
        return 0.5 * (1 + _kernels.quat_to_rot(q)[..., k, k])

    t, m, se = _ensemble(spec, n_realizations, steps, reducer, frame)
    return FidelityCurve(t, m, se, n_realizations, f"fidelity_{axis}", _meta(spec, frame, axis=axis))


def dressed_axis(drive):
    """Unit Bloch vector of the second-frame effective field."""
    oe = omega_e(drive)
    return np.array([drive.detuning, drive.omega2, 0.0]) / oe


def sensing_curve(spec, n_realizations, sample_times=None, stroboscopic=None, n_points=400):
    """Population left in the signal-free evolved dressed state.

    The qubit starts along the second-frame effective field.  Each
    realization is propagated with and without the signal; the readout is
    ``|<psi_0(t)|psi_g(t)>|^2``, which oscillates at the effective signal
    Rabi frequency.  ``stroboscopic`` samples at multiples of ``2 pi/omega2``
    (``"omega2"``) or ``2 pi/omega1_tilde`` (``"omega1"``) up to ``duration``.
    """
    if spec.signal is None:
        raise InvalidArgument("sensing_curve needs a signal")
    if stroboscopic is not None:
        base = {"omega2": spec.drive.omega2, "omega1": spec.drive.omega1_tilde}.get(stroboscopic)
        if base is None:
            raise InvalidArgument("stroboscopic must be None, 'omega2' or 'omega1'")
        period = 2 * np.pi / base
        sample_times = np.arange(0, int(spec.duration / period) + 1) * period
    elif sample_times is None:
        sample_times = np.linspace(0, spec.duration, n_points)
    steps = to_steps(spec, sample_times)
    axis = dressed_axis(spec.drive)
    times = steps * spec.dt
    acc = acc2 = None
    for start in range(0, n_realizations, BATCH):
        reals = [draw_realization(spec, i) for i in range(start, min(start + BATCH, n_realizations))]
        qs = _run_kernel(spec, steps, reals, signal=True)
        q0 = _run_kernel(spec, steps, reals, signal=False)
        q0c = q0 * np.array([1.0, -1.0, -1.0, -1.0])
        rel = _kernels.quat_to_rot(_kernels.quat_mul(q0c, qs))
        vals = 0.5 * (1 + np.einsum("i,brij,j->br", axis, rel, axis))
        if acc is None:
            acc = np.zeros(len(steps))
            acc2 = np.zeros(len(steps))
        for row in vals:
            acc += row
            acc2 += row * row
    n = n_realizations
    mean = acc / n
    se = np.sqrt(np.maximum(acc2 - n * mean * mean, 0) / (n - 1) / n) if n > 1 else np.zeros_like(mean)
    return FidelityCurve(times, mean, se, n, "population_0",
                         _meta(spec, "tracked", readout="overlap with signal-free state",
                               stroboscopic=stroboscopic))


def _h2_pulse(omega1, omega2, omega1_tilde, eps):
    return pauli_hamiltonian(omega1 * (1 + eps) - omega1_tilde, omega2 * (1 + eps), 0.0)


PULSE_KINDS = ("conventional", "sdd", "cdd")


def pulse_settings(kind, omega1):
    """(omega2, omega1_tilde, duration) of the commensurate pi-pulse variants."""
    T = np.pi / omega1
    if kind == "conventional":
        return 0.0, omega1, T
    if kind == "sdd":
        return omega1 / 4.0, omega1, 4.0 * T
    if kind == "cdd":
        o2 = omega1 / np.sqrt(15.0)
        return o2, omega1 + o2 * o2 / omega1, 3.75 * T
    raise InvalidArgument(f"unknown pulse kind {kind!r}")


def pulse_fidelity(kind, omega1, eps):
    """Fidelity of a population-inverting operation under a static amplitude error.

    ``conventional`` is a bare pi pulse.  ``sdd`` and ``cdd`` propagate the
    second-frame Hamiltonian with both drive amplitudes scaled by ``1+eps``;
    their durations make both the second-frame rotation and the frame
    rotation complete, so the ideal map is a pi rotation.  The fidelity is
    the overlap with the ``eps = 0`` output state starting from |0>.
    """
    if abs(eps) > 0.5:
        raise InvalidArgument("|eps| must not exceed 0.5")
    from .smallmat import expm_i, SIGMA_X

    o2, wt, T = pulse_settings(kind, omega1)
    psi0 = np.array([1.0, 0.0], dtype=complex)
    if kind == "conventional":
        h = 0.5 * omega1 * (1 + eps) * SIGMA_X
        h0 = 0.5 * omega1 * SIGMA_X
    else:
        h = _h2_pulse(omega1, o2, wt, eps)
        h0 = _h2_pulse(omega1, o2, wt, 0.0)
    ideal = expm_i(h0, T) @ psi0
    out = expm_i(h, T) @ psi0
    return float(abs(np.vdot(ideal, out)) ** 2)


def with_noise(spec, **changes):
    """Copy of ``spec`` with fields of its noise model replaced."""
    return replace(spec, noise=replace(spec.noise, **changes))


PROTOCOLS = ("free", "single", "sdd", "cdd")


def build_protocol(name, omega1, omega2, noise, duration, cdd_policy="correlated", shift_c=1.0,
                   omega1_tilde=None):
    """ProtocolSpec for one of the named memory protocols."""
    if name == "free":
        drive = DriveConfig.with_policy(omega1, omega2, "resonant")
        return ProtocolSpec("free", drive, noise, duration)
    if name == "single":
        return ProtocolSpec("single_drive", DriveConfig.with_policy(omega1, omega2, "resonant"), noise, duration)
    if name == "sdd":
        return ProtocolSpec("double_drive", DriveConfig.with_policy(omega1, omega2, "resonant"), noise, duration)
    if name == "cdd":
        drive = DriveConfig.with_policy(omega1, omega2, cdd_policy, shift_c, omega1_tilde)
        return ProtocolSpec("double_drive", drive, noise, duration)
    raise InvalidArgument(f"unknown protocol {name!r}")


def memory_curve(name, spec, n_realizations, n_points=400, burst=32):
    """Curve and coherence estimate used to quote a protocol's coherence time.

    Free evolution uses the average fidelity.  A single drive uses the
    fidelity of the y state in the second frame, and the double drives use
    the fidelity of the x state, which are the fast-decaying states of each
    protocol.
    """
    period = spec.oscillation_period()
    if name == "free":
        times = sample_grid(spec, n_points)
        curve = average_fidelity_curve(spec, n_realizations, times, frame="first")
        return curve, coherence_time(curve, AVG_FLOOR)
    if name == "single":
        times = sample_grid(spec, n_points, burst, period)
        curve = state_fidelity_curve(spec, "y", n_realizations, times, frame="second")
        return curve, coherence_time(curve, AXIS_FLOOR, period)
    times = sample_grid(spec, n_points, burst, period)
    curve = state_fidelity_curve(spec, "x", n_realizations, times, frame="second")
    return curve, coherence_time(curve, AXIS_FLOOR, period)


def coherence_vs_correlation_time(omega1, omega2, noise, tau_list, delta_list, n_realizations,
                                  durations, cdd_policy="correlated_bs", n_points=400, burst=32):
    """Coherence times of single, standard and correlated double drive per noise spectrum.

    ``tau_list`` and ``delta_list`` pair amplitude-noise correlation times
    with relative amplitude errors.  ``durations`` maps protocol name to
    simulated horizon.  Returns one dict per (tau, protocol).
    """
    tau_list, delta_list = list(tau_list), list(delta_list)
    if len(tau_list) != len(delta_list):
        raise InvalidArgument("tau_list and delta_list must have equal length")
    rows = []
    for tau, sig in zip(tau_list, delta_list):
        nz = replace(noise, eps=replace(noise.eps, tau=tau, sigma=sig))
        single_t2 = None
        for name in ("single", "sdd", "cdd"):
            spec = build_protocol(name, omega1, omega2, nz, durations[name], cdd_policy)
            curve, res = memory_curve(name, spec, n_realizations, n_points, burst)
            if name == "single":
                single_t2 = res.t2
            rows.append({"tau_omega": tau, "delta_omega": sig, "protocol": name, "t2": res.t2,
                         "beta": res.fit.beta, "method": res.method, "ratio": res.t2 / single_t2,
                         "curve": curve, "result": res})
    return rows
