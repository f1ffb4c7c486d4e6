"""Three-level relaxation model of a driven spin-1 under the double drive.

Basis order is (|-1>, |0>, |+1>).  The drive couples |0> and |-1>, which
form the qubit; qubit |0> maps to m=0 and qubit |1> to m=-1.  Relaxation
enters through single-quantum jumps (rate gamma1), double-quantum jumps
(gamma2) and pure dephasing through S_z (gamma_phi).
"""

from dataclasses import dataclass

import numpy as np

from .curves import FidelityCurve
from .errors import ContractViolation, InvalidArgument, NoPositiveSolution
from .protocol import DriveConfig

M1, M0, P1 = 0, 1, 2  # basis indices of m = -1, 0, +1
QUBIT_TO_SPIN = (M0, M1)
STEPS_PER_PERIOD = 400  # well inside the 1/40 bound; the maps are built once per period


def _ket_bra(i, j):
    m = np.zeros((3, 3), dtype=complex)
    m[i, j] = 1.0
    return m


def jump_operators():
    """L1..L7: |-1><0|, |0><-1|, |0><1|, |1><0|, |-1><1|, |1><-1|, S_z."""
    return np.array([
        _ket_bra(M1, M0),
        _ket_bra(M0, M1),
        _ket_bra(M0, P1),
        _ket_bra(P1, M0),
        _ket_bra(M1, P1),
        _ket_bra(P1, M1),
        np.diag([-1.0, 0.0, 1.0]).astype(complex),
    ])


@dataclass(frozen=True)
class LindbladModel:
    gamma1: float
    gamma2: float
    gamma_phi: float
    drive: DriveConfig = None

    def __post_init__(self):
        if min(self.gamma1, self.gamma2, self.gamma_phi) < 0:
            raise InvalidArgument("relaxation rates must be non-negative")

    @classmethod
    def from_t1(cls, t1_0, gamma2_ratio=1.87, gamma_phi=360.0, drive=None):
        """Rates from the undriven population lifetime ``T1 = 1/(3 gamma1)``."""
        if not t1_0 > 0:
            raise InvalidArgument("T1 must be positive")
        g1 = 1.0 / (3.0 * t1_0)
        return cls(g1, gamma2_ratio * g1, gamma_phi, drive)

    @property
    def rates(self):
        g1, g2 = self.gamma1, self.gamma2
        return np.array([g1, g1, g1, g1, g2, g2, self.gamma_phi])


def lindblad_rhs(rho, H, model):
    """``-i[H, rho] + sum_k Gamma_k (L rho L^+ - {L^+ L, rho}/2)``."""
    rho = np.asarray(rho, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if rho.shape != (3, 3) or H.shape != (3, 3):
        raise InvalidArgument("lindblad_rhs works on 3x3 operators")
    out = -1j * (H @ rho - rho @ H)
    for L, g in zip(jump_operators(), model.rates):
        if g:
            LdL = L.conj().T @ L
            out += g * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def embed_qubit(op2):
    """Place a qubit operator on the (|0>, |-1>) block of the spin-1 space."""
    op2 = np.asarray(op2, dtype=complex)
    out = np.zeros((3, 3), dtype=complex)
    for a, i in enumerate(QUBIT_TO_SPIN):
        for b, j in enumerate(QUBIT_TO_SPIN):
            out[i, j] = op2[a, b]
    return out


def qubit_block(rho3):
    """Qubit-subspace block of a spin-1 operator (not renormalized)."""
    idx = np.array(QUBIT_TO_SPIN)
    return np.asarray(rho3)[np.ix_(idx, idx)]


def _check_density(rho, tol=1e-8):
    if abs(np.trace(rho) - 1) > tol or np.max(np.abs(rho - rho.conj().T)) > tol:
        return False
    return np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) > -1e-6


def _superop(H, rates):
    # row-major vec: vec(A rho B) = kron(A, B.T) vec(rho)
    eye = np.eye(3)
    out = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for L, g in zip(jump_operators(), rates):
        if g:
            LdL = L.conj().T @ L
            out += g * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    return out


def _drive_parts(drive):
    """Static and cos(omega1_tilde t) parts of the embedded first-frame drive."""
    if drive is None:
        return np.zeros((3, 3), complex), np.zeros((3, 3), complex)
    sx = np.array([[0, 1], [1, 0]], complex)
    sy = np.array([[0, -1j], [1j, 0]], complex)
    return embed_qubit(0.5 * drive.omega1 * sx), embed_qubit(drive.omega2 * sy)


def _rk4_step_maps(rates, drive, dt, n_maps):
    """Linear RK4 update matrices for the first ``n_maps`` steps of length ``dt``."""
    h0, h1 = _drive_parts(drive)
    a = _superop(h0, rates)
    b = _superop(h1, np.zeros_like(rates))
    om = 0.0 if drive is None else drive.omega1_tilde
    eye = np.eye(9)
    maps = np.empty((n_maps, 9, 9), complex)
    for j in range(n_maps):
        t = j * dt
        l1 = a + np.cos(om * t) * b
        l2 = a + np.cos(om * (t + 0.5 * dt)) * b
        l4 = a + np.cos(om * (t + dt)) * b
        k1 = l1
        k2 = l2 @ (eye + 0.5 * dt * k1)
        k3 = l2 @ (eye + 0.5 * dt * k2)
        k4 = l4 @ (eye + dt * k3)
        maps[j] = eye + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return maps


def _integrate(maps, rho0, steps):
    """Apply the periodic sequence of step maps and record states at ``steps``."""
    period = len(maps)
    prefix = [np.eye(9, dtype=complex)]
    for m in maps:
        prefix.append(m @ prefix[-1])
    cycle = prefix[-1]
    out = np.empty((len(steps), 9), complex)
    vec = rho0.reshape(9).astype(complex)
    done = 0
    for k, s in enumerate(steps):
        n_cycles = int(s) // period
        while done < n_cycles:
            vec = cycle @ vec
            done += 1
        out[k] = prefix[int(s) % period] @ vec
    return out.reshape(len(steps), 3, 3)


def evolve_lindblad(model, initial, times, drive=None, dt=None, observable="coherence"):
    """Integrate the master equation with the noiseless first-frame drive.

    Fixed-step RK4 is used.  The step divides the modulation period
    ``2 pi/omega1_tilde`` into an integer number of steps no longer than
    1/400 of the fastest drive period, so the RK4 update maps repeat every
    period and are composed once per period.

    A noiseless copy of the state is integrated alongside.  The default
    observable is ``Tr(rho (2 rho_ideal - P))`` with ``P`` the
    qubit-subspace projector.  For a pure qubit state this is the
    Bloch-vector component of the dissipative state along the ideal one,
    starting at 1 and decaying to 0.  ``observable="population_0"``
    returns the m=0 population instead.

    Parameters
    ----------
    model : LindbladModel
    initial : (3, 3) or (2, 2) array
        Initial density matrix; a 2x2 input is embedded in the qubit block.
    times : sequence of float
        Output times in seconds.
    drive : DriveConfig, optional
        Overrides ``model.drive``.  ``None`` on both means no drive.
    dt : float, optional
        Step size without drive; defaults to a thousandth of the fastest
        relaxation time.  Ignored when a drive is present.

    Returns
    -------
    (FidelityCurve, ndarray)
        The observable curve and the density matrices at ``times``.
    """
    drive = drive if drive is not None else model.drive
    rho0 = np.asarray(initial, dtype=complex)
    if rho0.shape == (2, 2):
        rho0 = embed_qubit(rho0)
    if rho0.shape != (3, 3) or not _check_density(rho0):
        raise InvalidArgument("initial state must be a valid density matrix")
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0) or t[0] < 0:
        raise InvalidArgument("times must be non-negative and strictly increasing")
    if drive is None:
        fastest = max(model.rates.max(), 1.0 / max(t[-1], 1e-12))
        dt = 1e-3 / fastest if dt is None else float(dt)
        n_maps = 1
    else:
        mod_period = 2 * np.pi / drive.omega1_tilde
        n_maps = int(np.ceil(STEPS_PER_PERIOD * max(drive.omega1, drive.omega1_tilde) / drive.omega1_tilde))
        dt = mod_period / n_maps
    steps = np.round(t / dt).astype(np.int64)
    maps = _rk4_step_maps(model.rates, drive, dt, n_maps)
    ideal_maps = _rk4_step_maps(np.zeros(7), drive, dt, n_maps)
    rho_out = _integrate(maps, rho0, steps)
    ideal_out = _integrate(ideal_maps, rho0, steps)
    for k, r in enumerate(rho_out):
        if not _check_density(r):
            raise ContractViolation(
                f"density matrix left the physical set at t={steps[k] * dt:.3e} s; "
                f"reduce the step below {dt:.3e} s")
    if observable == "coherence":
        proj = np.diag([1.0, 1.0, 0.0]).astype(complex)
        vals = np.einsum("kij,kji->k", rho_out, 2 * ideal_out - proj).real
    elif observable == "population_0":
        vals = rho_out[:, M0, M0].real
    else:
        raise InvalidArgument(f"unknown observable {observable!r}")
    meta = {"observable": observable, "dt": dt,
            "convention": "projection of the qubit Bloch vector on the noiseless trajectory"}
    curve = FidelityCurve(steps * dt, vals, None, 1, observable, meta)
    return curve, rho_out


def one_over_e_time(curve):
    """Linear-interpolated 1/e crossing of a curve normalized to its first value."""
    v = curve.values / curve.values[0]
    below = np.flatnonzero(v < np.exp(-1))
    if len(below) == 0:
        return float("inf")
    k = int(below[0])
    t0, t1, v0, v1 = curve.times[k - 1], curve.times[k], v[k - 1], v[k]
    return float(t0 + (v0 - np.exp(-1)) * (t1 - t0) / (v0 - v1))


def relaxation_free_time(t_total, t_limit):
    """Solve ``1/T_total = 1/T_limit + 1/T_phi`` for ``T_phi``."""
    if not (t_total > 0 and t_limit > 0):
        raise InvalidArgument("times must be positive")
    if t_total >= t_limit:
        raise NoPositiveSolution("total coherence time must be shorter than the relaxation limit")
    return 1.0 / (1.0 / t_total - 1.0 / t_limit)
