"""Small dense complex operators: Pauli algebra, 2x2 and 3x3 exponentials.

Hamiltonians are stored in angular-frequency units (rad/s) and the
exponential convention is ``expm_i(H, dt) = exp(-i H dt)``.  Global
phases are kept as they come out of the formulas.
"""

import numpy as np

from .errors import ContractViolation, InvalidArgument

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
DENSITY_TOL = 1e-10


def _as_square(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 3):
        raise InvalidArgument(f"expected a 2x2 or 3x3 operator, got shape {m.shape}")
    return m


def pauli_hamiltonian(hx, hy, hz):
    """Return ``(hx*sx + hy*sy + hz*sz) / 2`` as a 2x2 complex array."""
    h = np.array([hx, hy, hz], dtype=float)
    if not np.all(np.isfinite(h)):
        raise InvalidArgument("Pauli coefficients must be finite")
    return 0.5 * (h[0] * SIGMA_X + h[1] * SIGMA_Y + h[2] * SIGMA_Z)


def pauli_components(m):
    """Decompose a 2x2 operator as ``a0*I + a.sigma`` and return (a0, ax, ay, az)."""
    m = _as_square(m)
    if m.shape != (2, 2):
        raise InvalidArgument("Pauli decomposition needs a 2x2 operator")
    return np.array([np.trace(p @ m) / 2 for p in (SIGMA_0,) + PAULI])


def is_hermitian(m, tol=HERMITIAN_TOL):
    m = _as_square(m)
    scale = max(np.max(np.abs(m)), 1.0e-300)
    return bool(np.max(np.abs(m - m.conj().T)) < tol * scale)


def is_unitary(u, tol=UNITARY_TOL):
    u = _as_square(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) < tol)


def is_density(rho, tol=DENSITY_TOL):
    rho = _as_square(rho)
    if abs(np.trace(rho) - 1) >= tol:
        return False
    if np.max(np.abs(rho - rho.conj().T)) >= tol:
        return False
    return bool(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) >= -tol)


def expm_i(H, dt):
    """Return ``exp(-i H dt)`` for a Hermitian 2x2 or 3x3 operator.

    The 2x2 case uses the closed form
    ``exp(-i(a0 + a.sigma)dt) = e^{-i a0 dt}(cos|a|dt - i sin|a|dt n.sigma)``;
    the 3x3 case goes through a Hermitian eigendecomposition.
    """
    H = _as_square(H)
    if not is_hermitian(H):
        raise ContractViolation("expm_i requires a Hermitian operator")
    dt = float(dt)
    if H.shape == (2, 2):
        a0, ax, ay, az = pauli_components(H).real
        norm = np.sqrt(ax * ax + ay * ay + az * az)
        theta = norm * dt
        # sin(theta)/norm, written to stay finite when norm -> 0
        s = dt * np.sinc(theta / np.pi)
        u = np.cos(theta) * SIGMA_0 - 1j * s * (ax * SIGMA_X + ay * SIGMA_Y + az * SIGMA_Z)
        return np.exp(-1j * a0 * dt) * u
    w, v = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def bloch_density(r):
    """Qubit density matrix ``(I + r.sigma)/2`` for a Bloch vector r."""
    r = np.asarray(r, dtype=float)
    return 0.5 * (SIGMA_0 + r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z)


def bloch_vector(rho):
    rho = _as_square(rho)
    return np.array([np.trace(rho @ p).real for p in PAULI])
