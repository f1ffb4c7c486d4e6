"""Compiled inner loop of the Monte Carlo engine and quaternion helpers.

SU(2) elements are carried as unit quaternions ``(q0, q1, q2, q3)`` with
``U = q0*I - i*(q1*sx + q2*sy + q3*sz)``.
"""

import numba
import numpy as np

GAUSS_A = 0.5 - np.sqrt(3.0) / 6.0
GAUSS_B = 0.5 + np.sqrt(3.0) / 6.0


@numba.njit(cache=True)
def _propagate_one(o1, o2, om, dt, nsteps, samp, dl, rd, e1, e2, re,
                   g0, dsig, phi0, out):
    comm = np.sqrt(3.0) * dt * dt / 24.0
    q0 = 1.0
    q1 = 0.0
    q2 = 0.0
    q3 = 0.0
    k = 0
    ns = samp.shape[0]
    while k < ns and samp[k] == 0:
        out[k, 0] = 1.0
        out[k, 1] = 0.0
        out[k, 2] = 0.0
        out[k, 3] = 0.0
        k += 1
    for n in range(nsteps):
        if k >= ns:
            break
        j = n // re
        hx = o1 * (1.0 + e1[j])
        hz = dl[n // rd]
        amp2 = 2.0 * o2 * (1.0 + e2[j])
        # fourth-order Magnus step from the two Gauss points of the interval
        ta = (n + GAUSS_A) * dt
        tb = (n + GAUSS_B) * dt
        xa = hx
        xb = hx
        ya = amp2 * np.cos(om * ta)
        yb = amp2 * np.cos(om * tb)
        if g0 != 0.0:
            pa = dsig * ta + phi0
            pb = dsig * tb + phi0
            xa -= g0 * np.sin(pa)
            xb -= g0 * np.sin(pb)
            ya -= g0 * np.cos(pa)
            yb -= g0 * np.cos(pb)
        # v = dt/4 (h_a + h_b) + sqrt(3) dt^2/24 (h_b x h_a); U = exp(-i v.sigma)
        v1 = 0.25 * dt * (xa + xb) + comm * (yb * hz - hz * ya)
        v2 = 0.25 * dt * (ya + yb) + comm * (hz * xa - xb * hz)
        v3 = 0.5 * dt * hz + comm * (xb * ya - yb * xa)
        th = np.sqrt(v1 * v1 + v2 * v2 + v3 * v3)
        if th > 0.0:
            c = np.cos(th)
            s = np.sin(th) / th
            b1 = s * v1
            b2 = s * v2
            b3 = s * v3
            p0 = c * q0 - b1 * q1 - b2 * q2 - b3 * q3
            p1 = c * q1 + q0 * b1 + b2 * q3 - b3 * q2
            p2 = c * q2 + q0 * b2 + b3 * q1 - b1 * q3
            p3 = c * q3 + q0 * b3 + b1 * q2 - b2 * q1
            q0 = p0
            q1 = p1
            q2 = p2
            q3 = p3
        while k < ns and samp[k] == n + 1:
            out[k, 0] = q0
            out[k, 1] = q1
            out[k, 2] = q2
            out[k, 3] = q3
            k += 1


@numba.njit(cache=True, parallel=True)
def propagate_batch(o1, o2, om, dt, nsteps, samp, dl, rd, e1, e2, re,
                    g0, dsig, phi0, out):
    """Propagate a batch of realizations; ``out`` has shape (batch, samples, 4).

    Each realization writes only its own slice, so the result does not
    depend on how the loop is split across threads.
    """
    for r in numba.prange(out.shape[0]):
        _propagate_one(o1, o2, om, dt, nsteps, samp, dl[r], rd, e1[r], e2[r], re,
                       g0, dsig, phi0, out[r])


def quat_to_rot(q):
    """Rotation matrices for quaternions of shape (..., 4)."""
    w, x, y, z = np.moveaxis(np.asarray(q), -1, 0)
    r = np.empty(w.shape + (3, 3))
    r[..., 0, 0] = 1 - 2 * (y * y + z * z)
    r[..., 0, 1] = 2 * (x * y - w * z)
    r[..., 0, 2] = 2 * (x * z + w * y)
    r[..., 1, 0] = 2 * (x * y + w * z)
    r[..., 1, 1] = 1 - 2 * (x * x + z * z)
    r[..., 1, 2] = 2 * (y * z - w * x)
    r[..., 2, 0] = 2 * (x * z - w * y)
    r[..., 2, 1] = 2 * (y * z + w * x)
    r[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return r


def quat_mul(a, b):
    """Product of quaternions representing ``U_a @ U_b`` (broadcasting)."""
    a = np.asarray(a)
    b = np.asarray(b)
    a0, av = a[..., 0], a[..., 1:]
    b0, bv = b[..., 0], b[..., 1:]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a0 * b0 - np.sum(av * bv, axis=-1)
    out[..., 1:] = a0[..., None] * bv + b0[..., None] * av + np.cross(av, bv)
    return out


def quat_to_unitary(q):
    q = np.asarray(q)
    return np.array([[q[0] - 1j * q[3], -1j * q[1] - q[2]],
                     [-1j * q[1] + q[2], q[0] + 1j * q[3]]])
