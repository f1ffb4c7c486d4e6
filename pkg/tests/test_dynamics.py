import os
import subprocess
import sys
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrdd import _kernels, dynamics
from corrdd.analysis import AXIS_FLOOR, coherence_time
from corrdd.errors import InvalidArgument
from corrdd.noise import NoiseConfig
from corrdd.protocol import DriveConfig, SensingScheme
from corrdd.smallmat import SIGMA_X, SIGMA_Y, SIGMA_Z, is_unitary, pauli_components

TWO_PI = 2 * np.pi
O1 = TWO_PI * 2e6
O2 = 0.1 * O1


def note4_noise(seed=3, **kw):
    args = dict(t2_star=3.6e-6, tau_delta=25e-6, tau_omega=500e-6, delta_omega=0.005, c=1.0, seed=seed)
    args.update(kw)
    return NoiseConfig.from_t2star(**args)


def cdd_drive():
    return DriveConfig.with_policy(O1, O2, "correlated", 1.0)


def test_h_first_ip_structure():
    spec = dynamics.ProtocolSpec("double_drive", cdd_drive(), NoiseConfig.quiet(), 1e-6)
    h = pauli_components(dynamics.h_first_ip(0.0, spec, 0.0, 0.0, 0.0)).real
    assert h[2] == pytest.approx(O2)  # sy coefficient carries the full omega2
    assert h[1] == pytest.approx(O1 / 2)
    t = np.pi / spec.drive.omega1_tilde
    h = pauli_components(dynamics.h_first_ip(t, spec, 0.0, 0.0, 0.02)).real
    assert h[2] == pytest.approx(-O2 * 1.02)
    free = dynamics.ProtocolSpec("free", cdd_drive(), NoiseConfig.quiet(), 1e-6)
    assert not np.any(dynamics.h_first_ip(0.3e-6, free, 0.0, 0.1, 0.1))
    h = pauli_components(dynamics.h_first_ip(0.0, free, 5.0, 0.0, 0.0)).real
    assert h[3] == pytest.approx(2.5)


def single_spec(duration, dt=None):
    drive = DriveConfig.with_policy(O1, O2, "resonant")
    return dynamics.ProtocolSpec("single_drive", drive, NoiseConfig.quiet(), duration, dt=dt)


def test_pi_pulse():
    spec = single_spec(1e-6)
    u = dynamics.propagate(spec, dynamics.quiet_realization(spec), np.pi / O1)
    assert abs(u[1, 0]) ** 2 == pytest.approx(1.0, abs=1e-8)


def test_rabi_oscillation():
    period = TWO_PI / O1
    spec = single_spec(10 * period)
    real = dynamics.quiet_realization(spec)
    err = 0.0
    for t in np.arange(0, spec.n_steps + 1, 7) * spec.dt:
        u = dynamics.propagate(spec, real, t)
        err = max(err, abs(abs(u[0, 0]) ** 2 - np.cos(O1 * t / 2) ** 2))
    assert err < 1e-6


def test_step_halving_converges():
    drive = cdd_drive()
    period = TWO_PI / drive.omega1_tilde
    dt = period / 40
    t_end = 2 * period
    results = []
    for step in (dt, dt / 2):
        spec = dynamics.ProtocolSpec("double_drive", drive, NoiseConfig.quiet(), t_end, dt=step)
        results.append(dynamics.propagate(spec, dynamics.quiet_realization(spec), t_end))
    assert np.max(np.abs(results[0] - results[1])) < 1e-6


def test_propagator_matches_dense_product():
    # the compiled step equals exp of the two-point Magnus generator
    drive = cdd_drive()
    spec = dynamics.ProtocolSpec("double_drive", drive, note4_noise(), 2e-6)
    real = dynamics.draw_realization(spec, 0)
    from corrdd.smallmat import expm_i
    u = np.eye(2, dtype=complex)
    dt = spec.dt
    a, b = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
    for n in range(spec.n_steps):
        dl = real.delta[n // real.rd]
        e1, e2 = real.eps1[n // real.re], real.eps2[n // real.re]
        ha = dynamics.h_first_ip((n + a) * dt, spec, dl, e1, e2)
        hb = dynamics.h_first_ip((n + b) * dt, spec, dl, e1, e2)
        gen = 0.5 * (ha + hb) - 1j * np.sqrt(3) * dt / 12 * (hb @ ha - ha @ hb)
        u = expm_i(0.5 * (gen + gen.conj().T), dt) @ u
    v = dynamics.propagate(spec, real, spec.n_steps * dt)
    assert np.allclose(u, v, atol=1e-10)


def test_propagate_is_unitary():
    spec = dynamics.ProtocolSpec("double_drive", cdd_drive(), note4_noise(), 50e-6)
    for i in range(3):
        assert is_unitary(dynamics.propagate(spec, dynamics.draw_realization(spec, i), 50e-6), tol=1e-9)


def test_propagate_rejects_short_trace():
    spec = dynamics.ProtocolSpec("double_drive", cdd_drive(), note4_noise(), 5e-6)
    real = dynamics.draw_realization(spec, 0)
    with pytest.raises(InvalidArgument):
        dynamics.propagate(spec, real, 50e-3)


def test_dt_must_resolve_drive():
    with pytest.raises(InvalidArgument):
        dynamics.ProtocolSpec("double_drive", cdd_drive(), NoiseConfig.quiet(), 1e-6, dt=1e-7)
    with pytest.raises(InvalidArgument):
        dynamics.ProtocolSpec("double_drive", cdd_drive(), NoiseConfig.quiet(), 1e-12)
    with pytest.raises(InvalidArgument):
        dynamics.ProtocolSpec("triple", cdd_drive(), NoiseConfig.quiet(), 1e-6)


def test_default_dt_rule():
    d = cdd_drive()
    assert dynamics.default_dt("double_drive", d) == pytest.approx(TWO_PI / d.omega1_tilde / 40)
    assert dynamics.default_dt("single_drive", d) == pytest.approx(TWO_PI / O1 / 40)
    assert dynamics.default_dt("free", d) == 0.5e-9


def test_fidelity_starts_at_one():
    spec = dynamics.ProtocolSpec("double_drive", cdd_drive(), note4_noise(), 20e-6)
    times = dynamics.sample_grid(spec, 20)
    assert dynamics.average_fidelity_curve(spec, 5, times).values[0] == 1.0
    for axis in "xyz":
        assert dynamics.state_fidelity_curve(spec, axis, 5, times).values[0] == 1.0


def test_commuting_case_matches_phase_average():
    # pure dephasing: F = (2 + cos phi)/3 per realization, phi the accumulated detuning phase
    drive = DriveConfig.with_policy(O1, O2, "resonant")
    spec = dynamics.ProtocolSpec("free", drive, note4_noise(seed=11), 10e-6)
    times = dynamics.sample_grid(spec, 30)
    n = 40
    curve = dynamics.average_fidelity_curve(spec, n, times)
    steps = np.round(curve.times / spec.dt).astype(int)
    ref = np.zeros(len(steps))
    for i in range(n):
        r = dynamics.draw_realization(spec, i)
        per_step = r.delta[np.arange(spec.n_steps) // r.rd] * spec.dt
        phi = np.concatenate([[0.0], np.cumsum(per_step)])[steps]
        ref += (2 + np.cos(phi)) / 3
    ref /= n
    assert np.allclose(curve.values, ref, atol=1e-9)


def test_free_evolution_floor():
    drive = DriveConfig.with_policy(O1, O2, "resonant")
    spec = dynamics.ProtocolSpec("free", drive, note4_noise(seed=5), 40e-6)
    times = np.linspace(25e-6, 40e-6, 16)
    curve = dynamics.average_fidelity_curve(spec, 500, times)
    assert np.mean(curve.values) == pytest.approx(2 / 3, abs=0.02)


def test_second_frame_matches_explicit_rotation():
    drive = cdd_drive()
    spec = dynamics.ProtocolSpec("double_drive", drive, note4_noise(), 5e-6)
    t = 3e-6
    times = np.array([0.0, t])
    c2 = dynamics.state_fidelity_curve(spec, "x", 1, times, frame="second")
    from corrdd.smallmat import expm_i
    step_t = np.round(t / spec.dt) * spec.dt
    u1 = dynamics.propagate(spec, dynamics.draw_realization(spec, 0), step_t)
    u2 = expm_i(-0.5 * drive.omega1_tilde * SIGMA_X, step_t) @ u1
    rho = 0.5 * (np.eye(2) + SIGMA_X)
    f = np.real(np.trace(u2 @ rho @ u2.conj().T @ rho))
    assert c2.values[1] == pytest.approx(f, abs=1e-10)


def test_ensemble_is_ordered_mean():
    spec = dynamics.ProtocolSpec("double_drive", cdd_drive(), note4_noise(), 30e-6)
    times = dynamics.sample_grid(spec, 10)
    n = dynamics.BATCH + 3
    curve = dynamics.state_fidelity_curve(spec, "y", n, times, frame="first")
    steps = dynamics.to_steps(spec, times)
    vals = []
    for i in range(n):
        q = dynamics._run_kernel(spec, steps, [dynamics.draw_realization(spec, i)])[0]
        vals.append(0.5 * (1 + _kernels.quat_to_rot(q)[:, 1, 1]))
    vals = np.array(vals)
    assert np.allclose(curve.values, vals.mean(axis=0), atol=1e-13)
    assert np.allclose(curve.stderr, vals.std(axis=0, ddof=1) / np.sqrt(n), atol=1e-12)


def test_realizations_do_not_depend_on_count():
    spec = dynamics.ProtocolSpec("double_drive", cdd_drive(), note4_noise(), 30e-6)
    times = dynamics.sample_grid(spec, 10)
    a = dynamics.average_fidelity_curve(spec, 1, times)
    b = dynamics.average_fidelity_curve(dynamics.with_noise(spec, seed=spec.noise.seed), 1, times)
    assert np.array_equal(a.values, b.values)
    r1 = dynamics.draw_realization(spec, 7)
    r2 = dynamics.draw_realization(spec, 7)
    assert np.array_equal(r1.eps1, r2.eps1) and np.array_equal(r1.delta, r2.delta)


WORKER_SCRIPT = """
import numpy as np, sys
from corrdd import dynamics
from corrdd.noise import NoiseConfig
from corrdd.protocol import DriveConfig
dynamics.set_workers(int(sys.argv[1]))
o1 = 2 * np.pi * 2e6
d = DriveConfig.with_policy(o1, 0.1 * o1, "correlated", 1.0)
nz = NoiseConfig.from_t2star(3.6e-6, 25e-6, 500e-6, 0.005, 1.0, 9)
spec = dynamics.ProtocolSpec("double_drive", d, nz, 40e-6)
c = dynamics.average_fidelity_curve(spec, 37, dynamics.sample_grid(spec, 25))
print(",".join(repr(float(v)) for v in np.concatenate([c.values, c.stderr])))
"""


def test_worker_count_does_not_change_results():
    env = dict(os.environ, NUMBA_NUM_THREADS="4")
    out = [subprocess.run([sys.executable, "-c", WORKER_SCRIPT, str(w)], env=env, capture_output=True,
                          text=True, check=True).stdout for w in (1, 4)]
    assert out[0] == out[1] and out[0].strip()


def test_halving_dt_keeps_t2_within_error():
    noise = note4_noise(seed=21, tau_omega=5e-6, delta_omega=0.0085)
    drive = DriveConfig.with_policy(O1, O2, "resonant")
    t2 = []
    for f in (1, 2):
        spec = dynamics.ProtocolSpec("single_drive", drive, noise, 80e-6,
                                     dt=dynamics.default_dt("single_drive", drive) / f)
        _, res = dynamics.memory_curve("single", spec, 60, n_points=120, burst=16)
        t2.append(res.t2)
    assert t2[1] == pytest.approx(t2[0], rel=0.05)


def test_sample_grid():
    spec = dynamics.ProtocolSpec("double_drive", cdd_drive(), NoiseConfig.quiet(), 1e-3)
    period = spec.oscillation_period()
    t = dynamics.sample_grid(spec, 50, burst=8, period=period)
    assert t[0] == 0.0
    assert np.all(np.diff(t) > 0)
    assert t[-1] <= spec.duration * (1 + 1e-12)
    assert np.allclose(t / spec.dt, np.round(t / spec.dt))
    with pytest.raises(InvalidArgument):
        dynamics.to_steps(spec, [2e-3])


def test_dressed_axis_is_unit():
    d = cdd_drive()
    assert np.linalg.norm(dynamics.dressed_axis(d)) == pytest.approx(1.0)
    assert dynamics.dressed_axis(DriveConfig.with_policy(O1, O2, "resonant")) == pytest.approx([0, 1, 0])


def test_sensing_without_signal_stays_put():
    spec = dynamics.ProtocolSpec("double_drive", cdd_drive(), note4_noise(), 20e-6,
                                 signal=SensingScheme("low_attenuation", TWO_PI * 2.87e9, 0.0))
    curve = dynamics.sensing_curve(spec, 3, n_points=20)
    assert np.allclose(curve.values, 1.0, atol=1e-12)
    with pytest.raises(InvalidArgument):
        dynamics.sensing_curve(dynamics.ProtocolSpec("double_drive", cdd_drive(), note4_noise(), 20e-6), 1)


@pytest.mark.parametrize("kind", dynamics.PULSE_KINDS)
def test_pulses_are_exact_without_error(kind):
    assert dynamics.pulse_fidelity(kind, O1, 0.0) == pytest.approx(1.0, abs=1e-9)


def test_pulse_fidelity_values():
    assert dynamics.pulse_fidelity("conventional", O1, 0.1) == pytest.approx(np.cos(np.pi * 0.1 / 2) ** 2,
                                                                             rel=1e-12)
    assert dynamics.pulse_fidelity("conventional", O1, 0.1) == pytest.approx(0.97553, abs=1e-5)
    f = {k: dynamics.pulse_fidelity(k, O1, 0.05) for k in dynamics.PULSE_KINDS}
    assert f["cdd"] > f["sdd"] and f["cdd"] > f["conventional"]
    with pytest.raises(InvalidArgument):
        dynamics.pulse_fidelity("cdd", O1, 0.6)


def test_pulse_ideal_is_inversion():
    for kind in dynamics.PULSE_KINDS:
        o2, wt, T = dynamics.pulse_settings(kind, O1)
        from corrdd.smallmat import expm_i
        if kind == "conventional":
            u = expm_i(0.5 * O1 * SIGMA_X, T)
        else:
            u = expm_i(0.5 * (O1 - wt) * SIGMA_X + 0.5 * o2 * SIGMA_Y, T)
        assert abs(u[1, 0]) ** 2 == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.5, 0.5))
def test_pulse_fidelity_is_a_probability(eps):
    for kind in dynamics.PULSE_KINDS:
        assert 0.0 <= dynamics.pulse_fidelity(kind, O1, eps) <= 1.0 + 1e-12


def test_build_protocol_kinds():
    nz = note4_noise()
    assert dynamics.build_protocol("free", O1, O2, nz, 1e-6).kind == "free"
    assert dynamics.build_protocol("single", O1, O2, nz, 1e-6).omega2 == 0.0
    assert dynamics.build_protocol("sdd", O1, O2, nz, 1e-6).drive.omega1_tilde == O1
    cdd = dynamics.build_protocol("cdd", O1, O2, nz, 1e-6, "correlated_bs")
    assert cdd.drive.omega1_tilde == pytest.approx(O1 + 1.25 * O2 * O2 / O1)
    with pytest.raises(InvalidArgument):
        dynamics.build_protocol("xdd", O1, O2, nz, 1e-6)


def test_single_drive_memory_decay_is_fast():
    spec = dynamics.build_protocol("single", O1, O2, note4_noise(seed=2), 150e-6)
    curve, res = dynamics.memory_curve("single", spec, 40, n_points=120, burst=16)
    assert res.threshold.reached
    assert 5e-6 < res.t2 < 80e-6
    assert res.floor == AXIS_FLOOR
