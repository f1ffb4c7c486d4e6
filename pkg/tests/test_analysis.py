import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrdd.analysis import (AVG_FLOOR, AXIS_FLOOR, GAMMA_NV, CoherenceFit, SensitivityInputs, coherence_time,
                             default_threshold, extract_envelope, fit_oscillation, fit_stretched_exp,
                             sensitivity, threshold_time, write_fit_csv)
from corrdd.curves import FidelityCurve, read_curve_csv, write_curve_csv
from corrdd.errors import FitFailure, InvalidArgument


def curve(t, v, kind="fidelity_x"):
    return FidelityCurve(np.asarray(t, float), np.asarray(v, float), kind=kind)


def test_default_thresholds():
    assert default_threshold(AVG_FLOOR) == pytest.approx(0.7893, abs=1e-4)
    assert default_threshold(AXIS_FLOOR) == pytest.approx(0.6839, abs=1e-4)


def test_envelope_of_constant_curve():
    c = curve(np.linspace(0, 1, 50), np.full(50, 0.7))
    up, lo = extract_envelope(c)
    assert np.array_equal(up.values, c.values) and np.array_equal(lo.values, c.values)


def test_envelope_of_pure_cosine():
    t = np.linspace(0, 20, 2001)
    up, lo = extract_envelope(curve(t, np.cos(2 * np.pi * t)), period=1.0)
    inner = t > 1
    assert np.allclose(up.values[inner], 1.0, atol=0.01)
    assert np.allclose(lo.values[inner], -1.0, atol=0.01)


def test_envelope_of_damped_oscillation():
    tau, w = 10.0, 2 * np.pi * 5
    t = np.linspace(0, 40, 8001)
    v = np.exp(-t / tau) * np.cos(w * t / 2) ** 2
    up, _ = extract_envelope(curve(t, v), period=2 * np.pi / w)
    rms = np.sqrt(np.mean((up.values - np.exp(-t / tau)) ** 2))
    assert rms < 0.02


def test_envelope_estimates_period():
    t = np.linspace(0, 20, 2001)
    up, _ = extract_envelope(curve(t, 0.5 + 0.4 * np.cos(2 * np.pi * t)))
    assert np.allclose(up.values[t > 1], 0.9, atol=0.01)


def test_fit_recovers_stretched_exponential(rng):
    t = np.geomspace(1e-6, 400e-6, 200)
    y = np.exp(-(t / 100e-6) ** 1.5) + 0.01 * rng.standard_normal(len(t))
    fit = fit_stretched_exp(t, y, amplitude=1.0)
    assert fit.t2 == pytest.approx(100e-6, rel=0.03)
    assert fit.beta == pytest.approx(1.5, abs=0.1)


def test_fit_with_fixed_beta_is_exact():
    t = np.linspace(0.1, 30, 100)
    fit = fit_stretched_exp(t, np.exp(-t / 7.0), amplitude=1.0, beta=1.0)
    assert fit.t2 == pytest.approx(7.0, rel=1e-6)
    assert fit.beta == 1.0


def test_fit_free_amplitude():
    t = np.linspace(0.1, 30, 100)
    fit = fit_stretched_exp(t, 0.8 * np.exp(-(t / 5.0) ** 2), amplitude=None)
    assert fit.amplitude == pytest.approx(0.8, rel=1e-5)
    assert fit.t2 == pytest.approx(5.0, rel=1e-5)


@settings(max_examples=15, deadline=None)
@given(st.floats(2.0, 50.0), st.floats(0.5, 3.0))
def test_refit_is_idempotent(t2, beta):
    t = np.geomspace(0.2, 200, 150)
    first = fit_stretched_exp(t, np.exp(-(t / t2) ** beta), amplitude=1.0)
    again = fit_stretched_exp(t, np.exp(-(t / first.t2) ** first.beta), amplitude=1.0)
    assert again.t2 == pytest.approx(first.t2, rel=1e-3)
    assert again.beta == pytest.approx(first.beta, rel=1e-3)


def test_fit_input_checks():
    with pytest.raises(InvalidArgument):
        fit_stretched_exp([1, 2, 3], [1, 0.5, 0.2])
    with pytest.raises(InvalidArgument):
        fit_stretched_exp(np.linspace(1, 2, 20), np.ones(20))


def test_fit_failure_carries_fallback():
    err = FitFailure("x", fallback=CoherenceFit(1.0, 1.0, 0.0))
    assert err.fallback.t2 == 1.0


def test_threshold_of_exponential():
    t = np.linspace(0, 10, 1001)
    res = threshold_time(curve(t, np.exp(-t / 2.0)), np.exp(-1))
    assert res.reached
    assert abs(res.time - 2.0) <= t[1] - t[0]


def test_threshold_inverts_average_fidelity_gap():
    T = 3.6e-6
    t = np.linspace(0, 10e-6, 2001)
    v = (2 + np.exp(-(t / T) ** 2)) / 3
    res = threshold_time(curve(t, v, "avg_fidelity"), default_threshold(AVG_FLOOR))
    assert res.time == pytest.approx(T, rel=1e-4)


def test_threshold_not_reached():
    t = np.linspace(0, 1, 20)
    res = threshold_time(curve(t, 0.9 + 0.1 * t), 0.5)
    assert not res.reached and res.time == 1.0
    with pytest.raises(InvalidArgument):
        threshold_time(curve(t, np.full(20, 0.2)), 0.5)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_threshold_monotone(a, b):
    t = np.linspace(0, 5, 400)
    c = curve(t, np.exp(-t))
    lo, hi = sorted((a, b))
    assert threshold_time(c, lo).time >= threshold_time(c, hi).time


def test_coherence_time_on_synthetic_axis_curve():
    T, period = 200e-6, 5e-6
    t = np.linspace(0, 1e-3, 20001)
    v = 0.5 + 0.5 * np.exp(-(t / T) ** 1.3) * np.cos(np.pi * t / period) ** 2
    res = coherence_time(curve(t, v), AXIS_FLOOR, period=period)
    assert res.method == "threshold"
    assert res.t2 == pytest.approx(T, rel=0.03)
    assert res.fit.t2 == pytest.approx(T, rel=0.05)
    assert res.fit.beta == pytest.approx(1.3, abs=0.1)


def test_coherence_time_falls_back_to_fit():
    t = np.geomspace(1e-6, 100e-6, 200)
    v = 0.5 + 0.5 * np.exp(-t / 300e-6)
    res = coherence_time(curve(np.concatenate([[0], t]), np.concatenate([[1.0], v])), AXIS_FLOOR)
    assert not res.threshold.reached
    assert res.method == "stretched_exp"
    assert res.t2 == pytest.approx(300e-6, rel=0.05)


def test_fit_oscillation(rng):
    t = np.linspace(0, 150e-6, 400)
    w = 2 * np.pi * 47e3
    y = 0.5 + 0.5 * np.cos(w * t) + 0.001 * rng.standard_normal(len(t))
    assert fit_oscillation(t, y) == pytest.approx(w, rel=1e-3)
    assert fit_oscillation(t, y, guess=w * 1.05) == pytest.approx(w, rel=1e-3)


def test_sensitivity_reference_values():
    eta = sensitivity(SensitivityInputs(alpha=0.5, n_ph=0.15, tau=1.3e-3, contrast=0.125)).eta
    ref = 2 / (GAMMA_NV * 0.5 * 0.125 * np.sqrt(0.15 * 1.3e-3))
    assert eta == pytest.approx(ref, rel=1e-14)
    assert eta * 1e9 == pytest.approx(13.0, rel=0.02)


def test_sensitivity_scaling_and_dead_time():
    base = SensitivityInputs(alpha=0.5, n_ph=0.15, tau=1e-3, contrast=0.1, t_r=1e-3)
    scaled = SensitivityInputs(alpha=0.5, n_ph=0.15 * 9, tau=1e-3, contrast=0.1, t_r=1e-3)
    a, b = sensitivity(base), sensitivity(scaled)
    assert b.eta == pytest.approx(a.eta / 3, rel=1e-14)
    assert a.delta_b_min_sqrt_t == pytest.approx(a.eta * np.sqrt(2), rel=1e-14)
    over = SensitivityInputs(alpha=0.5, n_ph=0.15, tau=1e-3, contrast=0.1, overhead_factor=4)
    assert sensitivity(over).eta == pytest.approx(2 * a.eta, rel=1e-14)


def test_sensitivity_optimum_at_half_t2():
    kw = dict(alpha=0.5, n_ph=0.15, a=1.02, b=0.78, t2rho=1.682e-3)
    taus = np.linspace(0.1e-3, 3e-3, 2901)
    etas = [sensitivity(SensitivityInputs(tau=x, **kw)).eta for x in taus]
    assert taus[int(np.argmin(etas))] == pytest.approx(1.682e-3 / 2, abs=1e-6)
    res = sensitivity(SensitivityInputs(tau=1e-3, **kw))
    assert res.tau_opt == pytest.approx(1.682e-3 / 2)
    assert res.eta_opt == pytest.approx(min(etas), rel=1e-6)


def test_sensitivity_input_checks():
    with pytest.raises(InvalidArgument):
        SensitivityInputs(alpha=0.0, n_ph=0.15, tau=1e-3, contrast=0.1)
    with pytest.raises(InvalidArgument):
        SensitivityInputs(alpha=0.5, n_ph=0.15, tau=1e-3)
    with pytest.raises(InvalidArgument):
        SensitivityInputs(alpha=0.5, n_ph=0.15, tau=1e-3, a=0.5, b=0.7, t2rho=1e-3)


def test_curve_csv_roundtrip(tmp_path):
    c = FidelityCurve(np.array([0.0, 1e-6, 2.5e-6]), np.array([1.0, 0.9, 1 / 3]), np.array([0, 0.01, 0.02]))
    path = tmp_path / "c.csv"
    write_curve_csv(c, path)
    assert path.read_text().splitlines()[0] == "t_s,value,stderr"
    back = read_curve_csv(path)
    assert np.array_equal(back.values, c.values) and np.array_equal(back.stderr, c.stderr)


def test_curve_rejects_unsorted_times():
    with pytest.raises(InvalidArgument):
        FidelityCurve(np.array([0.0, 2.0, 1.0]), np.zeros(3))


def test_fit_csv(tmp_path):
    t = np.linspace(0, 1e-3, 2001)
    res = coherence_time(curve(t, 0.5 + 0.5 * np.exp(-t / 1e-4)), AXIS_FLOOR)
    path = tmp_path / "fits.csv"
    write_fit_csv([("s", "p", res), ("s", "q", res.fit)], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "scenario,protocol,t2_s,beta,method,residual"
    assert len(lines) == 4
    assert lines[1].split(",")[4] == "threshold"
