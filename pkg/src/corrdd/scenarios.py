"""Named experiment recipes that tie the modules together.

Each scenario reads a :class:`~corrdd.config.ScenarioConfig`, fills in its
own defaults, writes curve CSVs, a fit CSV where applicable and
``summary.csv`` into the output directory, and returns a
:class:`ScenarioResult`.
"""

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis, dynamics, lindblad, protocol
from .config import SCENARIOS, ScenarioConfig
from .curves import write_curve_csv
from .errors import InvalidArgument
from .noise import NoiseConfig
from .smallmat import bloch_density

TWO_PI = 2 * np.pi
MHZ = TWO_PI * 1e6

MEMORY_DEFAULTS = {"omega1": TWO_PI * 2e6, "omega2": TWO_PI * 0.2e6}
SENSING_DEFAULTS = {"omega1": TWO_PI * 4.666e6, "omega2": TWO_PI * 0.913e6}
LINDBLAD_DEFAULTS = {"omega1": TWO_PI * 4.470e6, "omega2": TWO_PI * 0.9e6, "omega1_tilde": TWO_PI * 4.697e6}
NOISE_DEFAULTS = {"t2_star": 3.6e-6, "tau_delta": 25e-6, "tau_omega": 500e-6, "delta_omega": 0.005,
                  "c": 1.0, "seed": 20240601}
LINDBLAD_MODEL_DEFAULTS = {"t1": 5.41e-3, "gamma2_ratio": 1.87, "gamma_phi": 360.0, "duration": 12e-3,
                           "t2_total": 2.798e-3}
RUN_DEFAULTS = {
    "n_realizations": 500,
    "n_points": 400,
    "burst": 32,
    "output_dir": "out",
    "duration_free": 20e-6,
    "duration_single": 300e-6,
    "duration_sdd": 3e-3,
    "duration_cdd": 12e-3,
    "n_list": tuple(float(n) for n in range(9)),
    "tau_list": (0.5e-6, 5e-6, 25e-6, 50e-6, 100e-6, 500e-6),
    "delta_list": (0.024, 0.0085, 0.0058, 0.0054, 0.0052, 0.0051),
    "eps_max": 0.1,
    "eps_points": 41,
    "sensing_kind": "both",
    "g0": TWO_PI * 94e3,
    "omega0": TWO_PI * 2.87e9,
    "sensing_duration": 150e-6,
    "sensing_noise": False,
    "stroboscopic": "none",
    "alpha": 0.5,
    "a": 1.02,
    "b": 0.78,
    "t2rho": 1.682e-3,
    "n_ph": 0.15,
    "t_r": 0.0,
    "overhead": 1.0,
    "p": 1.0,
}
FULL_REALIZATIONS = 2500

# the three worked sensitivity estimates: (label, inputs)
SENSITIVITY_SETS = (
    ("cdd_t2_half", dict(alpha=0.5, a=1.02, b=0.78, t2rho=1.682e-3, tau=1.682e-3 / 2, n_ph=0.15)),
    ("cdd_measured", dict(alpha=0.5, contrast=0.125, tau=1.3e-3, n_ph=0.15)),
    ("sdd_overhead", dict(alpha=0.5, contrast=0.146, tau=0.494e-3 / 2, n_ph=0.15, overhead_factor=3.0)),
)


@dataclass
class ScenarioResult:
    name: str
    summary: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)
    fits: list = field(default_factory=list)
    files: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    def value(self, protocol_name, quantity, unit=None):
        for row in self.summary:
            if row["protocol"] == protocol_name and row["quantity"] == quantity and (
                    unit is None or row["unit"] == unit):
                return row["value"]
        raise KeyError((protocol_name, quantity))


class Settings:
    """Config values with scenario defaults filled in."""

    def __init__(self, cfg, drive_defaults=MEMORY_DEFAULTS, full=False):
        self.cfg = cfg
        self.drive_defaults = drive_defaults
        self.full = full

    def drive(self, key, default=None):
        return self.cfg.get("drive", key, self.drive_defaults.get(key, default))

    def noise(self, key):
        return self.cfg.get("noise", key, NOISE_DEFAULTS[key])

    def lind(self, key):
        return self.cfg.get("lindblad", key, LINDBLAD_MODEL_DEFAULTS[key])

    def run(self, key):
        if key == "n_realizations" and self.full and "n_realizations" not in self.cfg.values["run"]:
            return FULL_REALIZATIONS
        return self.cfg.get("run", key, RUN_DEFAULTS.get(key))

    def noise_config(self):
        return NoiseConfig.from_t2star(self.noise("t2_star"), self.noise("tau_delta"), self.noise("tau_omega"),
                                       self.noise("delta_omega"), self.noise("c"), self.noise("seed"))

    def cdd_policy(self, auto):
        policy = self.drive("shift_policy", "auto")
        return auto if policy == "auto" else policy


def _row(scenario, protocol_name, quantity, value, unit="", method=""):
    return {"scenario": scenario, "protocol": protocol_name, "quantity": quantity, "value": float(value),
            "unit": unit, "method": method}


def _freq_rows(scenario, protocol_name, quantity, value):
    return [_row(scenario, protocol_name, quantity, value, "rad/s"),
            _row(scenario, protocol_name, quantity, value / MHZ, "MHz")]


def _write_summary(result, outdir):
    path = os.path.join(outdir, "summary.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "protocol", "quantity", "value", "unit", "method"])
        for r in result.summary:
            w.writerow([r["scenario"], r["protocol"], r["quantity"], repr(r["value"]), r["unit"], r["method"]])
    result.files.append(path)


def _write_curves(result, outdir):
    for name, curve in result.curves.items():
        path = os.path.join(outdir, f"{name}.csv")
        write_curve_csv(curve, path)
        result.files.append(path)
    if result.fits:
        path = os.path.join(outdir, "fits.csv")
        analysis.write_fit_csv(result.fits, path)
        result.files.append(path)


def _cdd_spec(st, noise, duration, policy, omega1_tilde=None):
    return dynamics.build_protocol("cdd", st.drive("omega1"), st.drive("omega2"), noise, duration, policy,
                                   st.drive("shift_c", 1.0), omega1_tilde or st.drive("omega1_tilde"))


def memory_compare(st, res):
    noise = st.noise_config()
    n = st.run("n_realizations")
    policy = st.cdd_policy("correlated_bs")
    for name in dynamics.PROTOCOLS:
        dur = st.run(f"duration_{name}")
        if name == "cdd":
            spec = _cdd_spec(st, noise, dur, policy)
        else:
            spec = dynamics.build_protocol(name, st.drive("omega1"), st.drive("omega2"), noise, dur)
        curve, coh = dynamics.memory_curve(name, spec, n, st.run("n_points"), st.run("burst"))
        res.curves[f"memory_{name}"] = curve
        res.fits.append((res.name, name, coh))
        res.summary.append(_row(res.name, name, "t2", coh.t2, "s", coh.method))
        res.summary.append(_row(res.name, name, "beta", coh.fit.beta, "", coh.fit.method))
        if name != "free":
            res.summary.extend(_freq_rows(res.name, name, "omega1_tilde", spec.drive.omega1_tilde))


def shift_scan(st, res):
    noise = st.noise_config()
    n = st.run("n_realizations")
    grid = protocol.shift_scan_grid(st.drive("omega1"), st.drive("omega2"), st.run("n_list"))
    best = (-np.inf, None)
    for N, wt in zip(st.run("n_list"), grid):
        spec = _cdd_spec(st, noise, st.run("duration_cdd"), "explicit", wt)
        curve, coh = dynamics.memory_curve("cdd", spec, n, st.run("n_points"), st.run("burst"))
        label = f"N={N:g}"
        res.curves[f"shift_N{N:g}"] = curve
        res.fits.append((res.name, label, coh))
        res.summary.append(_row(res.name, label, "t2", coh.t2, "s", coh.method))
        res.summary.extend(_freq_rows(res.name, label, "omega1_tilde", wt))
        if coh.t2 > best[0]:
            best = (coh.t2, N)
    res.summary.append(_row(res.name, "cdd", "argmax_N", best[1], "", "max t2"))


def corr_time_sweep(st, res):
    noise = st.noise_config()
    taus, deltas = st.run("tau_list"), st.run("delta_list")
    durations = {k: st.run(f"duration_{k}") for k in ("single", "sdd", "cdd")}
    rows = dynamics.coherence_vs_correlation_time(
        st.drive("omega1"), st.drive("omega2"), noise, taus, deltas, st.run("n_realizations"), durations,
        st.cdd_policy("correlated_bs"), st.run("n_points"), st.run("burst"))
    table = []
    for r in rows:
        label = f"{r['protocol']}@tau={r['tau_omega']:.3g}s"
        res.curves[f"sweep_{r['protocol']}_tau{r['tau_omega'] * 1e6:g}us"] = r["curve"]
        res.fits.append((res.name, label, r["result"]))
        res.summary.append(_row(res.name, label, "t2", r["t2"], "s", r["method"]))
        res.summary.append(_row(res.name, label, "ratio_to_single", r["ratio"], "", r["method"]))
        table.append({k: r[k] for k in ("tau_omega", "delta_omega", "protocol", "t2", "beta", "method", "ratio")})
    res.tables["sweep"] = table


def sensing(st, res):
    kinds = ("low_attenuation", "high_attenuation") if st.run("sensing_kind") == "both" else (st.run("sensing_kind"),)
    policy = st.cdd_policy("correlated")
    drive = protocol.DriveConfig.with_policy(st.drive("omega1"), st.drive("omega2"), policy,
                                             st.drive("shift_c", 1.0), st.drive("omega1_tilde"))
    noise = st.noise_config() if st.run("sensing_noise") else NoiseConfig.quiet(st.noise("seed"))
    n = st.run("n_realizations") if st.run("sensing_noise") else 1
    strobe = None if st.run("stroboscopic") == "none" else st.run("stroboscopic")
    g0 = st.run("g0")
    if g0 <= 0:
        raise InvalidArgument("sensing needs a positive signal amplitude g0")
    for kind in kinds:
        scheme = protocol.SensingScheme(kind, st.run("omega0"), g0)
        spec = dynamics.ProtocolSpec("double_drive", drive, noise, st.run("sensing_duration"), signal=scheme)
        curve = dynamics.sensing_curve(spec, n, stroboscopic=strobe)
        _, a_dd, a_t, _ = protocol.sensing_params(scheme, drive)
        guess = abs(a_dd * a_t) * g0
        g_fit = analysis.fit_oscillation(curve.times, curve.values, guess=guess)
        res.curves[f"sensing_{kind}"] = curve
        res.summary.extend(_freq_rows(res.name, kind, "g_prime", g_fit))
        res.summary.append(_row(res.name, kind, "g_prime_over_g0", g_fit / g0, "", "cosine fit"))
        res.summary.append(_row(res.name, kind, "alpha_theory", abs(a_dd * a_t), "", "closed form"))
    res.summary.extend(_freq_rows(res.name, "cdd", "omega1_tilde", drive.omega1_tilde))


def pulse_scan(st, res, outdir):
    eps_max, npts = st.run("eps_max"), st.run("eps_points")
    if eps_max > 0.5:
        raise InvalidArgument("|eps| must not exceed 0.5")
    omega1 = st.drive("omega1")
    eps = np.linspace(-eps_max, eps_max, npts)
    cols = {k: np.array([dynamics.pulse_fidelity(k, omega1, e) for e in eps]) for k in dynamics.PULSE_KINDS}
    path = os.path.join(outdir, "pulse_scan.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "conventional", "sdd", "cdd"])
        for i, e in enumerate(eps):
            w.writerow([repr(float(e))] + [repr(float(cols[k][i])) for k in dynamics.PULSE_KINDS])
    res.files.append(path)
    res.tables["pulse"] = {"eps": eps, **cols}
    nonzero = np.abs(eps) > 1e-12
    dominates = bool(np.all(cols["cdd"][nonzero] > cols["sdd"][nonzero]) and
                     np.all(cols["cdd"][nonzero] > cols["conventional"][nonzero]))
    for k in dynamics.PULSE_KINDS:
        res.summary.append(_row(res.name, k, "min_fidelity", cols[k].min(), "", "scan"))
    res.summary.append(_row(res.name, "cdd", "dominates_all_nonzero_eps", float(dominates), "bool", "scan"))


def lindblad_models(st):
    drive = protocol.DriveConfig(st.drive("omega1"), st.drive("omega2"), st.drive("omega1_tilde"), "explicit")
    model = lindblad.LindbladModel.from_t1(st.lind("t1"), st.lind("gamma2_ratio"), st.lind("gamma_phi"), drive)
    return model, drive


def lindblad_limit(st, res):
    model, drive = lindblad_models(st)
    dur = st.lind("duration")
    times = np.linspace(0.0, dur, 601)
    states = {"memory_x": np.array([1.0, 0.0, 0.0]), "spin_lock": dynamics.dressed_axis(drive)}
    limits = {}
    for label, vec in states.items():
        curve, _ = lindblad.evolve_lindblad(model, bloch_density(vec), times)
        res.curves[f"lindblad_{label}"] = curve
        limits[label] = lindblad.one_over_e_time(curve)
        res.summary.append(_row(res.name, label, "one_over_e_time", limits[label], "s", "threshold"))
    undriven = replace(model, drive=None)
    t1_times = np.linspace(0.0, 4 * st.lind("t1"), 401)
    pop, _ = lindblad.evolve_lindblad(undriven, bloch_density([0, 0, 1]), t1_times, observable="population_0")
    rel = pop.with_values((pop.values - 1.0 / 3.0) / (2.0 / 3.0), "population_0")
    res.curves["lindblad_undriven_population"] = pop
    res.summary.append(_row(res.name, "undriven", "t1", lindblad.one_over_e_time(rel), "s", "threshold"))
    t2_total = st.lind("t2_total")
    try:
        tphi = lindblad.relaxation_free_time(t2_total, limits["memory_x"])
        res.summary.append(_row(res.name, "memory_x", "relaxation_free_time", tphi, "s", "rate subtraction"))
    except lindblad.NoPositiveSolution:
        res.summary.append(_row(res.name, "memory_x", "relaxation_free_time", float("inf"), "s",
                                "no positive solution"))


def sensitivity_inputs_from(st):
    run = st.cfg.values["run"]
    kw = dict(alpha=st.run("alpha"), n_ph=st.run("n_ph"), t_r=st.run("t_r"),
              overhead_factor=st.run("overhead"), p=st.run("p"))
    if "contrast" in run:
        kw["contrast"] = run["contrast"]
        if "tau" not in run:
            raise InvalidArgument("a fixed contrast needs an interrogation time tau")
        kw["tau"] = run["tau"]
    else:
        kw.update(a=st.run("a"), b=st.run("b"), t2rho=st.run("t2rho"))
        kw["tau"] = run.get("tau", st.run("t2rho") / 2.0)
    return analysis.SensitivityInputs(**kw)


def sensitivity_report(st, res):
    sets = list(SENSITIVITY_SETS)
    sets.append(("config", None))
    for label, kw in sets:
        inp = sensitivity_inputs_from(st) if kw is None else analysis.SensitivityInputs(**kw)
        out = analysis.sensitivity(inp)
        res.summary.append(_row(res.name, label, "eta", out.eta * 1e9, "nT/sqrt(Hz)", "shot noise"))
        res.summary.append(_row(res.name, label, "contrast", out.contrast, "", "input"))
        res.summary.append(_row(res.name, label, "eta_with_dead_time", out.delta_b_min_sqrt_t * 1e9,
                                "nT/sqrt(Hz)", "shot noise"))


def run_scenario(name, cfg=None, output_dir=None, full=False):
    """Run a named scenario and write its outputs.

    Parameters
    ----------
    name : str
        One of the names in ``config.SCENARIOS``.
    cfg : ScenarioConfig, optional
        Parsed configuration; defaults are used for anything unset.
    output_dir : str, optional
        Overrides ``[run] output_dir``.
    full : bool
        Use the long realization count unless the config sets one.
    """
    if name not in SCENARIOS:
        raise InvalidArgument(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    cfg = cfg or ScenarioConfig()
    defaults = {"sensing": SENSING_DEFAULTS, "lindblad_limit": LINDBLAD_DEFAULTS}.get(name, MEMORY_DEFAULTS)
    st = Settings(cfg, defaults, full)
    outdir = output_dir or st.run("output_dir")
    os.makedirs(outdir, exist_ok=True)
    res = ScenarioResult(name)
    try:
        if name == "memory_compare":
            memory_compare(st, res)
        elif name == "shift_scan":
            shift_scan(st, res)
        elif name == "corr_time_sweep":
            corr_time_sweep(st, res)
        elif name == "sensing":
            sensing(st, res)
        elif name == "pulse_scan":
            pulse_scan(st, res, outdir)
        elif name == "lindblad_limit":
            lindblad_limit(st, res)
        else:
            sensitivity_report(st, res)
    except (InvalidArgument, ValueError, ArithmeticError) as exc:
        raise type(exc)(f"scenario {name}: {exc}") from exc
    _write_curves(res, outdir)
    _write_summary(res, outdir)
    return res
