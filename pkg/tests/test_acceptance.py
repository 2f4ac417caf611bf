"""End-to-end acceptance criteria.

Every test records a PASS/FAIL verdict that is printed as one line per
criterion in the terminal summary, then asserts the criterion at its stated
tolerance.
"""

import os

import numpy as np
import pytest
from conftest import record
from scipy import integrate as quad, stats

from superradiance import calibration as cal
from superradiance.config import parse_config
from superradiance.dynamics import steady_state_transmission
from superradiance.ensemble import cooperativity, discretize, effective_linewidth, hz_to_rad, rad_to_hz
from superradiance.io import OutputWriter
from superradiance.scenarios import run_inversion_scan, run_pulse_train
from superradiance.stochastic import (
    THETA_BAR,
    SimulationConfig,
    TippingDistribution,
    angular_pdf,
    delay_cdf,
    delay_from_theta,
    delay_law_from_simulation,
    delay_pdf,
    monte_carlo_bursts,
    phase_coherence,
    rician_pdf,
    sample_tipping,
)

P_TRIGGERED = 0.34


def _config(text):
    cfg, issues = parse_config(text)
    assert not [i for i in issues if i.level == "error"]
    return cfg


def test_criterion_01_effective_linewidth(params):
    gamma = effective_linewidth(params.distribution, params.spin_halfwidth)
    value = rad_to_hz(gamma) / 1e6
    ok = abs(value - 4.27) <= 0.05 * 4.27
    record(1, ok, f"Gamma_perp/2pi = {value:.4f} MHz (target 4.27 MHz +-5%)")
    assert ok


def test_criterion_02_cooperativity(params):
    c = cooperativity(params, effective_linewidth(params.distribution, params.spin_halfwidth))
    ok = abs(c - 12.2) <= 0.02 * 12.2
    record(2, ok, f"C = {c:.3f} (target 12.2 +-2%)")
    assert ok


def test_criterion_03_strong_coupling_transmission(params):
    f = np.linspace(-20e6, 20e6, 8001)
    w = params.cavity_frequency + hz_to_rad(f)
    ground = np.abs(steady_state_transmission(params, w, -1.0)) ** 2
    peaks = cal.resonance_peaks(f, ground)
    splitting = (peaks[1] - peaks[0]) / 1e6
    target = 2 * rad_to_hz(params.collective_coupling) / 1e6
    scrambled = np.abs(steady_state_transmission(params, w, 0.0)) ** 2
    hwhm = cal.half_width_half_max(f, scrambled)
    kappa_hz = rad_to_hz(params.cavity_halfwidth)
    ok_split = abs(splitting - target) <= 0.10 * target
    ok_hwhm = abs(hwhm - kappa_hz) <= 0.02 * kappa_hz
    record(3, ok_split and ok_hwhm,
           f"p=-1 splitting {splitting:.2f} MHz vs 2g/2pi = {target:.2f} MHz ({100 * (splitting / target - 1):+.1f}%, "
           f"limit 10%); p=0 HWHM {hwhm / 1e6:.4f} MHz vs kappa {kappa_hz / 1e6:.4f} MHz")
    assert ok_hwhm
    assert ok_split


def test_criterion_04_photon_calibrations():
    kt_1 = hz_to_rad(586e3)
    weak = cal.pulse_photons(1.83e-9, hz_to_rad(cal.COOLDOWNS["I"][0]), float(cal.db_to_factor(-49.5)),
                             hz_to_rad(59e3), kt_1, 100e-9)
    strong = cal.pulse_photons(2.1e-6, hz_to_rad(cal.COOLDOWNS["II"][0]), float(cal.db_to_factor(-10.6)),
                               hz_to_rad(182e3), hz_to_rad(516e3), 100e-9)
    nbar = cal.thermal_ladder(cal.StageLadder.table_s3(), hz_to_rad(3.105e9))["pump"]
    ok = abs(weak / 50 - 1) <= 0.1 and abs(strong / 1.5e9 - 1) <= 0.1 and abs(nbar / 3 - 1) <= 0.3
    record(4, ok, f"n_trig weak {weak:.1f} (50), strong {strong:.3e} (1.5e9), pump-line nbar {nbar:.2f} (3)")
    assert ok


@pytest.mark.slow
def test_criterion_05_delay_law(params):
    ens = discretize(params.distribution, params, 1500)
    thetas = np.logspace(-5, -2, 10)
    # loose tolerances so the step cap, not the error control, sets the step
    conf = SimulationConfig(t_end=3e-6, output_dt=1e-9, rtol=1e-6, atol=1e-8)
    law, delays = delay_law_from_simulation(P_TRIGGERED, ens, params, thetas, conf, max_step=2e-9)
    halved, _ = delay_law_from_simulation(P_TRIGGERED, ens, params, thetas, conf, max_step=1e-9)
    slope = -2 * law.t_r
    drift = abs(halved.t_r / law.t_r - 1)
    ok = law.r_squared > 0.99 and slope < 0 and drift <= 0.02
    record(5, ok, f"T_R = {law.t_r * 1e9:.2f} ns, R^2 = {law.r_squared:.8f}, step-halving change {100 * drift:.1e}% "
                  f"(1500 bins, 20 trajectories)")
    assert ok


@pytest.mark.slow
def test_criterion_06_trigger_statistics(params):
    ens = discretize(params.distribution, params, 500)
    conf = SimulationConfig(t_end=3e-6, output_dt=2e-9)
    law, _ = delay_law_from_simulation(P_TRIGGERED, ens, params, config=conf)
    width = law.effective_width(THETA_BAR)
    jobs = min(os.cpu_count() or 1, 8)
    try:
        import joblib  # noqa: F401
    except ImportError:
        jobs = 1
    medians, coherence, pvalues = [], [], []
    for k, eta in enumerate((0.0, 1.0, 2.0, 5.0, 10.0)):
        shots = monte_carlo_bursts(TippingDistribution(THETA_BAR, eta), P_TRIGGERED, ens, params, 200, conf,
                                   rng_seed=1000 + k, n_jobs=jobs)
        medians.append(np.median(shots.delays))
        coherence.append(phase_coherence(shots))
        dist = TippingDistribution(width, eta)
        pvalues.append(stats.kstest(shots.delays, lambda x: delay_cdf(x, dist, law.t_r)).pvalue)
    ok_median = bool(np.all(np.diff(medians) < 0))
    ok_coh = abs(coherence[0]) < 0.15 and coherence[-1] > 0.9
    ok_ks = min(pvalues) > 0.01
    record(6, ok_median and ok_coh and ok_ks,
           "median t_D (ns) " + ", ".join(f"{m * 1e9:.0f}" for m in medians)
           + "; coherence " + ", ".join(f"{c:.3f}" for c in coherence)
           + "; KS p " + ", ".join(f"{p:.2f}" for p in pvalues))
    assert ok_median and ok_coh and ok_ks


@pytest.mark.slow
def test_criterion_07_below_threshold_amplification(tmp_path):
    cfg = _config("kind: pulse_train\nensemble: {n_bins: 1500}\npulse_train: {threshold_product: 0.8}\n")
    summary = run_pulse_train(cfg, OutputWriter(tmp_path))
    gains = summary["gains"]
    ok_gain = gains[0] > 1.1
    ok_mono = summary["gains_decreasing"]
    ok_quiet = not summary["undriven"]["burst"]
    record(7, ok_gain and ok_mono and ok_quiet,
           f"first-pulse gain {gains[0]:.4f} (need > 1.1); gains " + ", ".join(f"{g:.4f}" for g in gains)
           + f" decreasing={ok_mono}; undriven inversion drop {summary['undriven']['inversion_drop']:.1e} "
             f"burst={summary['undriven']['burst']}")
    assert ok_mono and ok_quiet
    assert ok_gain


@pytest.mark.slow
def test_criterion_08_inversion_pulse(tmp_path):
    cfg = _config(
        "kind: inversion_scan\n"
        "inversion_scan:\n"
        "  amplitudes: [1.0e6, 2.0e6, 3.0e6, 4.0e6, 5.0e6, 6.0e6, 8.0e6]\n"
        "  switch_times: [8.0e-8, 1.0e-7]\n"
    )
    summary = run_inversion_scan(cfg, OutputWriter(tmp_path))
    scan = np.genfromtxt(tmp_path / "inversion_scan.csv", delimiter=",", names=True)
    best = summary["best_efficiency"]
    interior = scan["amplitude"][np.argmax(scan["efficiency"])] < scan["amplitude"].max()
    err = summary["compensation_peak_error"]
    ok = best >= 0.6 and err < 0.01
    record(8, ok, f"best inversion efficiency {best:.3f} at amplitude {summary['best_amplitude']:.1e} "
                  f"(interior optimum: {bool(interior)}); compensation peak error {100 * err:.4f}%")
    assert ok


def test_criterion_09_fit_round_trips():
    rng = np.random.default_rng(9)
    noise = lambda n: 1 + 0.02 * rng.standard_normal(n)
    t = np.linspace(0, 4 * 7.6e-3, 40)
    tau = cal.fit_exponential(t, np.exp(-t / 7.6e-3) * noise(t.size)).timescale
    ts = np.linspace(0, 10 * 3.0e-3, 40)
    tau_s = cal.fit_stretched_exponential(ts, np.exp(-np.sqrt(ts / 3.0e-3)) * noise(ts.size)).timescale
    t1t = np.linspace(0, 3 * 134.0, 40)
    t1 = cal.t1_from_dispersive_shift(t1t, -hz_to_rad(120e3) * np.exp(-t1t / 134.0) * noise(t1t.size)).timescale
    errs = [abs(tau / 7.6e-3 - 1), abs(tau_s / 3.0e-3 - 1), abs(t1 / 134.0 - 1)]
    ok = max(errs) <= 0.05
    record(9, ok, f"tau {tau * 1e3:.3f} ms, stretched tau {tau_s * 1e3:.3f} ms (3 ms), T1 {t1:.1f} s; "
                  f"max error {100 * max(errs):.2f}%")
    assert ok


def _grid_cdf(x, pdf):
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))))
    return lambda v: np.interp(v, x, cdf / cdf[-1])


def test_criterion_10_distribution_sanity():
    rng = np.random.default_rng(10)
    details, ok = [], True
    for eta in (0.0, 0.5, 2.0, 10.0):
        dist = TippingDistribution(THETA_BAR, eta)
        hi = (eta + 40) * THETA_BAR
        pts = [eta * THETA_BAR] if eta else None
        n_theta = quad.quad(lambda x: rician_pdf(x, dist), 0, hi, points=pts, epsabs=1e-13, epsrel=1e-12,
                            limit=400)[0]
        n_phi = quad.quad(lambda p: angular_pdf(p, eta), -np.pi, np.pi, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
        # delay density integrated in microseconds from theta = 2 out to a negligible tail
        t_lo = float(delay_from_theta(1.999)) * 1e6
        t_pk = float(delay_from_theta(max(eta, 1.0) * THETA_BAR)) * 1e6
        n_td = quad.quad(lambda u: delay_pdf(u * 1e-6, dist) * 1e-6, t_lo, 50.0, points=[t_pk], epsabs=1e-13,
                         epsrel=1e-12, limit=400)[0]
        norm_err = max(abs(n_theta - 1), abs(n_phi - 1), abs(n_td - 1))

        theta, phi = sample_tipping(dist, 100_000, rng)
        x = np.linspace(0, hi, 200_001)
        p_theta = stats.kstest(theta, _grid_cdf(x, rician_pdf(x, dist))).pvalue
        g = np.linspace(-np.pi, np.pi, 200_001)
        p_phi = stats.kstest(phi, _grid_cdf(g, angular_pdf(g, eta))).pvalue
        tg = np.linspace(float(delay_from_theta(hi)), float(delay_from_theta(1e-6 * THETA_BAR)), 200_001)
        p_td = stats.kstest(delay_from_theta(theta), _grid_cdf(tg, delay_pdf(tg, dist))).pvalue
        ok &= norm_err <= 1e-6 and min(p_theta, p_phi, p_td) > 0.01
        details.append(f"eta={eta:g}: norm err {norm_err:.1e}, KS p {p_theta:.2f}/{p_phi:.2f}/{p_td:.2f}")
    record(10, ok, "; ".join(details))
    assert ok
