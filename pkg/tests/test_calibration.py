import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from superradiance.calibration import (
    COOLDOWNS,
    DispersiveValidityWarning,
    PortCouplings,
    StageLadder,
    bose_occupation,
    cavity_charging,
    cooldown_halfwidth,
    correct_phase_drift,
    db_to_factor,
    dispersive_shift,
    drive_from_power,
    factor_to_db,
    fit_circular_linear,
    fit_delay_hyperbola,
    fit_exponential,
    fit_port_couplings,
    fit_stretched_exponential,
    half_width_half_max,
    inversion_from_hold_time,
    line_attenuation_db,
    pulse_photons,
    read_trace,
    rescale_delay_times,
    resonance_peaks,
    s_parameter_traces,
    s_parameters_on_resonance,
    t1_from_dispersive_shift,
    thermal_ladder,
    wrap_phase,
    write_trace,
)
from superradiance.dynamics import BurstRecord, SpinEnsembleState, integrate, steady_state_transmission
from superradiance.ensemble import empty_ensemble, hz_to_rad
from superradiance.errors import FitError, ParameterError
from superradiance.pulses import rectangular_pulse
from superradiance.stochastic import ShotSet

K1 = hz_to_rad(182e3)
K2 = hz_to_rad(59e3)
KT = hz_to_rad(586e3)
F0 = 3.105e9


def test_s_parameters_on_resonance():
    assert s_parameters_on_resonance(PortCouplings(KT / 2, 0.0, KT))[0] == pytest.approx(0.0, abs=1e-30)
    assert s_parameters_on_resonance(PortCouplings(0.0, 0.0, KT))[1] == 0.0
    # shallow transmission dip at port 2
    assert s_parameters_on_resonance(PortCouplings(K1, K2, KT))[2] == pytest.approx(0.638, abs=2e-3)
    c = PortCouplings(K1, K2, KT, 0.9, 0.8, 0.7)
    traces = s_parameter_traces(c, np.array([F0]), F0)
    np.testing.assert_allclose([traces[k][0] for k in ("s11", "s31", "s32")], s_parameters_on_resonance(c),
                               rtol=1e-12)


@pytest.mark.parametrize("kwargs", [dict(kappa_1=-1.0), dict(kappa_tot=0.0), dict(kappa_1=KT), dict(a_1=0.0),
                                    dict(a_3=1.5)])
def test_port_couplings_validation(kwargs):
    base = dict(kappa_1=K1, kappa_2=K2, kappa_tot=KT)
    base.update(kwargs)
    with pytest.raises(ParameterError):
        PortCouplings(**base)


def _synthetic(c, noise, rng, n=801):
    f = F0 + np.linspace(-3e6, 3e6, n)
    out = {}
    for key, y in s_parameter_traces(c, f, F0).items():
        y = y * (1 + noise * rng.standard_normal(n)) if noise else y
        out[key] = (f, 10 * np.log10(y))
    return out


def test_port_fit_noiseless_exact(rng):
    truth = PortCouplings(K1, K2, KT, 0.95, 0.9, 0.85)
    fit = fit_port_couplings(_synthetic(truth, 0.0, rng))
    c = fit.couplings
    for name in ("kappa_1", "kappa_2", "kappa_tot", "a_1", "a_2", "a_3"):
        assert getattr(c, name) == pytest.approx(getattr(truth, name), rel=1e-6)
    assert fit.center_hz == pytest.approx(F0, abs=1e-3)
    assert fit.residual_norm < 1e-8


def test_port_fit_noisy_within_three_percent(rng):
    truth = PortCouplings(K1, K2, KT)
    fit = fit_port_couplings(_synthetic(truth, 0.01, rng))
    for name in ("kappa_1", "kappa_2", "kappa_tot"):
        assert getattr(fit.couplings, name) == pytest.approx(getattr(truth, name), rel=0.03)
    assert all(np.isfinite(v) for v in fit.stderr.values())


def test_port_fit_transmission_only(rng):
    tr = _synthetic(PortCouplings(K1, K2, KT), 0.0, rng)
    fit = fit_port_couplings({"s31": tr["s31"]})
    assert fit.couplings.kappa_tot == pytest.approx(KT, rel=1e-6)


def test_port_fit_errors(rng):
    f = F0 + np.linspace(-3e6, 3e6, 201)
    with pytest.raises(FitError):
        fit_port_couplings({"s31": (f, np.full(f.size, -40.0))})
    with pytest.raises(FitError):
        fit_port_couplings({"s11": (f, np.zeros(f.size))})


def test_trace_io_round_trip(tmp_path):
    f = F0 + np.linspace(-1e6, 1e6, 11)
    s = -np.linspace(0, 30, 11) / 7
    write_trace(tmp_path / "t.csv", f, s)
    f2, s2 = read_trace(tmp_path / "t.csv")
    np.testing.assert_array_equal(f2, f)
    np.testing.assert_array_equal(s2, s)


def test_pulse_photons_trigger_estimate():
    omega = hz_to_rad(COOLDOWNS["I"][0])
    a = db_to_factor(line_attenuation_db(-49.5, 0.0))
    n = pulse_photons(1.83e-9, omega, a, K2, KT, 100e-9)
    assert n == pytest.approx(50, rel=0.1)


def test_pulse_photons_strong_pulse():
    omega = hz_to_rad(COOLDOWNS["II"][0])
    n = pulse_photons(2.1e-6, omega, db_to_factor(-10.6), K1, hz_to_rad(516e3), 100e-9)
    assert n == pytest.approx(1.5e9, rel=0.1)


def test_pulse_photons_limits():
    assert pulse_photons(1e-9, 1e10, 0.5, K1, KT, 0.0) == 0.0
    with pytest.raises(ParameterError):
        pulse_photons(0.0, 1e10, 0.5, K1, KT, 1e-7)
    # long pulses saturate at the steady state of the charging curve
    omega = hz_to_rad(F0)
    eta = drive_from_power(1e-12, K1, omega)
    n_inf = pulse_photons(1e-12, omega, 1.0, K1, KT, 1.0)
    assert n_inf == pytest.approx((eta / KT) ** 2, rel=1e-12)


def test_cooldown_halfwidths():
    assert cooldown_halfwidth("II") == pytest.approx(hz_to_rad(516e3), rel=0.01)
    assert cooldown_halfwidth("I") == pytest.approx(KT, rel=0.03)
    with pytest.raises(ParameterError):
        cooldown_halfwidth("III")


def test_cavity_charging_closed_form():
    eta, k = 2e6, hz_to_rad(516e3)
    assert cavity_charging(eta, k, 1e3) == pytest.approx(eta / k)
    assert cavity_charging(eta, k, 1 / k) == pytest.approx((1 - np.exp(-1)) * eta / k)
    with pytest.raises(ParameterError):
        cavity_charging(eta, k, -1.0)


def test_cavity_charging_matches_integrator(params):
    eta = 5e5
    drive = rectangular_pulse(1e-6, eta, 0.0, 1e-9, carrier_frequency=params.cavity_frequency)
    tr = integrate(0.0, SpinEnsembleState.ground(empty_ensemble(params)), params, (0.0, 1e-6), 1e-8, drive=drive)
    ref = cavity_charging(eta, params.cavity_halfwidth, tr.times)
    np.testing.assert_allclose(np.abs(tr.cavity_amplitude[1:]), ref[1:], rtol=1e-3)


def test_thermal_ladder_table():
    out = thermal_ladder(StageLadder.table_s3(), hz_to_rad(3.105e9))
    assert out["pump"] == pytest.approx(3.0, rel=0.3)
    assert out["total"] == pytest.approx(out["pump"] + out["probe"] + out["out"])


def test_thermal_ladder_limits():
    omega = hz_to_rad(3.105e9)
    assert thermal_ladder(StageLadder((0.0,), {"x": ()}), omega)["x"] == 0.0
    single = thermal_ladder(StageLadder((296.0,), {"x": ()}), omega)["x"]
    assert single == pytest.approx(1985.86, rel=1e-4)
    # Rayleigh-Jeans limit up to the -1/2 correction
    from scipy import constants

    assert single == pytest.approx(constants.k * 296.0 / (constants.hbar * omega) - 0.5, rel=1e-6)
    # 0 dB lines carry the full upper occupation plus the local one
    two = thermal_ladder(StageLadder.from_db((296.0, 4.0), {"x": [0.0]}), omega)["x"]
    assert two == pytest.approx(single + float(bose_occupation(4.0, omega)))


@pytest.mark.parametrize("temps", [(), (4.0, 10.0), (-1.0,)])
def test_ladder_validation(temps):
    with pytest.raises(ParameterError):
        StageLadder(temps, {})


@given(st.lists(st.floats(-60, 0), min_size=1, max_size=6))
def test_db_arithmetic_additive(dbs):
    total = sum(dbs)
    product = float(np.prod([db_to_factor(d) for d in dbs]))
    assert product == pytest.approx(float(db_to_factor(total)), rel=1e-12)
    assert float(factor_to_db(product)) == pytest.approx(total, rel=1e-12, abs=1e-12)


def test_factor_to_db_rejects_nonpositive():
    with pytest.raises(ParameterError):
        factor_to_db(0.0)


def test_dispersive_shift_basic():
    g = hz_to_rad(5.17e6)
    d = hz_to_rad(200e6)
    assert dispersive_shift(g, d, 0.0) == 0.0
    assert dispersive_shift(g, d, -1.0) == -dispersive_shift(g, d, 1.0)
    with pytest.warns(DispersiveValidityWarning):
        dispersive_shift(g, 2 * g, -1.0)
    with pytest.raises(ParameterError):
        dispersive_shift(g, 0.0, 1.0)


def test_dispersive_shift_matches_steady_state(params):
    d = hz_to_rad(200e6)
    chi = dispersive_shift(params.collective_coupling, d, -1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        w = params.cavity_frequency + np.linspace(-2, 2, 4001) * abs(chi)
        a = steady_state_transmission(params, w, -1.0, delta=d)
    peak = resonance_peaks(w, np.abs(a) ** 2, n_peaks=1)[0]
    assert peak - params.cavity_frequency == pytest.approx(chi, rel=0.05)


def test_fit_exponential(rng):
    tau = 7.6e-3
    t = np.linspace(0, 30e-3, 40)
    y = 3.0 * np.exp(-t / tau) * (1 + 0.02 * rng.standard_normal(t.size))
    fit = fit_exponential(t, y)
    assert fit.timescale == pytest.approx(tau, rel=0.05)
    assert fit(0.0) == pytest.approx(3.0, rel=0.05)


def test_fit_exponential_degenerate():
    fit = fit_exponential([0, 1, 2, 3], [2.0, 2.0, 2.0, 2.0])
    assert fit.degenerate and fit.timescale == np.inf
    np.testing.assert_allclose(fit([0, 5]), 2.0)
    with pytest.raises(FitError):
        fit_exponential([0, 1], [1, 1])
    with pytest.raises(FitError):
        fit_exponential([0, 1, 2], [1, 0, 1])


def test_fit_stretched_exponential(rng):
    tau = 4.0
    t = np.linspace(0, 40, 50)
    y = 0.8 * np.exp(-np.sqrt(t / tau)) * (1 + 0.02 * rng.standard_normal(t.size))
    fit = fit_stretched_exponential(t, y)
    assert fit.timescale == pytest.approx(tau, rel=0.05)
    assert fit.exponent == 0.5
    np.testing.assert_allclose(inversion_from_hold_time(t, 0.8, tau), 0.8 * np.exp(-np.sqrt(t / tau)))


def test_t1_from_dispersive_shift(rng):
    t = np.linspace(0, 400, 30)
    chi = -2 * np.pi * 100e3 * np.exp(-t / 134.0) * (1 + 0.02 * rng.standard_normal(t.size))
    assert t1_from_dispersive_shift(t, chi).timescale == pytest.approx(134.0, rel=0.05)
    # recovery towards a final value
    rec = 5.0 - 3.0 * np.exp(-t / 134.0)
    assert t1_from_dispersive_shift(t, rec, chi_final=5.0).timescale == pytest.approx(134.0, rel=1e-9)


def _shots(td, amp, phase=None):
    phase = np.zeros_like(td) if phase is None else phase
    return ShotSet([BurstRecord(t, a * np.cos(p), a * np.sin(p), a) for t, a, p in zip(td, amp, phase)])


def test_rescale_exact_alignment():
    amp = np.linspace(900, 1100, 9)
    td = 1e-6 + 2e-4 / amp
    out, rep = rescale_delay_times(_shots(td, amp), 1000.0)
    np.testing.assert_allclose(out.delays, 1e-6 + 2e-4 / 1000.0, rtol=1e-12)
    assert rep.c == pytest.approx(2e-4)
    assert rep.excluded == ()
    # a record at the reference amplitude keeps its delay
    assert out.delays[4] == pytest.approx(td[4], rel=1e-12)


def test_rescale_shrinks_spread(rng):
    amp = 1000 * (1 + 0.05 * rng.standard_normal(200))
    td = 1e-6 + 5e-4 / amp + 1e-10 * rng.standard_normal(200)
    out, rep = rescale_delay_times(_shots(td, amp), 1000.0, band=10.0)
    assert np.std(td) / np.std(out.delays) >= 5
    assert rep.t0 == pytest.approx(1e-6, rel=1e-3)


def test_rescale_outliers_and_lists():
    amp = np.array([1000.0, 1010, 990, 1005, 995, 3000])
    td = 1e-6 + 2e-4 / amp
    sets = [_shots(td, amp), _shots(td[:5], amp[:5])]
    out, rep = rescale_delay_times(sets, 1000.0)
    assert (0, 5) in rep.excluded
    assert len(out[0]) == 5 and len(out[1]) == 5
    with pytest.raises(ParameterError):
        rescale_delay_times(_shots(td, amp), 0.0)
    with pytest.raises(FitError):
        fit_delay_hyperbola([1.0, 2.0], [3.0, 3.0])


def test_wrap_phase():
    x = np.array([np.pi, -np.pi, 3 * np.pi, 0.5, -7.0])
    w = wrap_phase(x)
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    np.testing.assert_allclose(np.exp(1j * w), np.exp(1j * x), atol=1e-12)


def test_phase_drift_removed(rng):
    td = rng.uniform(1e-6, 3e-6, 200)
    slope = 0.3e6
    ph = wrap_phase(slope * td + 2.5 + 0.05 * rng.standard_normal(td.size))
    out, (alpha, beta) = correct_phase_drift(_shots(td, np.full(td.size, 1e3), ph))
    assert alpha == pytest.approx(slope, abs=0.01e6)
    residual_slope, _ = fit_circular_linear(out.delays, out.phases)
    assert abs(residual_slope) < 0.01e6
    np.testing.assert_allclose(out.max_amps, 1e3)


def test_phase_drift_zero_slope_unchanged():
    td = np.linspace(1e-6, 2e-6, 20)
    ph = np.full(td.size, 0.0)
    out, (alpha, beta) = correct_phase_drift(_shots(td, np.full(td.size, 1.0), ph))
    assert abs(alpha) * np.ptp(td) < 1e-6
    np.testing.assert_allclose(out.phases, 0.0, atol=1e-6)


def test_phase_drift_near_boundary():
    td = np.linspace(1e-6, 2e-6, 20)
    ph = wrap_phase(np.pi + np.array([0.01, -0.01] * 10))
    out, _ = correct_phase_drift(_shots(td, np.ones(td.size), ph))
    assert np.ptp(np.angle(np.exp(1j * (out.phases - out.phases.mean())))) < 0.05
    with pytest.raises(FitError):
        fit_circular_linear([1.0, 1.0], [0.0, 0.1])


def test_trace_helpers():
    f = np.linspace(-10, 10, 2001)
    lor = 1 / (1 + (f - 2) ** 2)
    assert half_width_half_max(f, lor) == pytest.approx(1.0, rel=1e-3)
    two = 1 / (1 + (f - 4) ** 2) + 1 / (1 + (f + 4) ** 2)
    np.testing.assert_allclose(resonance_peaks(f, two), [-4, 4], atol=0.02)
    with pytest.raises(FitError):
        resonance_peaks(f, lor, n_peaks=2)
    with pytest.raises(FitError):
        half_width_half_max(f[:900], lor[:900])
