"""Scenario runners, one per experiment kind.

Each runner takes a normalized config (see :mod:`superradiance.config`) and
an :class:`~superradiance.io.OutputWriter`, writes its raw results and
returns a summary dict.
"""

from __future__ import annotations

import numpy as np

from . import calibration as cal
from .config import system_params
from .dynamics import DetuningSchedule, SpinEnsembleState, extract_burst, integrate, steady_state_transmission
from .ensemble import cooperativity, discretize, effective_linewidth, empty_ensemble, hz_to_rad
from .errors import FitError
from .pulses import ChirpSpec, chirp_target, compensate_drive, inversion_efficiency, pulse_train
from .stochastic import (
    SimulationConfig,
    TippingDistribution,
    delay_law_from_simulation,
    displacement_from_photons,
    monte_carlo_bursts,
    trigger_displacement,
    trigger_pulse_for_photons,
)


def _setup(cfg):
    params = system_params(cfg)
    ens = discretize(params.distribution, params, cfg["ensemble"]["n_bins"], cfg["ensemble"]["span"])
    return params, ens


def _sim_config(cfg, **kw) -> SimulationConfig:
    integ = cfg["integrator"]
    return SimulationConfig(t_end=integ["t_end"], output_dt=integ["output_dt"], rtol=integ["rtol"],
                            atol=integ["atol"], **kw)


def _cooperativity(params):
    gamma = effective_linewidth(params.distribution, params.spin_halfwidth)
    return gamma, cooperativity(params, gamma)


def run_self_decay(cfg, writer, jobs=1):
    sec = cfg["self_decay"]
    params, ens = _setup(cfg)
    integ = cfg["integrator"]
    if sec["inversions"] is not None:
        ps = np.asarray(sec["inversions"], dtype=float)
        holds = np.full(ps.size, np.nan)
    else:
        holds = np.asarray(sec["hold_times"], dtype=float)
        m = sec["inversion_model"]
        ps = cal.inversion_from_hold_time(holds, m["p0"], m["tau"], m["exponent"])
    rows = []
    for k, (p, hold) in enumerate(zip(ps, holds)):
        state = SpinEnsembleState.tipped(ens, float(p), sec["theta"], sec["phi"])
        traj = integrate(0j, state, params, (0.0, integ["t_end"]), integ["output_dt"], rtol=integ["rtol"],
                         atol=integ["atol"])
        writer.trajectory(f"traj_{k:02d}", traj, cfg["outputs"]["binary"])
        rec = extract_burst(traj)
        # a maximum on the last samples means the burst lies beyond the window
        complete = rec.t_d < traj.times[-1] - 2 * integ["output_dt"]
        rows.append([k, hold, p, rec.t_d, rec.i_d, rec.q_d, rec.max_amp, rec.phase, complete])
    writer.table("bursts", ["index", "hold_time", "p", "t_d", "i_d", "q_d", "max_amp", "phase", "complete"], rows)
    _, c = _cooperativity(params)
    summary = {"cooperativity": c, "inversions": ps, "max_amps": [r[6] for r in rows]}
    if np.all(np.isfinite(holds)) and holds.size >= 3:
        try:
            fit = cal.fit_exponential(holds, [r[6] for r in rows])
            summary["max_amp_decay_time"] = fit.timescale
        except FitError:
            pass
    return summary


def _shot_rows(sets):
    for s in sets:
        yield from s.rows()


SHOT_COLUMNS = ["shot", "t_d", "i_d", "q_d", "max_amp", "phase", "eta", "n_trig"]


def run_triggered_sr(cfg, writer, jobs=1):
    sec = cfg["triggered_sr"]
    params, ens = _setup(cfg)
    p = sec["p"]
    base = _sim_config(cfg, p_jitter=sec["p_jitter"])
    law, _ = delay_law_from_simulation(p, ens, params, config=base)
    kappa_cal = sec["kappa_cal"]
    if kappa_cal is None:
        # one noiseless trigger run fixes the photon-to-displacement constant
        n_ref = 1.0e4
        pulse = trigger_pulse_for_photons(n_ref, params, phase=sec["trigger_phase"])
        kappa_cal = trigger_displacement(pulse, p, ens, params, law, sec["width"], base) / np.sqrt(n_ref)

    n_trigs = [sec["n_trig_max"] * float(cal.db_to_factor(a)) for a in sec["attenuations_db"]]
    if sec["include_untriggered"]:
        n_trigs.append(0.0)
    seeds = np.random.SeedSequence(cfg["seed"]).spawn(len(n_trigs))
    sets = []
    for n, ss in zip(n_trigs, seeds):
        eta = float(displacement_from_photons(n, kappa_cal))
        if sec["path"] == "fast":
            dist = TippingDistribution(sec["width"], eta, sec["trigger_phase"])
            shots = monte_carlo_bursts(dist, p, ens, params, sec["n_shots"], base, rng_seed=ss, n_jobs=jobs,
                                       trigger_photons=n)
        else:
            trigger = trigger_pulse_for_photons(n, params, phase=sec["trigger_phase"]) if n > 0 else None
            t_min = trigger.end_time if trigger is not None else 0.0
            conf = _sim_config(cfg, p_jitter=sec["p_jitter"], t_min=t_min)
            shots = monte_carlo_bursts(TippingDistribution(sec["width"]), p, ens, params, sec["n_shots"], conf,
                                       trigger=trigger, rng_seed=ss, n_jobs=jobs, trigger_photons=n)
            shots.displacement = eta
        sets.append(shots)
    writer.table("shots", SHOT_COLUMNS, _shot_rows(sets))

    # systematic corrections, both fitted on the strongest trigger
    strongest = [int(np.argmax(n_trigs))]
    amps = np.concatenate([s.max_amps for s in sets])
    ref_amp = sec["reference_amp"] or float(np.median(sets[strongest[0]].max_amps))
    band = sec["outlier_band"]
    hyperbola = None
    if not sec["rescale"] or np.ptp(amps) <= 1e-3 * np.median(amps):
        # amplitudes too uniform to fit t_D(max|a|): leave delays and shots untouched
        hyperbola, band = (0.0, 0.0), np.inf
    try:
        rescaled, report = cal.rescale_delay_times(sets, ref_amp, strongest, band, hyperbola)
    except FitError:
        rescaled, report = cal.rescale_delay_times(sets, ref_amp, strongest, np.inf, (0.0, 0.0))
    alpha = beta = 0.0
    if sec["phase_correction"]:
        rescaled, (alpha, beta) = cal.correct_phase_drift(rescaled, strongest)
    writer.table("shots_corrected", SHOT_COLUMNS, _shot_rows(rescaled))

    return {
        "p": p,
        "kappa_cal": kappa_cal,
        "delay_law": {"t_r": law.t_r, "offset": law.offset, "r_squared": law.r_squared},
        "hyperbola": {"t0": report.t0, "c": report.c, "reference_amp": report.reference_amp},
        "excluded": [list(e) for e in report.excluded],
        "phase_drift": {"alpha": alpha, "beta": beta},
        "sets": [s.summary() for s in sets],
    }


def run_pulse_train(cfg, writer, jobs=1):
    sec = cfg["pulse_train"]
    params, ens = _setup(cfg)
    integ = cfg["integrator"]
    _, c = _cooperativity(params)
    p = sec["threshold_product"] / c
    pulse = trigger_pulse_for_photons(sec["pulse_photons"], params, sec["pulse_duration"], sec["phase"], 0.0,
                                      sec["dt"])
    train = pulse_train(pulse, sec["period"], sec["count"])
    t_end = sec["period"] * sec["count"]
    kw = dict(drive=train, rtol=integ["rtol"], atol=integ["atol"])
    out_dt = max(integ["output_dt"], sec["dt"])
    spins = integrate(0j, SpinEnsembleState.uniform(ens, p), params, (0.0, t_end), out_dt, **kw)
    empty = integrate(0j, SpinEnsembleState.uniform(empty_ensemble(params), 0.0), params, (0.0, t_end), out_dt,
                      **kw)
    writer.trajectory("traj_spins", spins, cfg["outputs"]["binary"])
    writer.trajectory("traj_empty", empty, cfg["outputs"]["binary"])
    writer.waveform("waveform", train)

    rows = []
    for k in range(sec["count"]):
        sel = (spins.times >= k * sec["period"]) & (spins.times < (k + 1) * sec["period"])
        a_s = np.abs(spins.cavity_amplitude[sel])
        a_e = np.abs(empty.cavity_amplitude[sel])
        rows.append([k, spins.times[sel][np.argmax(a_s)], a_s.max(), a_e.max(), a_s.max() / a_e.max(),
                     spins.inversion[sel][0]])
    writer.table("pulse_gains", ["pulse", "t_peak", "peak_spins", "peak_empty", "gain", "p_before"], rows)

    # undriven reference: a tipped, sub-threshold ensemble must not burst
    t_free = 10.0 / params.cavity_halfwidth
    free = integrate(0j, SpinEnsembleState.tipped(ens, p, 5.85e-4, 0.0), params, (0.0, t_free), out_dt,
                     rtol=integ["rtol"], atol=integ["atol"])
    gains = [r[4] for r in rows]
    return {
        "cooperativity": c,
        "p": p,
        "gains": gains,
        "gains_decreasing": bool(np.all(np.diff(gains) < 0)),
        "undriven": undriven_burst_check(free),
    }


def undriven_burst_check(traj) -> dict:
    """A burst shows up as a late amplitude maximum that drains the inversion."""
    mag = np.abs(traj.cavity_amplitude)
    k = int(np.argmax(mag))
    dp = float(traj.inversion[0] - traj.inversion.min())
    late_growth = bool(mag[-1] >= mag[k] and k == mag.size - 1)
    burst = bool(dp > 0.01 * abs(traj.inversion[0]) or late_growth)
    return {"peak_time": float(traj.times[k]), "peak_amp": float(mag[k]), "final_amp": float(mag[-1]),
            "inversion_drop": dp, "burst": burst}


def run_transmission_sweep(cfg, writer, jobs=1):
    sec = cfg["transmission_sweep"]
    params = system_params(cfg)
    f_c = cfg["system"]["cavity_frequency_hz"]
    f = f_c + np.linspace(-sec["span_hz"] / 2, sec["span_hz"] / 2, sec["points"])
    delta = hz_to_rad(sec["spin_detuning_hz"])
    ref = params.cavity_halfwidth  # empty-cavity resonant amplitude is 1/kappa
    rows, summary = [], {"traces": []}
    for k, p in enumerate(sec["inversions"]):
        a = steady_state_transmission(params, hz_to_rad(f), p, delta=delta)
        power = np.abs(a * ref) ** 2
        db = 10 * np.log10(power)
        writer.table(f"trace_{k:02d}", ["frequency_hz", "s_param_db"], zip(f, db), fmt="csv")
        rows.extend([fi, p, abs(ai), di] for fi, ai, di in zip(f, a, db))
        entry = {"p": p}
        try:
            peaks = cal.resonance_peaks(f, power)
            entry["splitting_hz"] = float(peaks[1] - peaks[0])
        except FitError:
            entry["hwhm_hz"] = cal.half_width_half_max(f, power)
            entry["peak_hz"] = float(f[np.argmax(power)])
        summary["traces"].append(entry)
    writer.table("transmission", ["frequency_hz", "p", "abs_a", "s_param_db"], rows)
    return summary


def run_inversion_scan(cfg, writer, jobs=1):
    sec = cfg["inversion_scan"]
    params, ens = _setup(cfg)
    integ = cfg["integrator"]
    dt = sec["dt"]
    out_dt = max(integ["output_dt"] / 2, dt)
    hold = hz_to_rad(sec["hold_detuning_hz"])
    rows, best = [], None
    for amp in sec["amplitudes"]:
        spec = ChirpSpec(sec["duration"], hz_to_rad(sec["sweep_span_hz"]), 0.0, amp, sec["envelope_fwhm"])
        t, target = chirp_target(spec, dt)
        drive = compensate_drive(target, params, 0.0, dt)
        for t_sw in sec["switch_times"]:
            sched = DetuningSchedule.switch(0.0, hold, t_sw, 0.0, max(sec["t_end"], t_sw + 1e-6))
            traj = integrate(0j, SpinEnsembleState.ground(ens), params, (0.0, sec["t_end"]), out_dt, drive=drive,
                             schedule=sched, rtol=integ["rtol"], atol=integ["atol"])
            eff = inversion_efficiency(traj, sec["duration"])
            rows.append([amp, t_sw, eff, inversion_efficiency(traj)])
            if best is None or eff > best[0]:
                best = (eff, amp, t_sw, t, target, drive, traj)
    writer.table("inversion_scan", ["amplitude", "switch_time", "efficiency", "efficiency_final"], rows)
    eff, amp, t_sw, t, target, drive, traj = best
    writer.waveform("waveform", drive)
    writer.table("target", ["t", "re_a", "im_a"], zip(t, target.real, target.imag))
    writer.trajectory("traj_best", traj, cfg["outputs"]["binary"])
    err = compensation_error(params, target, drive, sec["duration"])
    return {"best_efficiency": eff, "best_amplitude": amp, "best_switch_time": t_sw,
            "compensation_peak_error": err}


def compensation_error(params, target, drive, duration) -> float:
    """Peak ``|a - a_target| / max|a_target|`` for the drive on an empty cavity."""
    dt = drive.sample_period
    stride = max(int(round(1e-9 / dt)), 1)
    traj = integrate(0j, SpinEnsembleState.uniform(empty_ensemble(params), 0.0), params, (0.0, duration),
                     dt * stride, drive=drive, rtol=1e-10, atol=1e-12)
    ref = target[::stride][: traj.times.size]
    return float(np.max(np.abs(traj.cavity_amplitude[: ref.size] - ref)) / np.max(np.abs(target)))


def run_calibration(cfg, writer, jobs=1):
    sec = cfg["calibration"]
    out = {}
    f_c, _ = cal.COOLDOWNS[cfg["cooldown"]]
    wc = hz_to_rad(f_c)
    cp = sec["couplings"]
    kt_default = hz_to_rad(cp["kappa_tot_hz"]) if cp["kappa_tot_hz"] else cal.cooldown_halfwidth(cfg["cooldown"])
    fit = None
    if sec["traces"]:
        traces = {k: cal.read_trace(v) for k, v in sec["traces"].items()}
        fit = cal.fit_port_couplings(traces)
        c = fit.couplings
        out["port_fit"] = {
            "kappa_1_hz": c.kappa_1 / (2 * np.pi), "kappa_2_hz": c.kappa_2 / (2 * np.pi),
            "kappa_tot_hz": c.kappa_tot / (2 * np.pi), "a_1": c.a_1, "a_2": c.a_2, "a_3": c.a_3,
            "center_hz": fit.center_hz, "residual_norm": fit.residual_norm,
        }
    kappas = {1: hz_to_rad(cp["kappa_1_hz"]), 2: hz_to_rad(cp["kappa_2_hz"])}
    if fit is not None:
        kappas = {1: fit.couplings.kappa_1, 2: fit.couplings.kappa_2}
        kt_default = fit.couplings.kappa_tot
    rows = []
    for k, pulse in enumerate(sec["pulses"]):
        tag = pulse.get("cooldown", cfg["cooldown"])
        w = hz_to_rad(cal.COOLDOWNS[tag][0])
        kt = hz_to_rad(pulse["kappa_tot_hz"]) if "kappa_tot_hz" in pulse else kt_default
        att = pulse["attenuation_db"]
        if pulse.get("cold_correction", False):
            att = cal.line_attenuation_db(att, sec["cold_correction_db"])
        n = cal.pulse_photons(pulse["power_w"], w, float(cal.db_to_factor(att)), kappas[pulse.get("port", 1)], kt,
                              pulse.get("duration", 100e-9))
        rows.append([pulse.get("name", f"pulse_{k}"), pulse["power_w"], att, pulse.get("port", 1), n])
    if rows:
        writer.table("pulse_photons", ["name", "power_w", "attenuation_db", "port", "photons"], rows)
        out["pulse_photons"] = {r[0]: r[4] for r in rows}
    ladder = cal.StageLadder.from_db(sec["ladder"]["temperatures"], sec["ladder"]["lines_db"])
    out["thermal_photons"] = cal.thermal_ladder(ladder, wc)
    out["cavity_frequency_hz"] = f_c
    writer.json("calibration", out)
    return out


RUNNERS = {
    "self_decay": run_self_decay,
    "triggered_sr": run_triggered_sr,
    "pulse_train": run_pulse_train,
    "transmission_sweep": run_transmission_sweep,
    "inversion_scan": run_inversion_scan,
    "calibration": run_calibration,
}
