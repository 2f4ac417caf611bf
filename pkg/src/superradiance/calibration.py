"""Measurement-chain arithmetic: port couplings, photon numbers, thermal load and fits.

Attenuations are power ratios; ``db_to_factor(x) = 10**(x/10)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import constants
from scipy.optimize import least_squares

from .errors import FitError, ParameterError
from .ensemble import hz_to_rad

HBAR = constants.hbar
K_B = constants.k

COLD_LINE_CORRECTION_DB = 5.0

# (cavity frequency in Hz, loaded quality factor) per cooldown
COOLDOWNS = {
    "I": (3.098e9, 2587.0),
    "II": (3.105e9, 3010.0),
}


def db_to_factor(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def factor_to_db(factor):
    factor = np.asarray(factor, dtype=float)
    if np.any(factor <= 0):
        raise ParameterError("power factor must be positive")
    return 10.0 * np.log10(factor)


def line_attenuation_db(measured_db: float, cold_correction_db: float = COLD_LINE_CORRECTION_DB) -> float:
    """Room-temperature line attenuation shifted by the cold-resistance offset."""
    return float(measured_db + cold_correction_db)


def cooldown_halfwidth(tag: str) -> float:
    """kappa_tot (rad/s, HWHM) from the loaded Q of a cooldown."""
    try:
        f, q = COOLDOWNS[tag]
    except KeyError:
        raise ParameterError(f"unknown cooldown {tag!r}") from None
    return hz_to_rad(f) / (2.0 * q)


@dataclass(frozen=True)
class PortCouplings:
    kappa_1: float
    kappa_2: float
    kappa_tot: float
    a_1: float = 1.0
    a_2: float = 1.0
    a_3: float = 1.0

    def __post_init__(self):
        if self.kappa_1 < 0 or self.kappa_2 < 0:
            raise ParameterError("external couplings must be non-negative")
        if not self.kappa_tot > 0 or self.kappa_1 + self.kappa_2 > self.kappa_tot * (1 + 1e-12):
            raise ParameterError("need 0 <= kappa_1 + kappa_2 <= kappa_tot")
        for name in ("a_1", "a_2", "a_3"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ParameterError(f"{name} must lie in (0, 1]")


def s_parameters_on_resonance(c: PortCouplings) -> tuple[float, float, float]:
    """(|S11|^2, |S31|^2, |S32|^2) at the cavity resonance."""
    kt = c.kappa_tot
    s11 = c.a_1**2 * (2 * c.kappa_1 / kt - 1) ** 2
    s31 = c.a_1 * c.a_3 * (2 * np.sqrt(c.kappa_1 * c.kappa_2) / kt) ** 2
    s32 = c.a_2 * c.a_3 * (2 * c.kappa_2 / kt - 1) ** 2
    return float(s11), float(s31), float(s32)


def s_parameter_traces(c: PortCouplings, frequency_hz, center_hz: float) -> dict:
    """Power S-parameters versus probe frequency (linear units).

    Keys ``"s11"``, ``"s31"``, ``"s32"``; on resonance they reduce to
    :func:`s_parameters_on_resonance`.
    """
    d = hz_to_rad(np.asarray(frequency_hz, dtype=float) - center_hz)
    lor = 1.0 / (c.kappa_tot + 1j * d)
    return {
        "s11": c.a_1**2 * np.abs(2 * c.kappa_1 * lor - 1) ** 2,
        "s31": c.a_1 * c.a_3 * 4 * c.kappa_1 * c.kappa_2 * np.abs(lor) ** 2,
        "s32": c.a_2 * c.a_3 * np.abs(2 * c.kappa_2 * lor - 1) ** 2,
    }


@dataclass(frozen=True)
class PortFit:
    couplings: PortCouplings
    center_hz: float
    covariance: np.ndarray = field(repr=False)
    names: tuple = ("center_hz", "kappa_tot", "kappa_1", "kappa_2", "a_1", "a2a3", "a1a3")
    residual_norm: float = 0.0

    @property
    def stderr(self) -> dict:
        return dict(zip(self.names, np.sqrt(np.clip(np.diag(self.covariance), 0, None))))


def read_trace(path) -> tuple[np.ndarray, np.ndarray]:
    """Load a ``frequency_hz, s_param_db`` CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def write_trace(path, frequency_hz, s_param_db):
    table = np.column_stack([frequency_hz, s_param_db])
    np.savetxt(path, table, delimiter=",", header="frequency_hz,s_param_db", comments="", fmt="%.17g")


def fit_port_couplings(traces: dict, initial: PortCouplings | None = None, center_hz: float | None = None,
                       min_contrast_db: float = 3.0) -> PortFit:
    """Joint least-squares fit of S11, S31, S32 power traces (dB).

    ``traces`` maps ``"s11"``, ``"s31"``, ``"s32"`` to ``(frequency_hz, s_db)``;
    S31 is required.  Both ports are taken as under-coupled
    (``kappa_i <= kappa_tot/2``), which resolves the two-fold ambiguity of a
    reflection dip depth.
    """
    if "s31" not in traces:
        raise FitError("an S31 trace is required for kappa_tot")
    f31, s31_db = (np.asarray(x, dtype=float) for x in traces["s31"])
    if f31.size < 5:
        raise FitError("S31 trace too short")
    if np.ptp(s31_db) < min_contrast_db:
        raise FitError(f"S31 trace shows no resonance (contrast {np.ptp(s31_db):.2f} dB)")

    # initial guesses from the transmission peak
    k = int(np.argmax(s31_db))
    fc0 = center_hz if center_hz is not None else f31[k]
    lin = 10 ** (s31_db / 10)
    above = f31[lin >= lin[k] / 2]
    hw0 = hz_to_rad(max(0.5 * (above.max() - above.min()), np.min(np.diff(f31))))
    if initial is not None:
        kt0, k10, k20 = initial.kappa_tot, initial.kappa_1, initial.kappa_2
        a10 = initial.a_1
    else:
        kt0, k10, k20, a10 = hw0, 0.25 * hw0, 0.25 * hw0, 1.0
    base11 = _baseline(traces.get("s11"))
    base32 = _baseline(traces.get("s32"))
    if base11 is not None:
        a10 = min(np.sqrt(base11), 1.0)
    a2a3_0 = base32 if base32 is not None else 1.0
    a1a3_0 = lin[k] / max(4 * k10 * k20 / kt0**2, 1e-12)

    # parameters: center offset (in units of hw0), log kt, kappa fractions, log amplitudes
    x0 = np.array([
        hz_to_rad(fc0 - f31[k]) / hw0,
        np.log(kt0),
        np.clip(k10 / kt0, 1e-4, 0.4999),
        np.clip(k20 / kt0, 1e-4, 0.4999),
        np.log(a10),
        np.log(a2a3_0),
        np.log(a1a3_0),
    ])
    f_ref = f31[k]

    def unpack(x):
        fc = f_ref + x[0] * hw0 / (2 * np.pi)
        kt = np.exp(x[1])
        return fc, kt, x[2] * kt, x[3] * kt, np.exp(x[4]), np.exp(x[5]), np.exp(x[6])

    def model_db(x, key, f):
        fc, kt, k1, k2, a1, a2a3, a1a3 = unpack(x)
        lor = 1.0 / (kt + 1j * hz_to_rad(f - fc))
        if key == "s11":
            y = a1**2 * np.abs(2 * k1 * lor - 1) ** 2
        elif key == "s31":
            y = a1a3 * 4 * k1 * k2 * np.abs(lor) ** 2
        else:
            y = a2a3 * np.abs(2 * k2 * lor - 1) ** 2
        return 10 * np.log10(np.maximum(y, 1e-300))

    keys = [key for key in ("s11", "s31", "s32") if key in traces]

    def resid(x):
        out = []
        for key in keys:
            f, s = (np.asarray(v, dtype=float) for v in traces[key])
            out.append(model_db(x, key, f) - s)
        return np.concatenate(out)

    lo = np.array([-np.inf, -np.inf, 1e-6, 1e-6, -np.inf, -np.inf, -np.inf])
    hi = np.array([np.inf, np.inf, 0.5, 0.5, 0.0, 0.0, np.inf])
    x0 = np.clip(x0, lo + 1e-9, hi - 1e-9)
    sol = least_squares(resid, x0, bounds=(lo, hi), xtol=1e-10, ftol=1e-12, gtol=1e-12, max_nfev=5000)
    rnorm = float(np.linalg.norm(sol.fun))
    if not sol.success:
        raise FitError(f"S-parameter fit did not converge: {sol.message}", residual=rnorm)
    fc, kt, k1, k2, a1, a2a3, a1a3 = unpack(sol.x)
    a3 = min(a1a3 / a1, 1.0)
    a2 = min(a2a3 / a3, 1.0)
    try:
        couplings = PortCouplings(k1, k2, kt, a1, a2, a3)
    except ParameterError as exc:
        raise FitError(f"fit left the physical domain: {exc}", residual=rnorm) from exc

    # covariance in physical units via the chain rule on the Jacobian
    dof = max(sol.fun.size - sol.x.size, 1)
    s2 = rnorm**2 / dof
    try:
        cov_x = np.linalg.pinv(sol.jac.T @ sol.jac) * s2
    except np.linalg.LinAlgError:
        cov_x = np.full((7, 7), np.nan)
    scale = np.diag([hw0 / (2 * np.pi), kt, kt, kt, a1, a2a3, a1a3])
    # kappa_1 and kappa_2 also depend on kt; keep the leading-order term only
    cov = scale @ cov_x @ scale
    return PortFit(couplings, float(fc), cov, residual_norm=rnorm)


def _baseline(trace):
    if trace is None:
        return None
    _, s = trace
    # off-resonant level: the upper decile of the trace
    return float(10 ** (np.percentile(np.asarray(s, dtype=float), 90) / 10))


def pulse_photons(p_in: float, omega_c: float, a_line: float, kappa_in: float, kappa_tot: float, dt: float) -> float:
    """Intracavity photons at the end of a rectangular pulse of length ``dt``."""
    for name, v in (("p_in", p_in), ("omega_c", omega_c), ("a_line", a_line), ("kappa_in", kappa_in),
                    ("kappa_tot", kappa_tot)):
        if not v > 0:
            raise ParameterError(f"{name} must be positive")
    if dt < 0:
        raise ParameterError("dt must be non-negative")
    return float(p_in / (HBAR * omega_c) * a_line * 2 * kappa_in / kappa_tot**2 * (1 - np.exp(-dt * kappa_tot)) ** 2)


def drive_from_power(p_in: float, kappa_in: float, omega_c: float) -> float:
    """Drive rate ``eta_d = sqrt(2 kappa_in P / (hbar omega_c))`` in sqrt(photon)/s."""
    if p_in < 0:
        raise ParameterError("power must be non-negative")
    return float(np.sqrt(2 * kappa_in * p_in / (HBAR * omega_c)))


def cavity_charging(eta_d, kappa_tot: float, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("t must be non-negative")
    return eta_d / kappa_tot * (1 - np.exp(-t * kappa_tot))


def bose_occupation(temperature, omega):
    temperature = np.asarray(temperature, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        x = HBAR * omega / (K_B * temperature)
        return np.where(temperature > 0, 1.0 / np.expm1(x), 0.0)


@dataclass(frozen=True)
class StageLadder:
    """Stage temperatures (K, top to bottom) and per-line attenuations between stages.

    ``lines`` maps a line name to ``len(temperatures) - 1`` power factors
    ``A_{i,i+1}``; ``None`` marks a stage where the line is not connected from
    above (no carry-over).
    """

    temperatures: tuple
    lines: dict

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temperatures)
        if not temps:
            raise ParameterError("ladder needs at least one stage")
        if any(t < 0 for t in temps):
            raise ParameterError("temperatures must be non-negative")
        if any(b >= a for a, b in zip(temps, temps[1:])):
            raise ParameterError("temperatures must decrease down the ladder")
        lines = {}
        for name, att in self.lines.items():
            att = tuple(None if a is None else float(a) for a in att)
            if len(att) != len(temps) - 1:
                raise ParameterError(f"line {name!r} needs {len(temps) - 1} attenuations")
            if any(a is not None and not 0 <= a <= 1 for a in att):
                raise ParameterError(f"line {name!r}: attenuation factors must lie in [0, 1]")
            lines[name] = att
        object.__setattr__(self, "temperatures", temps)
        object.__setattr__(self, "lines", lines)

    @classmethod
    def from_db(cls, temperatures, lines_db: dict) -> "StageLadder":
        lines = {k: [None if v is None else float(db_to_factor(v)) for v in vals] for k, vals in lines_db.items()}
        return cls(tuple(temperatures), lines)

    @classmethod
    def table_s3(cls) -> "StageLadder":
        """Reported refrigerator stages and line attenuations."""
        return cls.from_db(
            (296.0, 42.0, 4.0, 0.9, 0.12, 0.025),
            {
                "pump": [None, None, None, -1.5, -2.0],
                "probe": [-1.5, -21.5, -1.5, -11.5, -13.5],
                "out": [-1.5, -1.5, -1.5, -1.5, -30.0],
            },
        )


def thermal_ladder(ladder: StageLadder, omega_c: float) -> dict:
    """Thermal photon number at the base stage for every line and in total."""
    nbar = bose_occupation(np.array(ladder.temperatures), omega_c)
    out = {}
    for name, att in ladder.lines.items():
        n = float(nbar[0])
        for a, nb in zip(att, nbar[1:]):
            n = float(nb) + (0.0 if a is None else a * n)
        out[name] = n
    out["total"] = float(sum(out.values()))
    return out


class DispersiveValidityWarning(UserWarning):
    """Detuning not large compared to the collective coupling."""


def dispersive_shift(g_coll: float, delta: float, polarization: float, min_ratio: float = 5.0) -> float:
    """Cavity pull ``chi = g_coll^2 p / delta`` for normalized inversion ``p``.

    ``delta`` is the spin-minus-cavity detuning.  Warns when
    ``|delta| < min_ratio * g_coll``.
    """
    if delta == 0:
        raise ParameterError("delta must be nonzero")
    if abs(delta) < min_ratio * g_coll:
        warnings.warn(f"|delta| < {min_ratio} g_coll: dispersive approximation invalid", DispersiveValidityWarning)
    return float(g_coll**2 * polarization / delta)


@dataclass(frozen=True)
class DecayFit:
    amplitude: float
    timescale: float
    residual_norm: float
    degenerate: bool = False
    exponent: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.degenerate:
            return np.full_like(t, self.amplitude)
        return self.amplitude * np.exp(-((t / self.timescale) ** self.exponent))


def _check_series(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.size < 3:
        raise FitError("need at least three (t, y) points")
    if np.any(y <= 0):
        raise FitError("ordinates must be positive")
    return t, y


def fit_exponential(t, y) -> DecayFit:
    """``y = A exp(-t/tau)`` by linear least squares on ``log y``."""
    t, y = _check_series(t, y)
    ly = np.log(y)
    slope, intercept = np.polyfit(t, ly, 1)
    rnorm = float(np.linalg.norm(ly - (slope * t + intercept)))
    # a slope indistinguishable from zero over the sampled range means no decay
    if slope >= 0 or abs(slope) * np.ptp(t) < 1e-9:
        return DecayFit(float(np.exp(np.mean(ly))), np.inf, rnorm, True)
    return DecayFit(float(np.exp(intercept)), float(-1.0 / slope), rnorm)


def fit_stretched_exponential(t, y, exponent: float = 0.5) -> DecayFit:
    """``y = A exp(-(t/tau)**exponent)`` by damped nonlinear least squares."""
    t, y = _check_series(t, y)
    if np.any(t < 0):
        raise FitError("t must be non-negative")
    u = t**exponent
    lin = fit_exponential(u, y)
    if lin.degenerate:
        return DecayFit(lin.amplitude, np.inf, lin.residual_norm, True, exponent)
    # log-parameterized: x = (log A, log tau)
    x0 = np.array([np.log(lin.amplitude), np.log(lin.timescale) / exponent])

    def resid(x):
        return np.exp(x[0]) * np.exp(-u * np.exp(-exponent * x[1])) - y

    def jac(x):
        a = np.exp(x[0])
        r = np.exp(-exponent * x[1])
        e = np.exp(-u * r)
        return np.column_stack([a * e, a * e * u * r * exponent])

    sol = least_squares(resid, x0, jac=jac, method="lm", xtol=1e-10, ftol=1e-12)
    if not sol.success:
        raise FitError(f"stretched-exponential fit failed: {sol.message}", residual=float(np.linalg.norm(sol.fun)))
    return DecayFit(float(np.exp(sol.x[0])), float(np.exp(sol.x[1])), float(np.linalg.norm(sol.fun)), False, exponent)


def t1_from_dispersive_shift(t, chi, chi_final: float | None = None) -> DecayFit:
    """Relaxation time from a dispersive-shift series.

    With ``chi_final`` the fit is on ``|chi_final - chi|`` (recovery towards the
    final value); otherwise ``|chi|`` is taken to decay to zero.
    """
    chi = np.asarray(chi, dtype=float)
    y = np.abs(chi if chi_final is None else chi_final - chi)
    return fit_exponential(t, y)


def inversion_from_hold_time(hold_time, p0: float, tau: float, exponent: float = 0.5):
    """Inversion remaining after a hold, from a stretched-exponential fit."""
    hold_time = np.asarray(hold_time, dtype=float)
    if np.any(hold_time < 0):
        raise ParameterError("hold time must be non-negative")
    return p0 * np.exp(-((hold_time / tau) ** exponent))


@dataclass(frozen=True)
class RescaleReport:
    t0: float
    c: float
    reference_amp: float
    excluded: tuple


def _mad_mask(x, band):
    med = np.median(x)
    mad = np.median(np.abs(x - med))
    if mad == 0:
        return np.ones(x.size, dtype=bool)
    return np.abs(x - med) <= band * mad


def fit_delay_hyperbola(t_d, max_amp) -> tuple[float, float]:
    """Least-squares ``t_D = t0 + C / max_amp``."""
    x = 1.0 / np.asarray(max_amp, dtype=float)
    y = np.asarray(t_d, dtype=float)
    if x.size < 2 or np.ptp(x) == 0:
        raise FitError("need at least two distinct amplitudes")
    c, t0 = np.polyfit(x, y, 1)
    return float(t0), float(c)


def rescale_delay_times(shots, reference_amp: float, fit_subset=None, band: float = 2.5,
                        hyperbola: tuple | None = None):
    """Remove the systematic ``t_D`` dependence on the burst amplitude.

    ``shots`` is a :class:`ShotSet` or a list of them (one per trigger
    power).  ``fit_subset`` selects the sets used to fit ``(t0, C)``; by
    default the set with the largest median amplitude.  Records whose
    ``max_amp`` falls outside ``band`` median absolute deviations of their own
    set are dropped and listed in the report as ``(set, shot)`` pairs.
    """
    single = not isinstance(shots, (list, tuple))
    sets = [shots] if single else list(shots)
    if not reference_amp > 0:
        raise ParameterError("reference_amp must be positive")
    for s in sets:
        if len(s) == 0:
            raise ParameterError("empty shot set")
        if np.any(s.max_amps <= 0):
            raise ParameterError("max_amp must be positive")
    keep = [_mad_mask(s.max_amps, band) for s in sets]
    if hyperbola is None:
        if fit_subset is None:
            fit_subset = [int(np.argmax([np.median(s.max_amps) for s in sets]))]
        td = np.concatenate([sets[i].delays[keep[i]] for i in fit_subset])
        amp = np.concatenate([sets[i].max_amps[keep[i]] for i in fit_subset])
        t0, c = fit_delay_hyperbola(td, amp)
    else:
        t0, c = hyperbola
    from .dynamics import BurstRecord

    out, excluded = [], []
    for i, (s, m) in enumerate(zip(sets, keep)):
        recs = []
        for k, (r, ok) in enumerate(zip(s.records, m)):
            if not ok:
                excluded.append((i, k))
                continue
            recs.append(BurstRecord(r.t_d - c / r.max_amp + c / reference_amp, r.i_d, r.q_d, r.max_amp))
        out.append(s.replace_records(recs))
    report = RescaleReport(t0, c, reference_amp, tuple(excluded))
    return (out[0] if single else out), report


def wrap_phase(phi):
    """Wrap angles to (-pi, pi]."""
    phi = np.asarray(phi, dtype=float)
    return np.pi - np.mod(np.pi - phi, 2 * np.pi)


def fit_circular_linear(t, phi) -> tuple[float, float]:
    """Slope and intercept of ``phi = alpha t + beta`` on the circle.

    Maximizes the mean resultant length of ``phi - alpha t``, so the fit is
    insensitive to 2-pi wrapping.
    """
    t = np.asarray(t, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if t.size < 2 or np.ptp(t) == 0:
        raise FitError("need at least two distinct delay times")
    span = np.ptp(t)
    tc = t - t.mean()

    def score(alpha):
        return np.abs(np.mean(np.exp(1j * (phi - alpha * tc))))

    # coarse scan wide enough for several turns across the span, then refine
    grid = np.linspace(-8 * np.pi / span, 8 * np.pi / span, 4001)
    vals = np.array([score(a) for a in grid])
    k = int(np.argmax(vals))
    step = grid[1] - grid[0]
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda a: -score(a), bounds=(grid[k] - step, grid[k] + step), method="bounded",
                          options={"xatol": 1e-12 / span})
    alpha = float(res.x)
    beta_c = float(np.angle(np.mean(np.exp(1j * (phi - alpha * tc)))))
    return alpha, float(wrap_phase(beta_c - alpha * t.mean()))


def correct_phase_drift(shots, fit_subset=None):
    """Subtract a linear phase drift in ``t_D`` fitted on a subset of shot sets.

    Accepts a :class:`ShotSet` or a list; returns the same shape plus
    ``(alpha, beta)``.  Quadratures are rotated so ``phase`` stays consistent.
    """
    single = not isinstance(shots, (list, tuple))
    sets = [shots] if single else list(shots)
    if fit_subset is None:
        fit_subset = [int(np.argmax([np.median(s.max_amps) for s in sets]))]
    td = np.concatenate([sets[i].delays for i in fit_subset])
    ph = np.concatenate([sets[i].phases for i in fit_subset])
    alpha, beta = fit_circular_linear(td, ph)
    from .dynamics import BurstRecord

    out = []
    for s in sets:
        recs = []
        for r in s.records:
            new = float(wrap_phase(r.phase - alpha * r.t_d - beta))
            recs.append(BurstRecord(r.t_d, r.max_amp * np.cos(new), r.max_amp * np.sin(new), r.max_amp))
        out.append(s.replace_records(recs))
    return (out[0] if single else out), (alpha, beta)


def resonance_peaks(frequency, power, n_peaks: int = 2, prominence: float = 0.05) -> np.ndarray:
    """Frequencies of the ``n_peaks`` most prominent maxima, sorted ascending.

    ``prominence`` is relative to the trace maximum.  Peak positions are
    refined by a parabola through the three highest samples.
    """
    from scipy.signal import find_peaks

    f = np.asarray(frequency, dtype=float)
    y = np.asarray(power, dtype=float)
    idx, props = find_peaks(y, prominence=prominence * y.max())
    if idx.size < n_peaks:
        raise FitError(f"found {idx.size} peaks, expected {n_peaks}")
    idx = np.sort(idx[np.argsort(props["prominences"])[::-1][:n_peaks]])
    out = []
    for k in idx:
        if 0 < k < y.size - 1:
            y0, y1, y2 = y[k - 1], y[k], y[k + 1]
            denom = y0 - 2 * y1 + y2
            frac = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
            out.append(f[k] + frac * (f[k + 1] - f[k]))
        else:
            out.append(f[k])
    return np.array(out)


def half_width_half_max(frequency, power) -> float:
    """HWHM of a single peak by linear interpolation of the half-power crossings."""
    f = np.asarray(frequency, dtype=float)
    y = np.asarray(power, dtype=float)
    k = int(np.argmax(y))
    half = 0.5 * y[k]
    left = np.nonzero(y[:k] < half)[0]
    right = np.nonzero(y[k:] < half)[0]
    if left.size == 0 or right.size == 0:
        raise FitError("peak not resolved within the trace")
    i, j = left[-1], k + right[0]
    f_lo = np.interp(half, [y[i], y[i + 1]], [f[i], f[i + 1]])
    f_hi = np.interp(half, [y[j], y[j - 1]], [f[j], f[j - 1]])
    return float(0.5 * (f_hi - f_lo))
