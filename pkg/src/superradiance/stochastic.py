"""Statistics of superradiant onset.

Initial tipping of the collective spin is a 2-D isotropic Gaussian of width
``theta_bar`` in the tangent plane at the north pole, optionally displaced by
``eta * theta_bar`` (the trigger).  Its modulus is Rician, its angle follows a
projected-normal law, and the delay of the burst is logarithmic in the modulus.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate as quad_
from scipy.special import i0e, ndtr

from .dynamics import BurstRecord, DetuningSchedule, SpinEnsembleState, extract_burst, integrate
from .errors import ParameterError, ShotError

THETA_BAR = 5.85e-4
T_R = 142e-9
TRIGGER_DELAY = 150e-9


@dataclass(frozen=True)
class TippingDistribution:
    width: float = THETA_BAR
    displacement: float = 0.0
    displacement_direction: float = 0.0

    def __post_init__(self):
        if not self.width > 0:
            raise ParameterError("width must be positive")
        if self.displacement < 0:
            raise ParameterError("displacement must be non-negative")


def rician_pdf(theta, dist: TippingDistribution):
    """Density of the tipping angle modulus (Rician)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ParameterError("theta must be non-negative")
    w, eta = dist.width, dist.displacement
    x = theta / w
    # exp(-(x^2+eta^2)/2) I0(x eta) = exp(-(x-eta)^2/2) i0e(x eta)
    return x / w * np.exp(-0.5 * (x - eta) ** 2) * i0e(x * eta)


def angular_pdf(phi, eta: float):
    """Projected-normal density of ``arg(S_-)`` for displacement ``eta`` along 0.

    Integrates to one over (-pi, pi] and equals 1/(2 pi) at ``eta = 0``.
    """
    phi = np.asarray(phi, dtype=float)
    c = eta * np.cos(phi)
    s = eta * np.sin(phi)
    return (np.exp(-0.5 * eta * eta) / (2 * np.pi)
            + c * np.exp(-0.5 * s * s) * ndtr(c) / np.sqrt(2 * np.pi))


def delay_from_theta(theta, t_r: float = T_R):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0) or np.any(theta >= 2):
        raise ParameterError("theta must lie in (0, 2)")
    return -2.0 * t_r * np.log(theta / 2.0)


def theta_from_delay(t_d, t_r: float = T_R):
    t_d = np.asarray(t_d, dtype=float)
    if not np.all(np.isfinite(t_d)):
        raise ParameterError("t_d must be finite")
    return 2.0 * np.exp(-t_d / (2.0 * t_r))


def delay_pdf(t_d, dist: TippingDistribution, t_r: float = T_R):
    """Delay-time density by change of variables from :func:`rician_pdf`."""
    t_d = np.asarray(t_d, dtype=float)
    if np.any(t_d <= 0):
        raise ParameterError("t_d must be positive")
    theta = theta_from_delay(t_d, t_r)
    return rician_pdf(theta, dist) * theta / (2.0 * t_r)


def delay_cdf(t_d, dist: TippingDistribution, t_r: float = T_R):
    """P(T_D <= t_d) = P(theta >= theta(t_d)), computed by quadrature of the density."""
    t_d = np.atleast_1d(np.asarray(t_d, dtype=float))
    out = np.empty_like(t_d)
    for k, t in enumerate(t_d):
        theta = 2.0 * np.exp(-t / (2.0 * t_r))
        out[k] = _rician_sf(theta, dist)
    return out


def _rician_sf(theta: float, dist: TippingDistribution) -> float:
    if theta <= 0:
        return 1.0
    w, eta = dist.width, dist.displacement
    f = lambda x: x * np.exp(-0.5 * (x - eta) ** 2) * i0e(x * eta)
    lo = theta / w
    hi = max(lo, eta) + 40.0
    if lo >= hi:
        return 0.0
    val, _ = quad_.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200, points=[eta] if lo < eta < hi else None)
    return float(min(max(val, 0.0), 1.0))


def rician_moments(dist: TippingDistribution) -> tuple[float, float]:
    """Closed-form mean and variance of the Rician modulus."""
    from scipy.special import i1e

    w, eta = dist.width, dist.displacement
    x = -0.5 * eta * eta
    # Laguerre L_{1/2}(x) with the exponential folded into i0e/i1e
    lag = (1 - x) * i0e(-x / 2) - x * i1e(-x / 2)
    mean = w * np.sqrt(np.pi / 2) * lag
    var = 2 * w * w + eta * eta * w * w - mean * mean
    return float(mean), float(var)


def expected_coherence(eta: float) -> float:
    """Pairwise <cos(phi_i - phi_j)> for independent angles from :func:`angular_pdf`.

    Equals ``|E exp(i phi)|^2``; by symmetry only the cosine moment survives.
    """
    m, _ = quad_.quad(lambda p: np.cos(p) * angular_pdf(p, eta), -np.pi, np.pi, epsabs=1e-12, limit=200)
    return float(m * m)


def sample_tipping(dist: TippingDistribution, size: int | None = None, rng=None):
    """Draw ``(theta, phi)`` from the displaced 2-D Gaussian."""
    rng = np.random.default_rng(rng)
    x0 = dist.displacement * dist.width * np.cos(dist.displacement_direction)
    y0 = dist.displacement * dist.width * np.sin(dist.displacement_direction)
    x = rng.normal(x0, dist.width, size)
    y = rng.normal(y0, dist.width, size)
    return np.hypot(x, y), np.arctan2(y, x)


def sample_initial_state(dist: TippingDistribution, p: float, ensemble, rng_seed=None):
    """Random collective tip: returns ``(theta, phi, SpinEnsembleState)``."""
    theta, phi = sample_tipping(dist, None, rng_seed)
    theta, phi = float(theta), float(phi)
    return theta, phi, SpinEnsembleState.tipped(ensemble, p, theta, phi)


def displacement_from_photons(n_trig, kappa_cal: float):
    n_trig = np.asarray(n_trig, dtype=float)
    if np.any(n_trig < 0):
        raise ParameterError("n_trig must be non-negative")
    return kappa_cal * np.sqrt(n_trig)


def fit_displacement_constant(n_trig, eta) -> float:
    """Least-squares ``kappa_cal`` in ``eta = kappa_cal * sqrt(n_trig)`` (line through origin)."""
    x = np.sqrt(np.asarray(n_trig, dtype=float))
    y = np.asarray(eta, dtype=float)
    denom = np.dot(x, x)
    if denom == 0:
        raise ParameterError("need at least one nonzero n_trig")
    return float(np.dot(x, y) / denom)


def phase_coherence(phases) -> float:
    """Mean of cos(phi_i - phi_j) over all unordered pairs i != j."""
    if isinstance(phases, ShotSet):
        phases = phases.phases
    phi = np.asarray(phases, dtype=float)
    n = phi.size
    if n < 2:
        raise ParameterError("need at least two phases")
    z = np.exp(1j * phi)
    s = np.abs(z.sum()) ** 2
    return float((s - n) / (n * (n - 1)))


def circular_mean(phases) -> float:
    return float(np.angle(np.mean(np.exp(1j * np.asarray(phases, dtype=float)))))


@dataclass(frozen=True)
class DelayLaw:
    """Fitted ``t_D = offset - 2 T_R log(theta)``."""

    t_r: float
    offset: float
    r_squared: float

    def delay(self, theta):
        return self.offset - 2.0 * self.t_r * np.log(np.asarray(theta, dtype=float))

    def effective_width(self, width: float) -> float:
        """Width that maps the offset law onto ``-2 T_R log(theta/2)`` exactly."""
        return 2.0 * width * np.exp(-self.offset / (2.0 * self.t_r))


def fit_delay_law(thetas, delays) -> DelayLaw:
    x = np.log(np.asarray(thetas, dtype=float))
    y = np.asarray(delays, dtype=float)
    if x.size < 3:
        raise ParameterError("need at least three points")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 0.0
    return DelayLaw(-slope / 2.0, float(intercept), float(r2))


@dataclass
class SimulationConfig:
    """Integration window and tolerances used for every shot."""

    t_end: float = 3.0e-6
    output_dt: float = 1e-9
    rtol: float = 1e-6
    atol: float = 1e-8
    t_min: float = 0.0
    schedule: DetuningSchedule | None = None
    p_jitter: float = 0.0


@dataclass
class ShotSet:
    records: list
    displacement: float = 0.0
    trigger_photons: float = float("nan")
    initial_thetas: np.ndarray = field(default_factory=lambda: np.empty(0))
    initial_phis: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return len(self.records)

    @property
    def delays(self) -> np.ndarray:
        return np.array([r.t_d for r in self.records])

    @property
    def phases(self) -> np.ndarray:
        return np.array([r.phase for r in self.records])

    @property
    def max_amps(self) -> np.ndarray:
        return np.array([r.max_amp for r in self.records])

    def replace_records(self, records) -> "ShotSet":
        return ShotSet(list(records), self.displacement, self.trigger_photons, self.initial_thetas, self.initial_phis)

    def summary(self) -> dict:
        d = self.delays
        return {
            "n_shots": len(self.records),
            "eta": self.displacement,
            "n_trig": self.trigger_photons,
            "median_t_d": float(np.median(d)),
            "var_t_d": float(np.var(d)),
            "median_max_amp": float(np.median(self.max_amps)),
            "coherence": phase_coherence(self.phases) if len(self.records) > 1 else float("nan"),
        }

    def rows(self):
        for k, r in enumerate(self.records):
            yield [k, r.t_d, r.i_d, r.q_d, r.max_amp, r.phase, self.displacement, self.trigger_photons]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["shot", "t_d", "i_d", "q_d", "max_amp", "phase", "eta", "n_trig"])
            for row in self.rows():
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return path

    @classmethod
    def from_csv(cls, path) -> "ShotSet":
        with Path(path).open() as fh:
            rows = list(csv.DictReader(fh))
        recs = [BurstRecord(float(r["t_d"]), float(r["i_d"]), float(r["q_d"]), float(r["max_amp"])) for r in rows]
        eta = float(rows[0]["eta"]) if rows else 0.0
        n_trig = float(rows[0]["n_trig"]) if rows else float("nan")
        return cls(recs, eta, n_trig)

    def summary_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return path


def shot_seeds(rng_seed, n_shots: int):
    """Independent per-shot generators derived from one seed."""
    ss = rng_seed if isinstance(rng_seed, np.random.SeedSequence) else np.random.SeedSequence(rng_seed)
    return [np.random.default_rng(s) for s in ss.spawn(n_shots)]


def _run_shot(k, rng, dist, p, ensemble, params, config, trigger):
    p_shot = p
    if config.p_jitter:
        p_shot = p * (1.0 + config.p_jitter * rng.standard_normal())
    theta, phi = sample_tipping(dist, None, rng)
    state = SpinEnsembleState.tipped(ensemble, p_shot, float(theta), float(phi))
    try:
        traj = integrate(0j, state, params, (0.0, config.t_end), config.output_dt, drive=trigger,
                         schedule=config.schedule, rtol=config.rtol, atol=config.atol)
    except Exception as exc:  # any integration failure aborts the whole set
        raise ShotError(str(exc), k) from exc
    rec = extract_burst(traj, config.t_min)
    if rec is None:
        raise ShotError("no burst", k)
    return float(theta), float(phi), rec


def monte_carlo_bursts(dist: TippingDistribution, p: float, ensemble, params, n_shots: int,
                       config: SimulationConfig | None = None, trigger=None, rng_seed=0,
                       n_jobs: int = 1, trigger_photons: float = float("nan")) -> ShotSet:
    """Simulate ``n_shots`` bursts from random initial tips.

    With ``trigger=None`` the trigger enters as the analytic displacement of
    ``dist``.  Passing a drive waveform injects it physically (typically with
    ``dist.displacement = 0``).  Results are ordered by shot index and depend
    only on ``rng_seed``.
    """
    if n_shots < 1:
        raise ParameterError("n_shots must be >= 1")
    config = config or SimulationConfig()
    rngs = shot_seeds(rng_seed, n_shots)
    args = [(k, rngs[k], dist, p, ensemble, params, config, trigger) for k in range(n_shots)]
    if n_jobs == 1:
        out = [_run_shot(*a) for a in args]
    else:
        from joblib import Parallel, delayed

        out = Parallel(n_jobs=n_jobs)(delayed(_run_shot)(*a) for a in args)
    thetas = np.array([o[0] for o in out])
    phis = np.array([o[1] for o in out])
    return ShotSet([o[2] for o in out], dist.displacement, trigger_photons, thetas, phis)


def delay_law_from_simulation(p: float, ensemble, params, thetas=None, config: SimulationConfig | None = None,
                              max_step: float = np.inf) -> tuple[DelayLaw, np.ndarray]:
    """Run noiseless tipped trajectories and fit the delay law."""
    config = config or SimulationConfig()
    if thetas is None:
        thetas = np.logspace(-5, -2, 10)
    delays = []
    for theta in thetas:
        state = SpinEnsembleState.tipped(ensemble, p, float(theta), 0.0)
        traj = integrate(0j, state, params, (0.0, config.t_end), config.output_dt, schedule=config.schedule,
                         rtol=config.rtol, atol=config.atol, max_step=max_step)
        delays.append(extract_burst(traj, config.t_min).t_d)
    delays = np.array(delays)
    return fit_delay_law(thetas, delays), delays


def trigger_displacement(trigger, p: float, ensemble, params, law: DelayLaw, width: float = THETA_BAR,
                         config: SimulationConfig | None = None, t_min: float = 0.0) -> float:
    """Equivalent displacement ``eta`` of a physical trigger pulse.

    Runs one noiseless trajectory (no initial tip) with the trigger and maps
    the resulting delay back through ``law`` to a tipping angle.
    """
    config = config or SimulationConfig()
    state = SpinEnsembleState.tipped(ensemble, p, 0.0, 0.0)
    traj = integrate(0j, state, params, (0.0, config.t_end), config.output_dt, drive=trigger,
                     schedule=config.schedule, rtol=config.rtol, atol=config.atol)
    rec = extract_burst(traj, max(t_min, trigger.end_time))
    if rec is None:
        raise ParameterError("trigger produced no burst")
    theta = np.exp((law.offset - rec.t_d) / (2.0 * law.t_r))
    return float(theta / width)


def trigger_pulse_for_photons(n_trig: float, params, duration: float = 100e-9, phase: float = 0.0,
                              start_time: float = TRIGGER_DELAY, dt: float = 1e-9):
    """Resonant rectangular pulse leaving ``n_trig`` photons in the empty cavity."""
    from .pulses import rectangular_pulse

    k = params.cavity_halfwidth
    amp = np.sqrt(n_trig) * k / (1.0 - np.exp(-k * duration))
    return rectangular_pulse(duration, amp, phase, dt, params.cavity_frequency, start_time)
