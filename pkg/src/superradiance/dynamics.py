"""Semi-classical Maxwell-Bloch dynamics of a cavity coupled to a binned spin ensemble.

Equations of motion (rotating frame at the probe/drive frequency ``omega_p``)::

    da/dt      = -(i*Dc + kappa) a - i g0 sum_j n_j s_j + eta(t)
    ds_j/dt    = -(i*Ds_j + gamma) s_j + i g0 a z_j
    dz_j/dt    = 2i g0 (conj(a) s_j - a conj(s_j))

with ``Dc = omega_c - omega_p`` and ``Ds_j = omega_j + delta(t) - omega_p``.
``s_j`` is the per-bin coherence <sigma_->, ``z_j`` the per-bin <sigma_z>.
The quantity ``4|s_j|^2 + z_j^2`` is conserved when ``gamma = 0``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .ensemble import BinnedEnsemble, SystemParams, cooperativity, q_gaussian_density
from .errors import ParameterError, StiffnessError
from .pulses import DriveWaveform

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
SWITCH_RAMP = 200e-9
_CHUNK = 200


@dataclass(frozen=True)
class SpinEnsembleState:
    ensemble: BinnedEnsemble
    coherences: np.ndarray
    inversions: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.coherences, dtype=complex)
        z = np.asarray(self.inversions, dtype=float)
        n = self.ensemble.n_bins
        if s.shape != (n,) or z.shape != (n,):
            raise ParameterError(f"state arrays must have length {n}")
        object.__setattr__(self, "coherences", s)
        object.__setattr__(self, "inversions", z)

    @classmethod
    def uniform(cls, ensemble: BinnedEnsemble, inversion: float, coherence: complex = 0.0) -> "SpinEnsembleState":
        n = ensemble.n_bins
        return cls(ensemble, np.full(n, coherence, dtype=complex), np.full(n, float(inversion)))

    @classmethod
    def ground(cls, ensemble: BinnedEnsemble) -> "SpinEnsembleState":
        return cls.uniform(ensemble, -1.0)

    @classmethod
    def tipped(cls, ensemble: BinnedEnsemble, p: float, theta: float, phi: float) -> "SpinEnsembleState":
        """Collective tip of every bin by ``theta`` towards azimuth ``phi``."""
        return cls.uniform(ensemble, p * np.cos(theta), 0.5 * p * np.sin(theta) * np.exp(1j * phi))

    @property
    def inversion(self) -> float:
        """p = 2 S_z / N."""
        return float(np.dot(self.ensemble.bin_weights, self.inversions))

    @property
    def transverse(self) -> complex:
        """S_- / N."""
        return complex(np.dot(self.ensemble.bin_weights, self.coherences))

    def bloch_norm(self) -> np.ndarray:
        return 4.0 * np.abs(self.coherences) ** 2 + self.inversions**2


@dataclass(frozen=True)
class DetuningSchedule:
    """Piecewise-linear spin detuning ``delta(t)`` in rad/s.

    ``segments`` is a list of ``(t_start, t_end, value_start, value_end)``.
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple(tuple(float(v) for v in s) for s in self.segments)
        if not segs:
            raise ParameterError("schedule needs at least one segment")
        for (a0, a1, _, _), (b0, _, _, _) in zip(segs, segs[1:]):
            if abs(a1 - b0) > 1e-15 * max(1.0, abs(a1)):
                raise ParameterError("schedule segments must be contiguous")
        for s in segs:
            if not s[1] > s[0]:
                raise ParameterError("segment end must exceed its start")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, value: float, t_start: float = 0.0, t_end: float = np.inf) -> "DetuningSchedule":
        return cls(((t_start, t_end, value, value),))

    @classmethod
    def switch(cls, before: float, after: float, t_switch: float, t_start: float = 0.0,
               t_end: float = np.inf, ramp: float = SWITCH_RAMP) -> "DetuningSchedule":
        """Hold ``before`` until ``t_switch``, then ramp linearly to ``after``."""
        segs = []
        if t_switch > t_start:
            segs.append((t_start, t_switch, before, before))
        segs.append((t_switch, t_switch + ramp, before, after))
        segs.append((t_switch + ramp, t_end, after, after))
        return cls(tuple(segs))

    @property
    def start(self) -> float:
        return self.segments[0][0]

    @property
    def end(self) -> float:
        return self.segments[-1][1]

    @property
    def breakpoints(self) -> list:
        return [s[0] for s in self.segments] + [self.end]

    def __call__(self, t: float) -> float:
        for t0, t1, v0, v1 in self.segments:
            if t < t1:
                if v0 == v1 or not np.isfinite(t1):
                    return v0
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        return self.segments[-1][3]


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    cavity_amplitude: np.ndarray
    inversion: np.ndarray
    transverse_magnitude: np.ndarray
    final_state: SpinEnsembleState | None = None
    bin_coherences: np.ndarray | None = field(default=None, repr=False)
    bin_inversions: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.times)
        for name in ("cavity_amplitude", "inversion", "transverse_magnitude"):
            if len(getattr(self, name)) != n:
                raise ParameterError(f"{name} length differs from times")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ParameterError("times must be strictly increasing")

    @property
    def photons(self) -> np.ndarray:
        return np.abs(self.cavity_amplitude) ** 2

    @property
    def final_amplitude(self) -> complex:
        return complex(self.cavity_amplitude[-1])

    def to_csv(self, path) -> Path:
        path = Path(path)
        a = self.cavity_amplitude
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re_a", "im_a", "n", "p", "s_minus_abs"])
            for row in zip(self.times, a.real, a.imag, np.abs(a) ** 2, self.inversion, self.transverse_magnitude):
                w.writerow([repr(float(v)) for v in row])
        return path

    def to_binary(self, path) -> Path:
        """Little-endian float64 rows of (t, re_a, im_a, n, p, s_minus_abs), no header."""
        a = self.cavity_amplitude
        table = np.column_stack([self.times, a.real, a.imag, np.abs(a) ** 2, self.inversion, self.transverse_magnitude])
        path = Path(path)
        table.astype("<f8").tofile(path)
        return path

    @classmethod
    def from_binary(cls, path) -> "Trajectory":
        table = np.fromfile(path, dtype="<f8").reshape(-1, 6)
        return cls(table[:, 0], table[:, 1] + 1j * table[:, 2], table[:, 4], table[:, 5])


@dataclass(frozen=True)
class BurstRecord:
    t_d: float
    i_d: float
    q_d: float
    max_amp: float

    @property
    def phase(self) -> float:
        return float(np.arctan2(self.q_d, self.i_d))


def derivatives(a, coherences, inversions, eta, delta, ensemble: BinnedEnsemble, params: SystemParams,
                omega_p: float | None = None, kappa: float | None = None, gamma_perp: float | None = None):
    """Time derivatives ``(da, ds, dz)`` of the Maxwell-Bloch system."""
    if omega_p is None:
        omega_p = params.cavity_frequency
    kappa = params.cavity_halfwidth if kappa is None else kappa
    gamma = params.spin_halfwidth if gamma_perp is None else gamma_perp
    g0 = ensemble.single_spin_coupling
    s = np.asarray(coherences, dtype=complex)
    z = np.asarray(inversions, dtype=float)
    dc = params.cavity_frequency - omega_p
    ds_det = ensemble.bin_frequencies + delta - omega_p
    da = -(1j * dc + kappa) * a - 1j * g0 * np.dot(ensemble.bin_counts, s) + eta
    ds = -(1j * ds_det + gamma) * s + 1j * g0 * a * z
    dz = -4.0 * g0 * (np.conj(a) * s).imag
    return da, ds, dz


def _breakpoints(t0, t1, drive, schedule):
    pts = {t0, t1}
    if drive is not None:
        pts.update(drive.edges)
    if schedule is not None:
        pts.update(schedule.breakpoints)
    pts = sorted(p for p in pts if t0 <= p <= t1)
    merged = [pts[0]]
    tol = 1e-9 * (t1 - t0)
    for p in pts[1:]:
        if p - merged[-1] > tol:
            merged.append(p)
    merged[-1] = t1
    return merged


def integrate(initial_amplitude: complex, initial: SpinEnsembleState, params: SystemParams,
              t_span: tuple, output_dt: float, drive: DriveWaveform | None = None,
              schedule: DetuningSchedule | None = None, rtol: float = DEFAULT_RTOL,
              atol: float = DEFAULT_ATOL, max_step: float = np.inf, kappa: float | None = None,
              gamma_perp: float | None = None, record_bins: bool = False, method: str = "RK45") -> Trajectory:
    """Integrate the Maxwell-Bloch equations and sample on a uniform grid.

    The rotating frame is the drive carrier when a drive is given, otherwise
    the cavity frequency.  Integration restarts at every drive edge and
    schedule knot so discontinuities never fall inside a step.
    """
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ParameterError("t_span must be increasing")
    if not output_dt > 0:
        raise ParameterError("output_dt must be positive")
    if drive is not None and drive.sample_period > output_dt * (1 + 1e-9):
        raise ParameterError("drive sample rate must be at least the output rate")
    if schedule is not None and (schedule.start > t0 or schedule.end < t1):
        raise ParameterError("t_span lies outside the detuning schedule")

    ens = initial.ensemble
    m = ens.n_bins
    omega_p = drive.carrier_frequency if drive is not None else params.cavity_frequency
    kap = params.cavity_halfwidth if kappa is None else kappa
    gam = params.spin_halfwidth if gamma_perp is None else gamma_perp
    g0 = ens.single_spin_coupling
    counts = ens.bin_counts
    weights = ens.bin_weights
    base_det = ens.bin_frequencies - omega_p
    dc = params.cavity_frequency - omega_p
    eta_full = drive.evaluator() if drive is not None else None
    seg = {"eta": lambda t: 0.0j}
    delta_fn = schedule if schedule is not None else (lambda t: 0.0)
    cav = -(1j * dc + kap)

    def rhs(t, y):
        a = y[0] + 1j * y[1]
        s = y[2:2 + m] + 1j * y[2 + m:2 + 2 * m]
        z = y[2 + 2 * m:]
        da = cav * a - 1j * g0 * np.dot(counts, s) + seg["eta"](t)
        ds = (-(gam + 1j * (base_det + delta_fn(t)))) * s + (1j * g0 * a) * z
        dz = -4.0 * g0 * (a.real * s.imag - a.imag * s.real)
        out = np.empty_like(y)
        out[0] = da.real
        out[1] = da.imag
        out[2:2 + m] = ds.real
        out[2 + m:2 + 2 * m] = ds.imag
        out[2 + 2 * m:] = dz
        return out

    # atol per component: amplitude measured in sqrt(photon) is rescaled so the
    # absolute floor is comparable to the spin components
    amp_scale = max(1.0, g0 * np.sqrt(params.total_spins) / max(kap, 1e-300))
    atol_vec = np.full(2 + 3 * m, atol)
    atol_vec[:2] = atol * amp_scale

    n_out = int(np.floor((t1 - t0) / output_dt * (1 + 1e-12))) + 1
    grid = np.minimum(t0 + output_dt * np.arange(n_out), t1)
    y = np.concatenate(([float(np.real(initial_amplitude)), float(np.imag(initial_amplitude))],
                        initial.coherences.real, initial.coherences.imag, initial.inversions))
    amp = np.empty(n_out, dtype=complex)
    inv = np.empty(n_out)
    trans = np.empty(n_out)
    s_rec = np.empty((n_out, m), dtype=complex) if record_bins else None
    z_rec = np.empty((n_out, m)) if record_bins else None

    def store(lo, block):
        hi = lo + block.shape[1]
        s_blk = block[2:2 + m] + 1j * block[2 + m:2 + 2 * m]
        z_blk = block[2 + 2 * m:]
        amp[lo:hi] = block[0] + 1j * block[1]
        inv[lo:hi] = weights @ z_blk
        trans[lo:hi] = np.abs(weights @ s_blk)
        if record_bins:
            s_rec[lo:hi] = s_blk.T
            z_rec[lo:hi] = z_blk.T

    filled = 0
    pts = _breakpoints(t0, t1, drive, schedule)
    for k, (ta, tb) in enumerate(zip(pts[:-1], pts[1:])):
        rest = grid[filled:]
        sel = rest if k == len(pts) - 2 else rest[rest < tb]
        seg["eta"] = _segment_drive(drive, eta_full, ta, tb)
        # chunk the output so only a few full-state samples live at once
        stops = [sel[i:i + _CHUNK] for i in range(0, sel.size, _CHUNK)] or [sel]
        t_start = ta
        for j, chunk in enumerate(stops):
            t_stop = tb if j == len(stops) - 1 else float(chunk[-1])
            t_eval = chunk if chunk.size and chunk[-1] == t_stop else np.append(chunk, t_stop)
            if t_stop > t_start:
                sol = solve_ivp(rhs, (t_start, t_stop), y, method=method, t_eval=t_eval,
                                rtol=rtol, atol=atol_vec, max_step=max_step)
                if sol.status != 0:
                    t_fail = float(sol.t[-1]) if sol.t.size else t_start
                    raise StiffnessError(f"integration failed near t={t_fail:.6e} s: {sol.message}", time=t_fail)
                ys = sol.y
            else:
                ys = np.repeat(y[:, None], t_eval.size, axis=1)
            if chunk.size:
                store(filled, ys[:, :chunk.size])
                filled += chunk.size
            y = ys[:, -1]
            t_start = t_stop
    if filled != n_out:
        raise StiffnessError("output grid not filled", time=float(grid[max(filled - 1, 0)]))

    final = SpinEnsembleState(ens, y[2:2 + m] + 1j * y[2 + m:2 + 2 * m], y[2 + 2 * m:])
    return Trajectory(
        times=grid,
        cavity_amplitude=amp,
        inversion=inv,
        transverse_magnitude=trans,
        final_state=final,
        bin_coherences=s_rec,
        bin_inversions=z_rec,
    )


def _segment_drive(drive, eta_full, ta, tb):
    # between consecutive edges a held drive is constant and a linear drive is
    # either fully inside or fully outside its support
    if drive is None:
        return lambda t: 0.0j
    mid = 0.5 * (ta + tb)
    if mid < drive.start_time or mid > drive.end_time:
        return lambda t: 0.0j
    if drive.interpolation == "hold":
        value = eta_full(mid)
        return lambda t: value
    t0, t1 = drive.start_time, drive.end_time
    return lambda t: eta_full(min(max(t, t0), t1))


def steady_state_transmission(params: SystemParams, omega_p, p: float, drive_amp: float = 1.0,
                              ensemble: BinnedEnsemble | None = None, delta: float = 0.0):
    """Linear-response steady-state cavity amplitude with all bins frozen at inversion ``p``.

    Without an explicit ``ensemble`` the spin sum is taken over the continuous
    q-Gaussian density by quadrature-grade sampling (4001 bins over +-20 FWHM).
    """
    if abs(p) > 1:
        raise ParameterError("|p| must be <= 1")
    if ensemble is None:
        ensemble = _dense_ensemble(params)
    omega_p = np.atleast_1d(np.asarray(omega_p, dtype=float))
    g0 = ensemble.single_spin_coupling
    dc = params.cavity_frequency - omega_p
    det = ensemble.bin_frequencies[None, :] + delta - omega_p[:, None]
    spin_sum = (ensemble.bin_counts[None, :] / (params.spin_halfwidth + 1j * det)).sum(axis=1)
    a = drive_amp / (params.cavity_halfwidth + 1j * dc - g0**2 * p * spin_sum)
    return a if a.size > 1 else complex(a[0])


_DENSE_CACHE: dict = {}


def _dense_ensemble(params: SystemParams, n_bins: int = 4001, span: float = 20.0) -> BinnedEnsemble:
    key = (params.distribution, params.total_spins, params.collective_coupling, n_bins, span)
    ens = _DENSE_CACHE.get(key)
    if ens is None:
        # nonuniform-free: fine uniform grid, span wide enough for the q-Gaussian tails
        spec = params.distribution
        half = span * spec.fwhm_gamma_q
        freqs = spec.center_frequency + np.linspace(-half, half, n_bins)
        w = q_gaussian_density(spec, freqs) * (freqs[1] - freqs[0])
        ens = BinnedEnsemble(freqs, w, params.total_spins, params.single_spin_coupling)
        _DENSE_CACHE[key] = ens
    return ens


def threshold_check(p: float, c: float) -> bool:
    return bool(p * c > 1.0)


def threshold_product(p: float, params: SystemParams, gamma_eff: float) -> float:
    return p * cooperativity(params, gamma_eff)


def extract_burst(traj: Trajectory, t_min: float = 0.0) -> BurstRecord | None:
    """Locate the global maximum of ``|a|`` for ``t >= t_min``.

    Ties resolve to the earliest sample.  ``t_D`` and the quadratures are
    refined by a parabola through the maximum and its neighbours.  Returns
    ``None`` when the amplitude is identically zero (no burst).
    """
    mask = traj.times >= t_min
    if not np.any(mask):
        raise ParameterError("trajectory has no samples beyond t_min")
    idx0 = int(np.argmax(mask))
    a = traj.cavity_amplitude[idx0:]
    t = traj.times[idx0:]
    mag = np.abs(a)
    k = int(np.argmax(mag))
    if mag[k] == 0.0:
        return None
    if 0 < k < mag.size - 1:
        y0, y1, y2 = mag[k - 1], mag[k], mag[k + 1]
        denom = y0 - 2.0 * y1 + y2
        frac = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        frac = float(np.clip(frac, -0.5, 0.5))
        dt = t[k + 1] - t[k]
        # quadratic interpolation of the complex amplitude at the refined time
        c0, c1, c2 = a[k - 1], a[k], a[k + 1]
        a_ref = c1 + 0.5 * frac * (c2 - c0) + 0.5 * frac**2 * (c2 - 2 * c1 + c0)
        t_d = t[k] + frac * dt
    else:
        a_ref = a[k]
        t_d = t[k]
    return BurstRecord(float(t_d), float(a_ref.real), float(a_ref.imag), float(abs(a_ref)))
