"""Drive waveform synthesis.

The complex drive ``eta(t)`` enters the cavity equation additively
(``da/dt = ... + eta``).  We use ``eta = I - iQ``: a real, positive drive is
pure I.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class DriveWaveform:
    """Uniformly sampled complex drive starting at ``start_time``.

    Sample ``k`` sits at ``start_time + k*sample_period``.  With
    ``interpolation="linear"`` the drive is piecewise linear between samples
    and zero outside ``[t_first, t_last]``; with ``"hold"`` each sample is held
    for one period, so the waveform spans ``len(samples)*sample_period``.
    """

    sample_period: float
    samples: np.ndarray
    carrier_frequency: float
    start_time: float = 0.0
    interpolation: str = "hold"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if not self.sample_period > 0:
            raise ParameterError("sample_period must be positive")
        if samples.ndim != 1 or samples.size == 0:
            raise ParameterError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("samples must be finite")
        if self.interpolation not in ("hold", "linear"):
            raise ParameterError(f"unknown interpolation {self.interpolation!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        n = self.samples.size
        return n * self.sample_period if self.interpolation == "hold" else (n - 1) * self.sample_period

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration

    @property
    def edges(self) -> list:
        """Times where the drive is discontinuous (start, end, held-sample jumps)."""
        pts = [self.start_time, self.end_time]
        if self.interpolation == "hold":
            jumps = np.nonzero(np.diff(self.samples) != 0)[0] + 1
            pts.extend((self.start_time + jumps * self.sample_period).tolist())
        return sorted(pts)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.sample_period * np.arange(self.samples.size)

    @property
    def i(self) -> np.ndarray:
        return self.samples.real

    @property
    def q(self) -> np.ndarray:
        return -self.samples.imag

    def energy(self) -> float:
        """``sum |eta|^2 dt`` over the samples."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.sample_period)

    def shifted(self, start_time: float) -> "DriveWaveform":
        return DriveWaveform(self.sample_period, self.samples, self.carrier_frequency, start_time, self.interpolation)

    def scaled(self, factor: complex) -> "DriveWaveform":
        return DriveWaveform(self.sample_period, self.samples * factor, self.carrier_frequency, self.start_time, self.interpolation)

    def evaluator(self) -> Callable[[float], complex]:
        """Return a fast scalar function ``t -> eta(t)``."""
        t0, dt = self.start_time, self.sample_period
        s = self.samples
        n = s.size
        if self.interpolation == "hold":
            t_end = t0 + n * dt

            def eta(t):
                if t < t0 or t >= t_end:
                    return 0.0j
                return s[min(int((t - t0) / dt), n - 1)]
        else:
            t_end = t0 + (n - 1) * dt

            def eta(t):
                if t < t0 or t > t_end:
                    return 0.0j
                x = (t - t0) / dt
                k = min(int(x), n - 2) if n > 1 else 0
                if n == 1:
                    return s[0]
                f = x - k
                return s[k] * (1.0 - f) + s[k + 1] * f

        return eta

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "I", "Q"])
            for t, i, q in zip(self.times, self.i, self.q):
                w.writerow([repr(float(t)), repr(float(i)), repr(float(q))])
        return path

    @classmethod
    def from_csv(cls, path, carrier_frequency: float, interpolation: str = "linear") -> "DriveWaveform":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t, i, q = data[:, 0], data[:, 1], data[:, 2]
        dt = float(t[1] - t[0]) if t.size > 1 else 1.0
        return cls(dt, i - 1j * q, carrier_frequency, float(t[0]), interpolation)


@dataclass(frozen=True)
class ChirpSpec:
    duration: float
    sweep_span: float
    center: float = 0.0
    peak_target_amplitude: float = 1.0
    envelope_fwhm: float | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ParameterError("duration must be positive")
        if self.sweep_span < 0:
            raise ParameterError("sweep_span must be non-negative")

    @property
    def fwhm(self) -> float:
        return self.envelope_fwhm if self.envelope_fwhm is not None else self.duration / 2.0


def linear_sweep(u):
    """Normalized instantaneous-frequency profile on u in [-1/2, 1/2]."""
    return u


def tanh_sweep(u, steepness: float = 4.0):
    return 0.5 * np.tanh(2.0 * steepness * u) / np.tanh(steepness)


def chirp_target(spec: ChirpSpec, dt: float, sweep_profile=linear_sweep) -> tuple[np.ndarray, np.ndarray]:
    """Target intracavity amplitude of a Gaussian-envelope chirp.

    The envelope is a Gaussian of the given FWHM with its value at the pulse
    edges subtracted, so the target vanishes at both ends.

    Returns ``(times, a_target)`` with times running from 0 to ``duration``.
    The instantaneous frequency relative to the rotating frame is
    ``center + sweep_span * profile(t/duration - 1/2)``; a field at
    ``+w`` above the frame evolves as ``exp(-i w t)``.
    """
    if dt > spec.duration / 1000.0:
        raise ParameterError("dt must resolve the sweep (dt <= duration/1000)")
    n = int(round(spec.duration / dt)) + 1
    t = np.linspace(0.0, spec.duration, n)
    tc = spec.duration / 2.0
    sigma = spec.fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    # offset-subtracted Gaussian: starts and ends at zero so an empty cavity can follow it
    gauss = np.exp(-0.5 * ((t - tc) / sigma) ** 2)
    edge = np.exp(-0.5 * (tc / sigma) ** 2)
    envelope = spec.peak_target_amplitude * (gauss - edge) / (1.0 - edge)
    u = t / spec.duration - 0.5
    inst = spec.center + spec.sweep_span * sweep_profile(u)
    # phase = cumulative integral of the instantaneous frequency (trapezoid)
    phase = np.concatenate(([0.0], np.cumsum(0.5 * (inst[1:] + inst[:-1]) * np.diff(t))))
    return t, envelope * np.exp(-1j * phase)


def compensate_drive(a_target, params, cavity_detuning: float, dt: float, start_time: float = 0.0,
                     carrier_frequency: float | None = None) -> DriveWaveform:
    """Drive that produces ``a_target`` in the empty cavity.

    Inverts ``da/dt = -(i*Dc + kappa) a + eta`` ignoring the spin term.
    """
    a = np.asarray(a_target, dtype=complex)
    if a.size < 3:
        raise ParameterError("a_target needs at least 3 samples")
    da = np.gradient(a, dt, edge_order=1)
    eta = da + (1j * cavity_detuning + params.cavity_halfwidth) * a
    if carrier_frequency is None:
        carrier_frequency = params.cavity_frequency - cavity_detuning
    return DriveWaveform(dt, eta, carrier_frequency, start_time, "linear")


def rectangular_pulse(duration: float, amplitude: float, phase: float, dt: float,
                      carrier_frequency: float = 0.0, start_time: float = 0.0) -> DriveWaveform:
    if not duration > 0:
        raise ParameterError("duration must be positive")
    n = max(int(round(duration / dt)), 1)
    samples = np.full(n, amplitude * np.exp(1j * phase), dtype=complex)
    return DriveWaveform(duration / n, samples, carrier_frequency, start_time, "hold")


def pulse_train(pulse: DriveWaveform, period: float, count: int) -> DriveWaveform:
    """Repeat ``pulse`` every ``period`` seconds, ``count`` times."""
    if count < 1:
        raise ParameterError("count must be >= 1")
    dt = pulse.sample_period
    n_period = int(round(period / dt))
    if n_period < pulse.samples.size or abs(n_period * dt - period) > 1e-6 * period:
        raise ParameterError("period must be an integer multiple of the sample period and >= pulse length")
    block = np.zeros(n_period, dtype=complex)
    block[: pulse.samples.size] = pulse.samples
    return DriveWaveform(dt, np.tile(block, count), pulse.carrier_frequency, pulse.start_time, "hold")


def inversion_efficiency(traj, t_end: float | None = None) -> float:
    """``(p + 1)/2`` at ``t_end`` (default: end of the trajectory)."""
    if t_end is None:
        p = traj.inversion[-1]
    else:
        p = float(np.interp(t_end, traj.times, traj.inversion))
    return float((p + 1.0) / 2.0)
