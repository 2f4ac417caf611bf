"""Inhomogeneously broadened spin ensemble.

All frequencies and rates are angular (rad/s).  The spin frequency density is a
q-Gaussian parameterized by its FWHM; ``q -> 1`` recovers a Gaussian and
``q = 2`` a Lorentzian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import NumericalToleranceError, ParameterError

TWO_PI = 2.0 * np.pi


def hz_to_rad(f):
    """Ordinary frequency (Hz) to angular frequency (rad/s)."""
    return TWO_PI * f


def rad_to_hz(w):
    """Angular frequency (rad/s) to ordinary frequency (Hz)."""
    return w / TWO_PI


@dataclass(frozen=True)
class QGaussianSpec:
    center_frequency: float
    fwhm_gamma_q: float
    shape_q: float = 1.39

    def __post_init__(self):
        if not (1.0 < self.shape_q < 3.0):
            raise ParameterError(f"shape_q must lie in (1, 3), got {self.shape_q}")
        if not self.fwhm_gamma_q > 0:
            raise ParameterError(f"fwhm_gamma_q must be positive, got {self.fwhm_gamma_q}")
        if not np.isfinite(self.center_frequency):
            raise ParameterError("center_frequency must be finite")


@dataclass(frozen=True)
class SystemParams:
    cavity_frequency: float
    cavity_halfwidth: float
    collective_coupling: float
    spin_halfwidth: float
    distribution: QGaussianSpec
    total_spins: float

    def __post_init__(self):
        for name in ("cavity_frequency", "cavity_halfwidth", "collective_coupling", "spin_halfwidth"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be strictly positive, got {value}")
        if not self.total_spins >= 1:
            raise ParameterError(f"total_spins must be >= 1, got {self.total_spins}")

    @property
    def single_spin_coupling(self) -> float:
        return self.collective_coupling / np.sqrt(self.total_spins)

    @property
    def spin_center(self) -> float:
        return self.distribution.center_frequency

    def replace(self, **changes) -> "SystemParams":
        from dataclasses import replace

        return replace(self, **changes)

    @classmethod
    def device_defaults(cls) -> "SystemParams":
        """Reported device constants, spins tuned onto the cavity."""
        wc = hz_to_rad(3.105e9)
        return cls(
            cavity_frequency=wc,
            cavity_halfwidth=hz_to_rad(0.51e6),
            collective_coupling=hz_to_rad(5.17e6),
            spin_halfwidth=hz_to_rad(208e3),
            distribution=QGaussianSpec(wc, hz_to_rad(11.0e6), 1.39),
            total_spins=6.4e12,
        )


@lru_cache(maxsize=256)
def _q_gaussian_constants(fwhm: float, q: float) -> tuple[float, float]:
    # beta fixes the FWHM; norm makes the density integrate to one
    beta = 4.0 * (2.0 ** (q - 1.0) - 1.0) / ((q - 1.0) * fwhm**2)
    a = (3.0 - q) / (2.0 * (q - 1.0))
    b = 1.0 / (q - 1.0)
    cq = np.sqrt(np.pi) * np.exp(gammaln(a) - gammaln(b)) / np.sqrt(q - 1.0)
    return beta, np.sqrt(beta) / cq


def q_gaussian_density(spec: QGaussianSpec, omega):
    """Normalized q-Gaussian density rho(omega) in s/rad."""
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ParameterError("omega must be finite")
    q = spec.shape_q
    beta, norm = _q_gaussian_constants(spec.fwhm_gamma_q, q)
    x = omega - spec.center_frequency
    return norm * (1.0 + (q - 1.0) * beta * x * x) ** (-1.0 / (q - 1.0))


@dataclass(frozen=True)
class BinnedEnsemble:
    """Equidistant frequency bins; weights are *not* renormalized after truncation."""

    bin_frequencies: np.ndarray
    bin_weights: np.ndarray
    total_spins: float
    single_spin_coupling: float
    bin_counts: np.ndarray = field(init=False)

    def __post_init__(self):
        freqs = np.asarray(self.bin_frequencies, dtype=float)
        weights = np.asarray(self.bin_weights, dtype=float)
        if freqs.shape != weights.shape or freqs.ndim != 1:
            raise ParameterError("bin_frequencies and bin_weights must be 1-D arrays of equal length")
        if np.any(weights < 0):
            raise ParameterError("bin weights must be non-negative")
        freqs.setflags(write=False)
        weights.setflags(write=False)
        counts = weights * self.total_spins
        counts.setflags(write=False)
        object.__setattr__(self, "bin_frequencies", freqs)
        object.__setattr__(self, "bin_weights", weights)
        object.__setattr__(self, "bin_counts", counts)

    @property
    def n_bins(self) -> int:
        return self.bin_frequencies.size

    @property
    def spacing(self) -> float:
        if self.n_bins < 2:
            return 0.0
        return float(self.bin_frequencies[1] - self.bin_frequencies[0])

    @property
    def weight_sum(self) -> float:
        return float(self.bin_weights.sum())


def discretize(spec: QGaussianSpec, params: SystemParams, n_bins: int = 1500, span: float = 4.0) -> BinnedEnsemble:
    """Sample the density on ``n_bins`` equidistant frequencies over +-span*FWHM."""
    if n_bins < 3:
        raise ParameterError("n_bins must be >= 3")
    if not span > 0:
        raise ParameterError("span must be positive")
    half = span * spec.fwhm_gamma_q
    freqs = spec.center_frequency + np.linspace(-half, half, n_bins)
    dw = freqs[1] - freqs[0]
    weights = q_gaussian_density(spec, freqs) * dw
    return BinnedEnsemble(freqs, weights, params.total_spins, params.single_spin_coupling)


def single_bin_ensemble(params: SystemParams, detuning: float = 0.0) -> BinnedEnsemble:
    """All spins at one frequency (no inhomogeneous broadening)."""
    return BinnedEnsemble(
        np.array([params.spin_center + detuning]),
        np.array([1.0]),
        params.total_spins,
        params.single_spin_coupling,
    )


def empty_ensemble(params: SystemParams) -> BinnedEnsemble:
    """A single zero-weight bin: the bare cavity (spins far detuned)."""
    return BinnedEnsemble(np.array([params.spin_center]), np.array([0.0]), params.total_spins,
                          params.single_spin_coupling)


def effective_linewidth(spec: QGaussianSpec, gamma_perp: float, omega0: float | None = None, rtol: float = 1e-9) -> float:
    """Effective ensemble linewidth from the continuous density.

    Evaluates ``[int rho(w) dw / (gamma_perp + i(w - w0))]^-1`` by adaptive
    quadrature and returns its real part.  ``omega0`` defaults to the
    distribution center.
    """
    if not gamma_perp > 0:
        raise ParameterError("gamma_perp must be positive")
    if omega0 is None:
        omega0 = spec.center_frequency
    shift = spec.center_frequency - omega0
    g = gamma_perp

    def kernel(x, part):
        rho = q_gaussian_density(spec, x + spec.center_frequency)
        d = x + shift
        denom = g * g + d * d
        return rho * (g / denom if part == 0 else -d / denom)

    # integrate in units of the FWHM for a well-scaled integrand
    scale = spec.fwhm_gamma_q
    pts = sorted({0.0, -shift / scale})
    total = 0.0 + 0.0j
    for part in (0, 1):
        f = lambda u: kernel(u * scale, part) * scale
        value, err = 0.0, 0.0
        for lo, hi in ((-np.inf, pts[0]), (pts[0], pts[-1]), (pts[-1], np.inf)):
            if lo == hi:
                continue
            v, e = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rtol, limit=400)
            value += v
            err += e
        if part == 0 and err > max(1e-6 * abs(value), 1e-300):
            raise NumericalToleranceError(f"effective linewidth quadrature did not converge (err={err:g})")
        total += value if part == 0 else 1j * value
    return float((1.0 / total).real)


def effective_linewidth_binned(ensemble: BinnedEnsemble, gamma_perp: float, omega0: float) -> float:
    """Same quantity as :func:`effective_linewidth` summed over the bins."""
    s = np.sum(ensemble.bin_weights / (gamma_perp + 1j * (ensemble.bin_frequencies - omega0)))
    return float((1.0 / s).real)


def cooperativity(params: SystemParams, gamma_eff: float) -> float:
    return cooperativity_from_rates(params.collective_coupling, params.cavity_halfwidth, gamma_eff)


def cooperativity_from_rates(g_coll: float, kappa: float, gamma_eff: float) -> float:
    """``C = g_coll^2 / (kappa * gamma_eff)``."""
    if not (kappa > 0 and gamma_eff > 0):
        raise ParameterError("kappa and gamma_eff must be positive")
    return g_coll**2 / (kappa * gamma_eff)


def coupling_from_field(b0: float, gamma_nv: float, geometric_factor: float = np.sqrt(2.0 / 3.0)) -> float:
    """Single-spin coupling (rad/s) from the vacuum field ``b0`` (T).

    ``gamma_nv`` is the gyromagnetic ratio in rad/s/T.
    """
    if b0 < 0:
        raise ParameterError("b0 must be non-negative")
    return gamma_nv * b0 * geometric_factor


def spin_count_estimate(g_coll: float, g0: float) -> float:
    if not g0 > 0:
        raise ParameterError("g0 must be positive")
    return (g_coll / g0) ** 2
