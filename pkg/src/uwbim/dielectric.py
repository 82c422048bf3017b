"""Dispersive, lossy media as frequency-sampled dielectric tables.

A medium is a table of (frequency, relative permittivity, conductivity)
samples. Everything downstream (complex permittivity, complex wavenumber,
refractive index) is derived from that table by linear interpolation.
Queries outside the sampled band raise rather than extrapolate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.constants import c as C0
from scipy.constants import epsilon_0 as EPS0

from .errors import FrequencyOutOfRange, InvalidRange

__all__ = [
    "DielectricSpectrum",
    "ComplexWavenumber",
    "complex_permittivity",
    "wavenumber",
    "refractive_index",
    "perturb_spectrum",
    "dispersive_time_spread",
    "air",
    "constant_medium",
    "glycerin_like",
    "load_spectrum_csv",
    "save_spectrum_csv",
]


@dataclass(frozen=True)
class DielectricSpectrum:
    """Frequency-sampled (eps_r, sigma) description of one medium.

    Parameters
    ----------
    frequencies : array_like
        Sample frequencies in Hz, strictly increasing, all positive.
    eps_r : array_like
        Relative permittivity at each sample, >= 1.
    sigma : array_like
        Conductivity in S/m at each sample, >= 0.
    name : str
        Display label.
    """

    frequencies: np.ndarray
    eps_r: np.ndarray
    sigma: np.ndarray
    name: str = ""

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        e = np.atleast_1d(np.asarray(self.eps_r, dtype=float))
        s = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if not (f.ndim == e.ndim == s.ndim == 1) or not (len(f) == len(e) == len(s)):
            raise ValueError("frequencies, eps_r and sigma must be 1-D and equal length")
        if len(f) < 1 or np.any(f <= 0):
            raise ValueError("all sample frequencies must be positive")
        if len(f) > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("sample frequencies must be strictly increasing")
        if np.any(e < 1.0):
            raise ValueError("eps_r must be >= 1 at every sample")
        if np.any(s < 0.0):
            raise ValueError("sigma must be >= 0 at every sample")
        for attr, arr in (("frequencies", f), ("eps_r", e), ("sigma", s)):
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def band(self) -> tuple[float, float]:
        """(lowest, highest) sampled frequency in Hz."""
        return float(self.frequencies[0]), float(self.frequencies[-1])

    def _check_band(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        lo, hi = self.band
        if np.any(f < lo) or np.any(f > hi):
            bad = f[(f < lo) | (f > hi)]
            raise FrequencyOutOfRange(
                f"frequency {np.atleast_1d(bad).ravel()[0]:.6g} Hz outside sampled band "
                f"[{lo:.6g}, {hi:.6g}] Hz of medium {self.name!r}"
            )
        return f

    def eps_r_at(self, f):
        """Linearly interpolated relative permittivity at f (Hz)."""
        f = self._check_band(f)
        return np.interp(f, self.frequencies, self.eps_r)

    def sigma_at(self, f):
        """Linearly interpolated conductivity (S/m) at f (Hz)."""
        f = self._check_band(f)
        return np.interp(f, self.frequencies, self.sigma)

    def is_lossless(self) -> bool:
        return bool(np.all(self.sigma == 0.0))


@dataclass(frozen=True)
class ComplexWavenumber:
    """Propagation constant k (rad/m) and attenuation constant kappa (Np/m)."""

    k: float
    kappa: float

    @property
    def value(self) -> complex:
        """k - j*kappa, the full complex wavenumber."""
        return self.k - 1j * self.kappa


def complex_permittivity(spec: DielectricSpectrum, f):
    """Complex relative permittivity eps_r(f) - j*sigma(f)/(2*pi*f*eps0).

    Accepts a scalar or array frequency; raises FrequencyOutOfRange
    outside the sampled band. The imaginary part is always <= 0.
    """
    f = spec._check_band(f)
    eps = spec.eps_r_at(f)
    sig = spec.sigma_at(f)
    out = eps - 1j * sig / (2.0 * np.pi * f * EPS0)
    return complex(out) if np.isscalar(out) or out.ndim == 0 else out


def wavenumber(spec: DielectricSpectrum, f: float) -> ComplexWavenumber:
    """Complex wavenumber (2*pi*f/c)*sqrt(eps_tilde) with k > 0, kappa >= 0."""
    k, kappa = wavenumber_arrays(spec, f)
    return ComplexWavenumber(float(k), float(kappa))


def wavenumber_arrays(spec: DielectricSpectrum, f):
    """Vectorized (k, kappa) arrays over an array of frequencies."""
    f = spec._check_band(f)
    root = np.sqrt(complex_permittivity(spec, f))
    # principal sqrt of a lower-half-plane value lands in the fourth
    # quadrant, so Re > 0 and Im <= 0 already hold
    w = 2.0 * np.pi * np.asarray(f, dtype=float) / C0
    k = w * np.real(root)
    kappa = -w * np.imag(root)
    # clip the -0.0 that exact lossless arithmetic produces
    kappa = np.where(np.abs(kappa) < 1e-300, 0.0, kappa)
    return k, kappa


def refractive_index(spec: DielectricSpectrum, f):
    """Real refractive index Re(sqrt(eps_tilde)) = k*c/(2*pi*f)."""
    f = spec._check_band(f)
    return np.real(np.sqrt(complex_permittivity(spec, f)))


def perturb_spectrum(
    spec: DielectricSpectrum,
    lo: float,
    hi: float,
    sign: str,
    seed: int,
) -> DielectricSpectrum:
    """Scale every (eps_r, sigma) sample by 1 +/- u with u ~ U[lo, hi].

    Each permittivity and conductivity sample gets an independent draw
    from a generator seeded with ``seed``, so results are reproducible.
    ``sign`` selects a uniformly higher ('+') or lower ('-') table.
    """
    if not (0.0 <= lo <= hi < 1.0):
        raise InvalidRange(f"need 0 <= lo <= hi < 1, got lo={lo}, hi={hi}")
    if sign not in ("+", "-"):
        raise InvalidRange(f"sign must be '+' or '-', got {sign!r}")
    rng = np.random.default_rng(seed)
    n = len(spec.frequencies)
    u_eps = rng.uniform(lo, hi, n)
    u_sig = rng.uniform(lo, hi, n)
    s = 1.0 if sign == "+" else -1.0
    return DielectricSpectrum(
        frequencies=spec.frequencies.copy(),
        eps_r=spec.eps_r * (1.0 + s * u_eps),
        sigma=spec.sigma * (1.0 + s * u_sig),
        name=f"{spec.name}{sign}{lo:g}..{hi:g}",
    )


def dispersive_time_spread(spec: DielectricSpectrum, f_lo: float, f_hi: float, d: float) -> float:
    """Transit-time spread |sqrt(eps_r(f_hi)) - sqrt(eps_r(f_lo))| * d / c.

    Uses the real permittivity only. Returned as a magnitude: in a
    normally dispersive medium the low-frequency component is the slow
    one, and the spread is the arrival-time gap between the two band
    edges over distance d.
    """
    if not (f_lo < f_hi):
        raise InvalidRange(f"need f_lo < f_hi, got {f_lo} >= {f_hi}")
    if d <= 0:
        raise InvalidRange(f"need d > 0, got {d}")
    e_lo = float(spec.eps_r_at(f_lo))
    e_hi = float(spec.eps_r_at(f_hi))
    return abs(np.sqrt(e_hi) - np.sqrt(e_lo)) * d / C0


# ---------------------------------------------------------------------------
# built-in media


def air(f_lo: float = 1e7, f_hi: float = 1e11) -> DielectricSpectrum:
    """Vacuum-equivalent exterior medium over a wide band."""
    return DielectricSpectrum(
        frequencies=np.array([f_lo, f_hi]),
        eps_r=np.array([1.0, 1.0]),
        sigma=np.array([0.0, 0.0]),
        name="air",
    )


def constant_medium(
    eps_r: float,
    sigma: float = 0.0,
    f_lo: float = 1e7,
    f_hi: float = 1e11,
    name: str = "",
) -> DielectricSpectrum:
    """Nondispersive medium with fixed eps_r and sigma."""
    return DielectricSpectrum(
        frequencies=np.array([f_lo, f_hi]),
        eps_r=np.array([eps_r, eps_r]),
        sigma=np.array([sigma, sigma]),
        name=name or f"const(eps={eps_r:g},sigma={sigma:g})",
    )


# Reference interior medium: glycerin-style coupling liquid. sqrt(eps_r)
# falls linearly with frequency at 0.0858/GHz so that the 2-7 GHz
# transit-time spread over 10 cm is 0.143 ns, anchored to eps_r = 6.5 at
# 4.5 GHz; conductivity rises with frequency, which makes the high band
# attenuate faster. Sigma is kept moderate: the attenuation compensator
# grows as exp(+kappa*d), and per-channel gain disparity across the
# region of interest must stay below the coherent channel-sum gain for
# the beamformer to be usable.
_GLY_SLOPE_PER_HZ = 0.0858e-9
_GLY_SQRT_EPS_45 = np.sqrt(6.5)


def glycerin_like(f_lo: float = 1e9, f_hi: float = 1e10, df: float = 0.5e9) -> DielectricSpectrum:
    freqs = np.arange(f_lo, f_hi + df / 2, df)
    sqrt_eps = _GLY_SQRT_EPS_45 - _GLY_SLOPE_PER_HZ * (freqs - 4.5e9)
    sigma = 0.10 + 0.0333e-9 * (freqs - 1e9)
    return DielectricSpectrum(
        frequencies=freqs,
        eps_r=sqrt_eps**2,
        sigma=sigma,
        name="glycerin_like",
    )


# ---------------------------------------------------------------------------
# plain-text table I/O

_CSV_HEADER = ["frequency_hz", "eps_r", "sigma_s_per_m"]


def load_spectrum_csv(path, name: str = "") -> DielectricSpectrum:
    """Read a medium table: header row, comma-separated, UTF-8."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != _CSV_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(_CSV_HEADER)!r}, got {header!r}"
            )
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no samples")
    data = np.asarray(rows, dtype=float)
    return DielectricSpectrum(
        frequencies=data[:, 0],
        eps_r=data[:, 1],
        sigma=data[:, 2],
        name=name or path.stem,
    )


def save_spectrum_csv(spec: DielectricSpectrum, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for f, e, s in zip(spec.frequencies, spec.eps_r, spec.sigma):
            writer.writerow([repr(float(f)), repr(float(e)), repr(float(s))])
