"""Per-frequency complex transfer functions between antennas and pixels.

Conventions: time dependence exp(+j*w*t), forward propagation over a
segment of length d is exp(-j*ktilde*d) with ktilde = k - j*kappa, so a
lossy interior segment decays by exp(-kappa*d). The compensator is the
exact algebraic inverse of the modeled forward channel, which restores
both phase and the exp(+kappa*d) amplitude.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dielectric import wavenumber, wavenumber_arrays
from .errors import NoPath
from .raypath import (
    CylinderScene,
    RayPath,
    least_time_batch,
    least_time_path,
    solve_legs,
    solve_refraction_points,
)

__all__ = [
    "AntennaModel",
    "Antenna",
    "PathTransfer",
    "effective_point",
    "phase_shift",
    "path_transfer",
    "combined_transfer",
    "forward_channel",
    "compensator",
    "spreading_divisor",
    "load_antenna_model_csv",
]


@dataclass
class AntennaModel:
    """Frequency-dependent antenna description.

    ``phase_center_table`` and ``port_phase_table`` are optional
    (frequencies, values) pairs, linearly interpolated (clamped at the
    table ends). ``gain`` maps (pixel, frequency) to a power gain; None
    means isotropic unit gain.
    """

    phase_center_table: tuple[np.ndarray, np.ndarray] | None = None
    port_phase_table: tuple[np.ndarray, np.ndarray] | None = None
    gain: object | None = None
    name: str = ""

    def phase_center_offset(self, f: float) -> float:
        if self.phase_center_table is None:
            return 0.0
        freqs, vals = self.phase_center_table
        return float(np.interp(f, freqs, vals))

    def port_phase(self, f: float) -> float:
        if self.port_phase_table is None:
            return 0.0
        freqs, vals = self.port_phase_table
        return float(np.interp(f, freqs, vals))

    def gain_at(self, pixel, f: float) -> float:
        if self.gain is None:
            return 1.0
        g = float(self.gain(np.asarray(pixel, dtype=float), f))
        if g <= 0:
            raise ValueError(f"gain must be positive, got {g} at {pixel}")
        return g


@dataclass
class Antenna:
    """An antenna model mounted at a position with a boresight direction."""

    position: tuple[float, float]
    boresight: tuple[float, float] = (0.0, 0.0)
    model: AntennaModel = field(default_factory=AntennaModel)

    def __post_init__(self):
        self.position = (float(self.position[0]), float(self.position[1]))
        b = np.asarray(self.boresight, dtype=float)
        n = np.hypot(b[0], b[1])
        self.boresight = (b[0] / n, b[1] / n) if n > 0 else (0.0, 0.0)

    @classmethod
    def on_ring(cls, radius: float, angle_deg: float, center=(0.0, 0.0),
                model: AntennaModel | None = None) -> "Antenna":
        """Antenna on a measurement ring, boresight aimed at the center."""
        a = np.deg2rad(angle_deg)
        pos = (center[0] + radius * np.cos(a), center[1] + radius * np.sin(a))
        bore = (center[0] - pos[0], center[1] - pos[1])
        return cls(position=pos, boresight=bore, model=model or AntennaModel())


@dataclass(frozen=True)
class PathTransfer:
    """Complex amplitude/phase of one one-way channel at one frequency."""

    h: complex
    path: RayPath
    frequency: float


def effective_point(antenna: Antenna, f: float) -> tuple[float, float]:
    """Antenna point shifted along boresight by the phase-center offset."""
    off = antenna.model.phase_center_offset(f)
    return (
        antenna.position[0] + off * antenna.boresight[0],
        antenna.position[1] + off * antenna.boresight[1],
    )


def spreading_divisor(length: float, mode: str = "length") -> float:
    """Geometric spreading divisor for a one-way leg of given length."""
    if mode == "length":
        return length
    if mode == "sqrt":
        return float(np.sqrt(length))
    if mode == "none":
        return 1.0
    raise ValueError(f"unknown spreading mode {mode!r}")


def phase_shift(path_tx: RayPath, path_rx: RayPath, f: float, scene: CylinderScene) -> float:
    """Two-way phase along a TX and an RX path, in radians.

    2*pi*(d1T/lam1 + d2T/lam2 + d3R/lam2 + d4R/lam1) with wavelengths
    taken from the real part of each medium's wavenumber at f.
    """
    k1 = wavenumber(scene.medium1, f).k
    k2 = wavenumber(scene.medium2, f).k
    return k1 * (path_tx.d_out + path_rx.d_out) + k2 * (path_tx.d_in + path_rx.d_in)


def path_transfer(
    path: RayPath,
    antenna: Antenna,
    pixel,
    f: float,
    scene: CylinderScene,
    spreading: str = "length",
) -> PathTransfer:
    """One-way transfer of a single path: gain, propagation, spreading.

    h = sqrt(G) * exp(-j*(k1t*d_out + k2t*d_in) - j*port_phase) / R
    """
    k1t = wavenumber(scene.medium1, f).value
    k2t = wavenumber(scene.medium2, f).value
    r = spreading_divisor(path.d_out + path.d_in, spreading)
    g = antenna.model.gain_at(pixel, f)
    h = (
        np.sqrt(g)
        * np.exp(-1j * (k1t * path.d_out + k2t * path.d_in) - 1j * antenna.model.port_phase(f))
        / r
    )
    return PathTransfer(h=complex(h), path=path, frequency=f)


def combined_transfer(
    paths_tx: list[RayPath],
    paths_rx: list[RayPath],
    tx: Antenna,
    rx: Antenna,
    pixel,
    f: float,
    scene: CylinderScene,
    spreading: str = "length",
) -> complex:
    """Effective two-way transfer: sum over every (TX path, RX path) pair."""
    if not paths_tx or not paths_rx:
        raise NoPath("pixel is unreachable from one of the antennas")
    total = 0.0 + 0.0j
    for pt in paths_tx:
        ht = path_transfer(pt, tx, pixel, f, scene, spreading).h
        for pr in paths_rx:
            hr = path_transfer(pr, rx, pixel, f, scene, spreading).h
            total += ht * hr
    return total


def _leg_paths(pixel, antenna: Antenna, f: float, scene: CylinderScene,
               multipath_mode: str) -> list[RayPath]:
    pt = effective_point(antenna, f)
    if multipath_mode == "eq2_only":
        return [least_time_path(scene, pt, pixel, f)]
    return solve_refraction_points(scene, pt, pixel, f)


def forward_channel(
    pixel,
    tx: Antenna,
    rx: Antenna,
    f: float,
    scene: CylinderScene,
    spreading: str = "length",
    multipath_mode: str = "heff",
) -> complex:
    """Modeled two-way channel TX -> pixel -> RX at frequency f."""
    paths_tx = _leg_paths(pixel, tx, f, scene, multipath_mode)
    paths_rx = _leg_paths(pixel, rx, f, scene, multipath_mode)
    return combined_transfer(paths_tx, paths_rx, tx, rx, pixel, f, scene, spreading)


def compensator(
    pixel,
    tx: Antenna,
    rx: Antenna,
    f: float,
    scene: CylinderScene,
    spreading: str = "length",
    multipath_mode: str = "heff",
) -> complex:
    """Per-frequency compensation factor for one (pixel, TX, RX) channel.

    Single path on both legs: the explicit inverse
        R * exp(+j*[k1t*(d1T+d4R) + k2t*(d2T+d3R)] + j*(port phases))
          / sqrt(Gt*Gr)
    with R the product of the two legs' spreading divisors; the lossy
    part of k-tilde turns into exp(+kappa*d) amplitude growth. Multiple
    paths: the reciprocal of the combined transfer. Raises NoPath when
    either leg has no path; the caller must skip this channel term.
    """
    paths_tx = _leg_paths(pixel, tx, f, scene, multipath_mode)
    paths_rx = _leg_paths(pixel, rx, f, scene, multipath_mode)
    if not paths_tx or not paths_rx:
        raise NoPath("pixel is unreachable from one of the antennas")
    if len(paths_tx) == 1 and len(paths_rx) == 1:
        pt, pr = paths_tx[0], paths_rx[0]
        k1t = wavenumber(scene.medium1, f).value
        k2t = wavenumber(scene.medium2, f).value
        r = spreading_divisor(pt.d_out + pt.d_in, spreading) * spreading_divisor(
            pr.d_out + pr.d_in, spreading
        )
        g = tx.model.gain_at(pixel, f) * rx.model.gain_at(pixel, f)
        ports = tx.model.port_phase(f) + rx.model.port_phase(f)
        return complex(
            r
            * np.exp(
                +1j * (k1t * (pt.d_out + pr.d_out) + k2t * (pt.d_in + pr.d_in))
                + 1j * ports
            )
            / np.sqrt(g)
        )
    h_eff = combined_transfer(paths_tx, paths_rx, tx, rx, pixel, f, scene, spreading)
    return 1.0 / h_eff


def leg_transfer_sums(
    scene: CylinderScene,
    source_point,
    focals,
    freqs,
    model: AntennaModel | None = None,
    spreading: str = "length",
    multipath_mode: str = "heff",
) -> tuple[np.ndarray, np.ndarray]:
    """Path-summed one-way transfers for many focals and frequencies.

    Returns (H, counts): H[n, k] is the sum over every stationary path of
    sqrt(G) * exp(-j*(k1t*d_out + k2t*d_in) - j*port) / R for focal n at
    frequency k, zero where no path exists; counts holds the path counts.
    The two-way channel between two antennas factorizes into the product
    of their leg sums, so this is the workhorse behind both the forward
    simulator and image reconstruction.

    ``multipath_mode='eq2_only'`` replaces the stationary-path set with
    the single least-time candidate for every focal (counts become 1).
    """
    focals = np.atleast_2d(np.asarray(focals, dtype=float))
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    n_pts, n_f = len(focals), len(freqs)
    k1r, k1i = wavenumber_arrays(scene.medium1, freqs)
    k2r, k2i = wavenumber_arrays(scene.medium2, freqs)
    k1 = np.atleast_1d(k1r - 1j * k1i)
    k2 = np.atleast_1d(k2r - 1j * k2i)

    if multipath_mode == "eq2_only":
        h = np.zeros((n_pts, n_f), dtype=complex)
        counts = np.ones((n_pts, n_f), dtype=np.int64)
        for k, f in enumerate(freqs):
            # least-time geometry per frequency; always a single candidate
            _, d_out, d_in = least_time_batch(scene, source_point, focals, f)
            if spreading == "length":
                r = d_out + d_in
            elif spreading == "sqrt":
                r = np.sqrt(d_out + d_in)
            else:
                r = np.ones_like(d_out)
            h[:, k] = np.exp(-1j * (k1[k] * d_out + k2[k] * d_in)) / r
        if model is not None:
            h = h * np.exp(-1j * np.array([model.port_phase(f) for f in freqs]))
            if model.gain is not None:
                g = np.array([[model.gain_at(p, f) for f in freqs] for p in focals])
                h = h * np.sqrt(g)
        return h, counts

    legs = solve_legs(scene, source_point, focals, freqs)
    if spreading == "length":
        r = legs.d_out + legs.d_in
    elif spreading == "sqrt":
        r = np.sqrt(legs.d_out + legs.d_in)
    else:
        r = np.ones_like(legs.d_out)
    hr = np.exp(-1j * (k1[legs.freq_idx] * legs.d_out + k2[legs.freq_idx] * legs.d_in)) / r
    if model is not None:
        hr = hr * np.exp(-1j * np.array([model.port_phase(f) for f in freqs]))[legs.freq_idx]
        if model.gain is not None:
            g = np.array(
                [model.gain_at(focals[n], freqs[k]) for n, k in zip(legs.focal_idx, legs.freq_idx)]
            )
            hr = hr * np.sqrt(g)
    key = legs.focal_idx * n_f + legs.freq_idx
    size = n_pts * n_f
    h = (
        np.bincount(key, weights=hr.real, minlength=size)
        + 1j * np.bincount(key, weights=hr.imag, minlength=size)
    ).reshape(n_pts, n_f)
    return h, legs.counts


def load_antenna_model_csv(path, name: str = "") -> AntennaModel:
    """Antenna table: header row, then frequency_hz, phase_center_offset_m,
    port_phase_rad rows."""
    path = Path(path)
    expect = ["frequency_hz", "phase_center_offset_m", "port_phase_rad"]
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expect:
            raise ValueError(f"{path}: expected header {','.join(expect)!r}, got {header!r}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no samples")
    data = np.asarray(rows, dtype=float)
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError(f"{path}: frequencies must be strictly increasing")
    return AntennaModel(
        phase_center_table=(data[:, 0], data[:, 1]),
        port_phase_table=(data[:, 0], data[:, 2]),
        name=name or path.stem,
    )


def gain_from_table(angles_deg, freqs, gains):
    """Bilinear gain pattern lookup from a sampled (angle, frequency) table.

    Returns a callable suitable for AntennaModel.gain. The angle argument
    of the table is the bearing of the pixel from the antenna, measured
    from boresight, in degrees. The callable needs the antenna position
    and boresight bound in, so this helper returns a factory.
    """
    angles_deg = np.asarray(angles_deg, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (len(angles_deg), len(freqs)):
        raise ValueError("gains must have shape (n_angles, n_freqs)")
    if np.any(gains <= 0):
        raise ValueError("gains must be positive")

    def bind(position, boresight):
        pos = np.asarray(position, dtype=float)
        bore = np.arctan2(boresight[1], boresight[0])

        def gain(pixel, f):
            v = np.asarray(pixel, dtype=float) - pos
            bearing = np.rad2deg(
                (np.arctan2(v[1], v[0]) - bore + np.pi) % (2 * np.pi) - np.pi
            )
            ga = np.array(
                [np.interp(bearing, angles_deg, gains[:, k]) for k in range(len(freqs))]
            )
            return float(np.interp(f, freqs, ga))

        return gain

    return bind
