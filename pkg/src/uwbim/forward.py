"""Synthetic multistatic data generator.

Single-scattering model: each scatterer point contributes
S(f) * H_tx(f) * Gamma(f) * H_rx(f) per channel and frequency, where the
one-way transfers use the same refraction/attenuation channel model the
reconstruction inverts. A rotationally symmetric background (direct
coupling plus a boundary echo, identical for equal TX-RX offsets) and
seeded Gaussian noise can be layered on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C0

from .channel import AntennaModel, leg_transfer_sums
from .raypath import CylinderScene
from .signal import MultistaticDataset, ScanGeometry, TimeTrace, to_spectrum

__all__ = [
    "Scatterer",
    "ArtifactModel",
    "Scene",
    "simulate",
    "simulate_background_only",
    "disk_footprint",
    "rect_footprint",
    "default_fgrid",
]

DEFAULT_TIMEBASE = (0.0, 1e-11, 1000)  # 100 GSa/s, 10 ns window


def default_fgrid() -> np.ndarray:
    """Dense synthesis grid: 1-10 GHz in 10 MHz steps (901 points)."""
    return np.arange(1e9, 1e10 + 5e6, 1e7)


@dataclass
class Scatterer:
    """Point scatterer: position plus complex reflectivity.

    ``reflectivity`` is either a complex constant or a callable mapping
    frequency (Hz) to a complex value.
    """

    position: tuple[float, float]
    reflectivity: object = -1.0 + 0.0j

    def gamma(self, freqs: np.ndarray) -> np.ndarray:
        if callable(self.reflectivity):
            out = np.asarray([complex(self.reflectivity(f)) for f in freqs])
        else:
            out = np.full(len(freqs), complex(self.reflectivity))
        if np.any(~np.isfinite(out)) or np.any(np.abs(out) <= 0):
            raise ValueError("reflectivity must be finite and nonzero at every frequency")
        return out


@dataclass
class ArtifactModel:
    """Rotationally symmetric background terms.

    ``coupling_amplitude`` scales a direct TX-RX pulse delayed by the
    straight chord at the channel's offset; ``interface_amplitude``
    scales a specular echo off the cylinder boundary. Both depend only
    on the TX-RX offset, which is what rotation-group averaging removes.
    """

    coupling_amplitude: float = 0.0
    interface_amplitude: float = 0.0


@dataclass
class Scene:
    """Everything the generator needs besides the scan geometry."""

    cylinder: CylinderScene
    scatterers: list[Scatterer] = field(default_factory=list)
    artifact: ArtifactModel = field(default_factory=ArtifactModel)
    noise_rms: float = 0.0
    seed: int = 0
    model_jitter: float = 0.0

    def __post_init__(self):
        cx, cy = self.cylinder.center
        for sc in self.scatterers:
            d = np.hypot(sc.position[0] - cx, sc.position[1] - cy)
            if d >= self.cylinder.radius:
                raise ValueError(f"scatterer at {sc.position} is not inside the cylinder")


def disk_footprint(center, radius: float, spacing: float = 1e-3) -> np.ndarray:
    """Square lattice of points covering a disk, one per spacing^2 cell."""
    n = int(np.ceil(radius / spacing))
    ax = spacing * np.arange(-n, n + 1)
    xx, yy = np.meshgrid(center[0] + ax, center[1] + ax)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    keep = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1]) <= radius
    return pts[keep]


def rect_footprint(center, size, spacing: float = 1e-3) -> np.ndarray:
    """Square lattice of points covering a (wx, wy) rectangle."""
    nx = max(1, int(np.floor(size[0] / spacing)) + 1)
    ny = max(1, int(np.floor(size[1] / spacing)) + 1)
    ax = spacing * (np.arange(nx) - (nx - 1) / 2)
    ay = spacing * (np.arange(ny) - (ny - 1) / 2)
    xx, yy = np.meshgrid(center[0] + ax, center[1] + ay)
    return np.column_stack([xx.ravel(), yy.ravel()])


def _unique_rx_angles(geometry: ScanGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Distinct absolute RX angles and the (n_tx, n_rx) index map into them."""
    angles = np.array(
        [
            [geometry.rx_angle_deg(i, j) for j in range(geometry.n_rx)]
            for i in range(geometry.n_tx)
        ]
    )
    rounded = np.round(angles, 9)
    uniq = np.unique(rounded)
    idx = np.searchsorted(uniq, rounded)
    return uniq, idx


def _ring_point(geometry: ScanGeometry, radius: float, angle_deg: float) -> np.ndarray:
    a = np.deg2rad(angle_deg)
    return np.array(
        [
            geometry.center[0] + radius * np.cos(a),
            geometry.center[1] + radius * np.sin(a),
        ]
    )


def _artifact_spectrum(
    scene: Scene, geometry: ScanGeometry, s_f: np.ndarray, freqs: np.ndarray
) -> np.ndarray:
    """Background spectrum per RX offset, (n_rx, F)."""
    art = scene.artifact
    out = np.zeros((geometry.n_rx, len(freqs)), dtype=complex)
    if art.coupling_amplitude == 0.0 and art.interface_amplitude == 0.0:
        return out
    r = scene.cylinder.radius
    rt, rr = geometry.tx_radius, geometry.rx_radius
    for j, off in enumerate(geometry.rx_offsets_deg):
        d = np.deg2rad(off)
        chord = np.sqrt(rt**2 + rr**2 - 2 * rt * rr * np.cos(d))
        tau_c = chord / C0
        # specular bounce via the boundary point at the bisector angle
        b = _ring_point(geometry, r, off / 2.0)
        p_t = _ring_point(geometry, rt, 0.0)
        p_r = _ring_point(geometry, rr, off)
        tau_i = (np.hypot(*(b - p_t)) + np.hypot(*(b - p_r))) / C0
        out[j] = s_f * (
            art.coupling_amplitude * np.exp(-2j * np.pi * freqs * tau_c)
            + art.interface_amplitude * np.exp(-2j * np.pi * freqs * tau_i)
        )
    return out


def _synthesize_traces(v: np.ndarray, freqs: np.ndarray, t0: float, dt: float, n: int) -> np.ndarray:
    """(channels, F) spectra -> (channels, n) real traces."""
    t = t0 + dt * np.arange(n)
    w = np.gradient(freqs) if len(freqs) > 1 else np.array([1.0])
    kernel = np.exp(2j * np.pi * np.outer(freqs, t))
    return 2.0 * dt * np.real((v * w) @ kernel)


def simulate(
    scene: Scene,
    geometry: ScanGeometry,
    pulse: TimeTrace,
    fgrid=None,
    timebase: tuple[float, float, int] = DEFAULT_TIMEBASE,
    spreading: str = "length",
    tx_model: AntennaModel | None = None,
    rx_model: AntennaModel | None = None,
) -> MultistaticDataset:
    """Generate the full multistatic dataset for a scene.

    For every channel and frequency,
    V = S * sum_p H_eff(tx -> p) * Gamma_p * H_eff(p -> rx); scatterer and
    antenna combinations without any propagation path contribute zero.
    The spectra are synthesized onto the common timebase, then the
    rotationally symmetric background and per-channel seeded noise are
    added. Equal seeds give bit-identical datasets.
    """
    freqs = default_fgrid() if fgrid is None else np.asarray(fgrid, dtype=float)
    s_f = to_spectrum(pulse, freqs).values
    t0, dt, n = timebase
    n_tx, n_rx = geometry.n_tx, geometry.n_rx
    v = np.zeros((n_tx, n_rx, len(freqs)), dtype=complex)

    if scene.scatterers:
        pts = np.array([s.position for s in scene.scatterers], dtype=float)
        gamma = np.array([s.gamma(freqs) for s in scene.scatterers])  # (P, F)
        rx_angles, rx_map = _unique_rx_angles(geometry)
        h_rx = np.stack(
            [
                leg_transfer_sums(
                    scene.cylinder,
                    _ring_point(geometry, geometry.rx_radius, a),
                    pts,
                    freqs,
                    model=rx_model,
                    spreading=spreading,
                )[0]
                for a in rx_angles
            ]
        )  # (n_rx_angles, P, F)
        for i in range(n_tx):
            h_tx, _ = leg_transfer_sums(
                scene.cylinder,
                _ring_point(geometry, geometry.tx_radius, geometry.tx_angles_deg[i]),
                pts,
                freqs,
                model=tx_model,
                spreading=spreading,
            )  # (P, F)
            weighted = h_tx * gamma  # (P, F)
            for j in range(n_rx):
                v[i, j] = s_f * np.einsum("pf,pf->f", weighted, h_rx[rx_map[i, j]])

    v += _artifact_spectrum(scene, geometry, s_f, freqs)[None, :, :]

    if scene.model_jitter:
        for i in range(n_tx):
            for j in range(n_rx):
                u = np.random.default_rng([scene.seed, 7001, i, j]).uniform(-1.0, 1.0)
                v[i, j] *= 1.0 + scene.model_jitter * u

    traces = _synthesize_traces(v.reshape(-1, len(freqs)), freqs, t0, dt, n)
    traces = traces.reshape(n_tx, n_rx, n)

    if scene.noise_rms > 0:
        peak = np.abs(traces).max()
        if peak > 0:
            for i in range(n_tx):
                for j in range(n_rx):
                    g = np.random.default_rng([scene.seed, 3001, i, j])
                    traces[i, j] += g.normal(0.0, scene.noise_rms * peak, n)

    return MultistaticDataset(geometry=geometry, t0=t0, dt=dt, traces=traces)


def simulate_background_only(
    scene: Scene,
    geometry: ScanGeometry,
    pulse: TimeTrace,
    fgrid=None,
    timebase: tuple[float, float, int] = DEFAULT_TIMEBASE,
    spreading: str = "length",
    tx_model: AntennaModel | None = None,
    rx_model: AntennaModel | None = None,
) -> MultistaticDataset:
    """The same pipeline with the scatterer list emptied.

    This is the no-object reference field: subtracting it from the full
    simulation isolates the pure scatterer response (before noise).
    """
    empty = Scene(
        cylinder=scene.cylinder,
        scatterers=[],
        artifact=scene.artifact,
        noise_rms=scene.noise_rms,
        seed=scene.seed,
        model_jitter=scene.model_jitter,
    )
    return simulate(
        empty, geometry, pulse, fgrid=fgrid, timebase=timebase, spreading=spreading,
        tx_model=tx_model, rx_model=rx_model,
    )
