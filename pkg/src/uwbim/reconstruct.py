"""Image formation.

PSAS: per frequency, every channel's measured spectrum sample is
multiplied by the exact inverse of its modeled forward channel and the
compensated values are summed over all channels; squared magnitudes are
then integrated across the band by the trapezoid rule. Channels whose
modeled channel has no propagation path are skipped, not zero-filled,
and the per-pixel term count is not renormalized.

Time-shift baselines: DAS, DMAS and the multistatic RAR variant align
traces with scalar two-way least-time delays evaluated at a single
center frequency, which is exactly the approximation PSAS is built to
avoid; they serve as comparison references.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import Antenna, AntennaModel, effective_point, leg_transfer_sums
from .errors import NoPath
from .grid import GridSpec, ImageGrid
from .raypath import CylinderScene, least_time_batch
from .signal import (
    MultistaticDataset,
    ScanGeometry,
    SpectrumTrace,
    TimeTrace,
    dataset_spectra,
    from_spectrum,
    to_spectrum,
)

__all__ = [
    "ReconstructionConfig",
    "psas",
    "das",
    "dmas",
    "rar",
    "ts_delay",
    "ps_compensated_waveform",
    "ts_shifted_waveform",
    "channel_phase_spread",
    "write_run_manifest",
]


def default_psas_frequencies() -> np.ndarray:
    """11 points, 2-7 GHz in 0.5 GHz steps."""
    return np.arange(2e9, 7e9 + 2.5e8, 5e8)


@dataclass
class ReconstructionConfig:
    """Shared settings for every image-formation algorithm.

    ``scene`` carries the boundary geometry and the reference media used
    to evaluate phase shifts and attenuation; feeding a perturbed medium
    here models imperfect dielectric knowledge.
    """

    grid: GridSpec
    scene: CylinderScene
    frequencies: np.ndarray = field(default_factory=default_psas_frequencies)
    center_frequency: float = 4.5e9
    tx_model: AntennaModel | None = None
    rx_model: AntennaModel | None = None
    multipath_mode: str = "heff"
    spreading: str = "length"
    workers: int = 1

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        if self.multipath_mode not in ("heff", "eq2_only"):
            raise ValueError(f"unknown multipath_mode {self.multipath_mode!r}")
        # reference media must cover the requested band
        for m in (self.scene.medium1, self.scene.medium2):
            m._check_band(self.frequencies)
            m._check_band(self.center_frequency)

    def roi_mask(self) -> np.ndarray:
        return self.grid.circle_mask(self.scene.center, self.scene.radius)

    def describe(self) -> dict:
        return {
            "grid": {
                "origin_m": list(self.grid.origin),
                "spacing_m": self.grid.spacing,
                "nx": self.grid.nx,
                "ny": self.grid.ny,
            },
            "cylinder": {
                "center_m": list(self.scene.center),
                "radius_m": self.scene.radius,
            },
            "medium1": self.scene.medium1.name,
            "medium2": self.scene.medium2.name,
            "frequencies_hz": self.frequencies.tolist(),
            "center_frequency_hz": self.center_frequency,
            "multipath_mode": self.multipath_mode,
            "spreading": self.spreading,
        }


# ---------------------------------------------------------------------------
# shared helpers


def _antennas(geometry: ScanGeometry, cfg: ReconstructionConfig):
    """TX antennas, unique RX antennas, and the channel -> RX index map."""
    tx = [
        Antenna.on_ring(geometry.tx_radius, a, geometry.center, cfg.tx_model)
        for a in geometry.tx_angles_deg
    ]
    angles = np.array(
        [
            [geometry.rx_angle_deg(i, j) for j in range(geometry.n_rx)]
            for i in range(geometry.n_tx)
        ]
    )
    rounded = np.round(angles, 9)
    uniq = np.unique(rounded)
    rx_map = np.searchsorted(uniq, rounded)
    rx = [
        Antenna.on_ring(geometry.rx_radius, a, geometry.center, cfg.rx_model)
        for a in uniq
    ]
    return tx, rx, rx_map


def _leg_sums_for_antenna(
    antenna: Antenna, pixels: np.ndarray, cfg: ReconstructionConfig, freqs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One-way path sums from an antenna to every pixel at every frequency.

    Honors the frequency-dependent phase center by grouping frequencies
    that share an effective antenna point.
    """
    n_pts, n_f = len(pixels), len(freqs)
    h = np.zeros((n_pts, n_f), dtype=complex)
    counts = np.zeros((n_pts, n_f), dtype=np.int64)
    offsets = np.array([antenna.model.phase_center_offset(f) for f in freqs])
    for off in np.unique(offsets):
        cols = np.nonzero(offsets == off)[0]
        point = (
            antenna.position[0] + off * antenna.boresight[0],
            antenna.position[1] + off * antenna.boresight[1],
        )
        hk, ck = leg_transfer_sums(
            cfg.scene,
            point,
            pixels,
            freqs[cols],
            model=antenna.model,
            spreading=cfg.spreading,
            multipath_mode=cfg.multipath_mode,
        )
        h[:, cols] = hk
        counts[:, cols] = ck
    return h, counts


def _trapezoid_weights(freqs: np.ndarray) -> np.ndarray:
    if len(freqs) == 1:
        return np.array([1.0])
    w = np.empty(len(freqs))
    w[0] = (freqs[1] - freqs[0]) / 2
    w[-1] = (freqs[-1] - freqs[-2]) / 2
    w[1:-1] = (freqs[2:] - freqs[:-2]) / 2
    return w


def _split_chunks(n: int, workers: int) -> list[np.ndarray]:
    workers = max(1, int(workers))
    return [c for c in np.array_split(np.arange(n), workers) if len(c)]


def _run_chunked(worker, args, pixels: np.ndarray, workers: int):
    """Run ``worker(pixels_chunk, *args)`` over pixel chunks, in order."""
    chunks = _split_chunks(len(pixels), workers)
    if workers <= 1 or len(chunks) <= 1:
        results = [worker(pixels[c], *args) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            futures = [pool.submit(worker, pixels[c], *args) for c in chunks]
            results = [f.result() for f in futures]
    return results


# ---------------------------------------------------------------------------
# PSAS


def _psas_chunk(pixels, spectra, geometry, cfg, rx_map):
    """Per-frequency compensated channel sums for a block of pixels.

    Returns (power, terms_used) for the block. spectra is (n_tx, n_rx, F).
    """
    freqs = cfg.frequencies
    n_f = len(freqs)
    tx, rx, _ = _antennas(geometry, cfg)
    h_tx = np.empty((len(tx), len(pixels), n_f), dtype=complex)
    c_tx = np.empty((len(tx), len(pixels), n_f), dtype=np.int64)
    for a, ant in enumerate(tx):
        h_tx[a], c_tx[a] = _leg_sums_for_antenna(ant, pixels, cfg, freqs)
    h_rx = np.empty((len(rx), len(pixels), n_f), dtype=complex)
    c_rx = np.empty((len(rx), len(pixels), n_f), dtype=np.int64)
    for a, ant in enumerate(rx):
        h_rx[a], c_rx[a] = _leg_sums_for_antenna(ant, pixels, cfg, freqs)

    with np.errstate(divide="ignore", invalid="ignore"):
        inv_tx = np.where(c_tx > 0, 1.0 / np.where(h_tx == 0, 1.0, h_tx), 0.0)
        inv_rx = np.where(c_rx > 0, 1.0 / np.where(h_rx == 0, 1.0, h_rx), 0.0)
    valid_tx = c_tx > 0
    valid_rx = c_rx > 0

    ch_tx = np.repeat(np.arange(geometry.n_tx), geometry.n_rx)
    ch_rx = rx_map.ravel()
    v_ch = spectra.reshape(-1, n_f)  # (456, F)

    power = np.zeros(len(pixels))
    terms = np.zeros(len(pixels), dtype=np.int64)
    w_int = _trapezoid_weights(freqs)
    for k in range(n_f):
        comp = inv_tx[ch_tx, :, k] * inv_rx[ch_rx, :, k]  # (channels, pixels)
        s = (v_ch[:, k][:, None] * comp).sum(axis=0)
        power += w_int[k] * np.abs(s) ** 2
        terms += (valid_tx[ch_tx, :, k] & valid_rx[ch_rx, :, k]).sum(axis=0)
    return power, terms


def psas(dataset: MultistaticDataset, cfg: ReconstructionConfig) -> ImageGrid:
    """Phase-shift-and-sum image over the configured grid.

    The returned image is normalized to unit peak unless it is all zero,
    in which case meta['normalized'] is False. meta also records total
    and skipped (channel, frequency) terms; pixels that receive no terms
    at any frequency are masked out.
    """
    geometry = dataset.geometry
    mask = cfg.roi_mask()
    pixels = cfg.grid.pixel_centers()[mask.ravel()]
    spectra = dataset_spectra(dataset, cfg.frequencies)
    _, _, rx_map = _antennas(geometry, cfg)

    results = _run_chunked(
        _psas_chunk, (spectra, geometry, cfg, rx_map), pixels, cfg.workers
    )
    power = np.concatenate([r[0] for r in results]) if results else np.empty(0)
    terms = np.concatenate([r[1] for r in results]) if results else np.empty(0, dtype=int)

    img = np.zeros(cfg.grid.shape)
    img_mask = mask.copy()
    flat_idx = np.nonzero(mask.ravel())[0]
    img.ravel()[flat_idx] = power
    # pixels with no contributing term at any frequency fall out of the ROI
    empty = terms == 0
    img_mask.ravel()[flat_idx[empty]] = False

    n_channels = geometry.n_tx * geometry.n_rx
    total = int(len(pixels) * n_channels * len(cfg.frequencies))
    used = int(terms.sum())
    out = ImageGrid(
        cfg.grid,
        img,
        img_mask,
        meta={
            "algorithm": "psas",
            "terms_total": total,
            "terms_used": used,
            "terms_skipped": total - used,
            "empty_pixels": int(empty.sum()),
        },
    )
    return out.normalize()


# ---------------------------------------------------------------------------
# time-shift baselines


def ts_delay(pixel, tx: Antenna, rx: Antenna, cfg: ReconstructionConfig) -> float:
    """Two-way least-time delay TX -> pixel -> RX at the center frequency."""
    fc = cfg.center_frequency
    p = np.atleast_2d(np.asarray(pixel, dtype=float))
    t_tx, _, _ = least_time_batch(cfg.scene, effective_point(tx, fc), p, fc)
    t_rx, _, _ = least_time_batch(cfg.scene, effective_point(rx, fc), p, fc)
    return float(t_tx[0] + t_rx[0])


def _delay_tables(pixels, geometry, cfg):
    """Least-time one-way delays: (n_tx, N) and (n_rx_unique, N)."""
    fc = cfg.center_frequency
    tx, rx, rx_map = _antennas(geometry, cfg)
    d_tx = np.stack(
        [least_time_batch(cfg.scene, effective_point(a, fc), pixels, fc)[0] for a in tx]
    )
    d_rx = np.stack(
        [least_time_batch(cfg.scene, effective_point(a, fc), pixels, fc)[0] for a in rx]
    )
    return d_tx, d_rx, rx_map


def _aligned(traces: np.ndarray, shifts: np.ndarray, dt: float) -> np.ndarray:
    """Advance each trace by its shift (seconds) with linear interpolation.

    Row r of the result is traces[r] evaluated at t + shifts[r]; samples
    shifted past the record end are zero.
    """
    n_ch, nt = traces.shape
    pos = np.arange(nt)[None, :] + (shifts / dt)[:, None]
    i0 = np.floor(pos).astype(np.int64)
    frac = pos - i0
    ok = (i0 >= 0) & (i0 <= nt - 2)
    i0c = np.clip(i0, 0, nt - 2)
    left = np.take_along_axis(traces, i0c, axis=1)
    right = np.take_along_axis(traces, i0c + 1, axis=1)
    return np.where(ok, left * (1.0 - frac) + right * frac, 0.0)


def _ts_chunk(pixels, traces, dt, geometry, cfg, algorithm):
    """DAS/DMAS/RAR pixel values for one block of pixels."""
    d_tx, d_rx, rx_map = _delay_tables(pixels, geometry, cfg)
    n_tx, n_rx = geometry.n_tx, geometry.n_rx
    ch_tx = np.repeat(np.arange(n_tx), n_rx)
    ch_rx = rx_map.ravel()
    flat = traces.reshape(n_tx * n_rx, -1)
    out = np.zeros(len(pixels))
    for n in range(len(pixels)):
        shifts = d_tx[ch_tx, n] + d_rx[ch_rx, n]
        y = _aligned(flat, shifts, dt)
        if algorithm == "das":
            s = y.sum(axis=0)
            out[n] = float(np.sum(s * s) * dt)
        elif algorithm == "dmas":
            s = y.sum(axis=0)
            q = (s * s - (y * y).sum(axis=0)) / 2.0
            out[n] = float(np.sum(np.abs(q)) * dt)
        elif algorithm == "rar":
            yg = y.reshape(n_tx, n_rx, -1)
            s_i = yg.sum(axis=1)  # (n_tx, nt)
            dots = np.einsum("ijt,ijt->ij", yg[:, :-1], yg[:, 1:])
            norms = np.sqrt(np.einsum("ijt,ijt->ij", yg, yg))
            denom = norms[:, :-1] * norms[:, 1:]
            with np.errstate(divide="ignore", invalid="ignore"):
                rho = np.where(denom > 0, dots / np.where(denom == 0, 1.0, denom), 0.0)
            w_i = np.clip(rho, 0.0, 1.0).prod(axis=1)  # (n_tx,)
            out[n] = float(np.sum((w_i[:, None] * s_i) ** 2) * dt)
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
    return out


def _ts_image(dataset: MultistaticDataset, cfg: ReconstructionConfig, algorithm: str) -> ImageGrid:
    mask = cfg.roi_mask()
    pixels = cfg.grid.pixel_centers()[mask.ravel()]
    results = _run_chunked(
        _ts_chunk,
        (dataset.traces, dataset.dt, dataset.geometry, cfg, algorithm),
        pixels,
        cfg.workers,
    )
    vals = np.concatenate(results) if results else np.empty(0)
    img = np.zeros(cfg.grid.shape)
    img.ravel()[np.nonzero(mask.ravel())[0]] = vals
    out = ImageGrid(cfg.grid, img, mask, meta={"algorithm": algorithm})
    return out.normalize()


def das(dataset: MultistaticDataset, cfg: ReconstructionConfig) -> ImageGrid:
    """Delay-and-sum: shift, sum all channels, square, integrate."""
    return _ts_image(dataset, cfg, "das")


def dmas(dataset: MultistaticDataset, cfg: ReconstructionConfig) -> ImageGrid:
    """Delay-multiply-and-sum over all distinct unordered channel pairs.

    Uses the pair-sum identity ((sum y)^2 - sum y^2)/2 and integrates the
    absolute value of the pair sum so pixel values stay nonnegative.
    """
    return _ts_image(dataset, cfg, "dmas")


def rar(dataset: MultistaticDataset, cfg: ReconstructionConfig) -> ImageGrid:
    """Multistatic RAR: correlation-weighted per-transmission sums.

    The weight of transmission i is the product of the normalized
    zero-lag correlations of adjacent aligned receiver traces, each
    clamped to [0, 1]. This is a documented stand-in for the monostatic
    weighting rule the method descends from; the multiplicative form is
    what gives the method its aggressive clutter rejection (and its
    tendency to drop weak scatterers whose neighbor correlations are
    spoiled by a stronger object) at some cost in shape fidelity.
    """
    return _ts_image(dataset, cfg, "rar")


# ---------------------------------------------------------------------------
# waveform diagnostics


def default_waveform_frequencies() -> np.ndarray:
    """901 points, 1-10 GHz in 10 MHz steps."""
    return np.arange(1e9, 1e10 + 5e6, 1e7)


def ps_compensated_waveform(
    trace: TimeTrace,
    pixel,
    tx: Antenna,
    rx: Antenna,
    cfg: ReconstructionConfig,
    frequencies=None,
) -> TimeTrace:
    """Phase-shift-compensated single-channel waveform, unit peak.

    The trace is projected onto the dense grid, every bin is multiplied
    by its channel compensator, and the result is synthesized back to
    the trace's own timebase. Frequencies without a propagation path are
    dropped; if no frequency has a path, NoPath is raised.
    """
    freqs = default_waveform_frequencies() if frequencies is None else np.asarray(frequencies)
    spec = to_spectrum(trace, freqs)
    p = np.atleast_2d(np.asarray(pixel, dtype=float))
    h_tx, c_tx = _leg_sums_for_antenna(tx, p, cfg, freqs)
    h_rx, c_rx = _leg_sums_for_antenna(rx, p, cfg, freqs)
    valid = (c_tx[0] > 0) & (c_rx[0] > 0)
    if not np.any(valid):
        raise NoPath("pixel has no propagation path to both antennas at any frequency")
    comp = np.zeros(len(freqs), dtype=complex)
    comp[valid] = 1.0 / (h_tx[0, valid] * h_rx[0, valid])
    y = from_spectrum(
        SpectrumTrace(freqs, spec.values * comp), trace.t0, trace.dt, len(trace.samples)
    )
    peak = np.abs(y.samples).max()
    if peak > 0:
        y.samples = y.samples / peak
    return y


def ts_shifted_waveform(
    trace: TimeTrace, pixel, tx: Antenna, rx: Antenna, cfg: ReconstructionConfig
) -> TimeTrace:
    """Trace advanced by the scalar center-frequency delay, unit peak."""
    tau = ts_delay(pixel, tx, rx, cfg)
    y = _aligned(trace.samples[None, :], np.array([tau]), trace.dt)[0]
    peak = np.abs(y).max()
    if peak > 0:
        y = y / peak
    return TimeTrace(trace.t0, trace.dt, y)


def channel_phase_spread(
    dataset: MultistaticDataset, cfg: ReconstructionConfig, pixel, f: float
) -> float:
    """Circular standard deviation of compensated channel phases at one
    pixel and frequency; small at a true scatterer, large elsewhere."""
    geometry = dataset.geometry
    spectra = dataset_spectra(dataset, [f])[:, :, 0]
    tx, rx, rx_map = _antennas(geometry, cfg)
    p = np.atleast_2d(np.asarray(pixel, dtype=float))
    sums_tx = [_leg_sums_for_antenna(a, p, cfg, np.array([f])) for a in tx]
    sums_rx = [_leg_sums_for_antenna(a, p, cfg, np.array([f])) for a in rx]
    h_tx = np.array([s[0][0, 0] for s in sums_tx])
    c_tx = np.array([s[1][0, 0] for s in sums_tx])
    h_rx = np.array([s[0][0, 0] for s in sums_rx])
    c_rx = np.array([s[1][0, 0] for s in sums_rx])
    vals = []
    for i in range(geometry.n_tx):
        for j in range(geometry.n_rx):
            m = rx_map[i, j]
            if c_tx[i] > 0 and c_rx[m] > 0:
                vals.append(spectra[i, j] / (h_tx[i] * h_rx[m]))
    if not vals:
        raise NoPath("no channel reaches this pixel")
    z = np.asarray(vals)
    z = z[np.abs(z) > 0]
    r = np.abs(np.mean(z / np.abs(z)))
    r = min(max(r, 1e-300), 1.0)
    return float(np.sqrt(-2.0 * np.log(r)))


# ---------------------------------------------------------------------------
# run manifests


def write_run_manifest(path, algorithm: str, cfg: ReconstructionConfig, extras: dict | None = None) -> None:
    """Record what produced an image: algorithm, config hash, counters."""
    desc = cfg.describe()
    blob = json.dumps(desc, sort_keys=True).encode()
    manifest = {
        "algorithm": algorithm,
        "config": desc,
        "config_sha256": hashlib.sha256(blob).hexdigest(),
    }
    if extras:
        manifest.update(extras)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
