"""Image quality metrics: SNR, contrast, relative difference."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateIdeal, DegenerateImage, GridMismatch
from .grid import GridSpec, ImageGrid

__all__ = [
    "IdealProfile",
    "snr",
    "contrast",
    "relative_difference",
    "ideal_from_footprints",
    "MetricRow",
    "write_metric_report",
]


@dataclass
class IdealProfile:
    """Reference object profile on the same grid as the evaluated image."""

    grid: GridSpec
    values: np.ndarray
    mask: np.ndarray
    footprints: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.shape != self.grid.shape or self.mask.shape != self.grid.shape:
            raise ValueError("profile arrays must match the grid shape")
        if np.any((self.values < 0) | (self.values > 1)):
            raise ValueError("profile values must lie in [0, 1]")


def _point_in_polygon(px, py, vertices: np.ndarray) -> np.ndarray:
    """Even-odd rule point-in-polygon test, vectorized over points."""
    inside = np.zeros_like(px, dtype=bool)
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < x_at)
    return inside


def ideal_from_footprints(grid: GridSpec, mask: np.ndarray, footprints: list) -> IdealProfile:
    """Binary profile: 1 inside any footprint, 0 elsewhere.

    Footprints are ('disk', center, radius), ('rect', center, (wx, wy)) or
    ('polygon', vertices).
    """
    pts = grid.pixel_centers()
    px, py = pts[:, 0], pts[:, 1]
    hit = np.zeros(len(pts), dtype=bool)
    for fp in footprints:
        kind = fp[0]
        if kind == "disk":
            _, center, radius = fp
            hit |= np.hypot(px - center[0], py - center[1]) <= radius
        elif kind == "rect":
            _, center, size = fp
            hit |= (np.abs(px - center[0]) <= size[0] / 2) & (
                np.abs(py - center[1]) <= size[1] / 2
            )
        elif kind == "polygon":
            hit |= _point_in_polygon(px, py, np.asarray(fp[1], dtype=float))
        else:
            raise ValueError(f"unknown footprint kind {kind!r}")
    values = hit.reshape(grid.shape).astype(float)
    values[~mask] = 0.0
    return IdealProfile(grid=grid, values=values, mask=np.asarray(mask, dtype=bool),
                        footprints=list(footprints))


def snr(img: ImageGrid) -> float:
    """20*log10(max / mean) over unmasked pixels, in dB."""
    vals = img.unmasked()
    if vals.size == 0 or vals.max() <= 0:
        raise DegenerateImage("image has no positive unmasked pixel")
    mean = vals.mean()
    if mean == 0:
        raise DegenerateImage("mean pixel value is zero")
    return float(20.0 * np.log10(vals.max() / mean))


def contrast(img: ImageGrid) -> float:
    """20*log10(mean over the object region / mean over all), in dB.

    The object region is every unmasked pixel at or above half the peak.
    """
    vals = img.unmasked()
    if vals.size == 0 or vals.max() <= 0:
        raise DegenerateImage("image has no positive unmasked pixel")
    mean = vals.mean()
    if mean == 0:
        raise DegenerateImage("mean pixel value is zero")
    omega = vals[vals >= 0.5 * vals.max()]
    return float(20.0 * np.log10(omega.mean() / mean))


def relative_difference(img: ImageGrid, ideal: IdealProfile) -> float:
    """Normalized squared difference against the ideal profile.

    Both images are peak-normalized first; the discrete double integrals
    carry the pixel area, which cancels in the ratio but keeps the
    definition faithful.
    """
    if (
        img.spec != ideal.grid
        or img.mask.shape != ideal.mask.shape
        or not np.array_equal(img.mask, ideal.mask)
    ):
        raise GridMismatch("image and ideal profile must share grid and mask")
    ivals = ideal.values[ideal.mask]
    if ivals.max() <= 0:
        raise DegenerateIdeal("ideal profile is identically zero")
    rvals = img.unmasked()
    if rvals.max() > 0:
        rvals = rvals / rvals.max()
    ivals = ivals / ivals.max()
    ds = img.spec.spacing**2
    return float(np.sum((rvals - ivals) ** 2) * ds / (np.sum(ivals**2) * ds))


@dataclass
class MetricRow:
    scene: str
    algorithm: str
    dielectric_variant: str
    snr_db: float
    ctr_db: float
    delta: float


def write_metric_report(path, rows: list[MetricRow]) -> None:
    """CSV report, one row per (scene, algorithm, dielectric variant)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene", "algorithm", "dielectric_variant", "snr_db", "ctr_db", "delta"])
        for r in rows:
            writer.writerow(
                [r.scene, r.algorithm, r.dielectric_variant,
                 f"{r.snr_db:.6f}", f"{r.ctr_db:.6f}", f"{r.delta:.6f}"]
            )
