"""Pixel grids with physical coordinates, plus image containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["GridSpec", "ImageGrid", "write_pgm"]


@dataclass(frozen=True)
class GridSpec:
    """Regular 2-D pixel lattice.

    ``origin`` is the physical (x, y) of the center of pixel (ix=0, iy=0);
    pixel (ix, iy) sits at origin + spacing * (ix, iy). Arrays over the
    grid are indexed [iy, ix].
    """

    origin: tuple[float, float]
    spacing: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid must have at least one pixel per axis")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def centered(cls, center: tuple[float, float], half_span: float, spacing: float) -> "GridSpec":
        """Square grid covering [center - half_span, center + half_span]."""
        n = int(np.floor(2 * half_span / spacing)) + 1
        x0 = center[0] - spacing * (n - 1) / 2
        y0 = center[1] - spacing * (n - 1) / 2
        return cls(origin=(x0, y0), spacing=spacing, nx=n, ny=n)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def x_coords(self) -> np.ndarray:
        return self.origin[0] + self.spacing * np.arange(self.nx)

    def y_coords(self) -> np.ndarray:
        return self.origin[1] + self.spacing * np.arange(self.ny)

    def pixel_centers(self) -> np.ndarray:
        """All pixel centers as an (ny*nx, 2) array, row-major in [iy, ix]."""
        xx, yy = np.meshgrid(self.x_coords(), self.y_coords())
        return np.column_stack([xx.ravel(), yy.ravel()])

    def circle_mask(self, center: tuple[float, float], radius: float) -> np.ndarray:
        """Boolean [ny, nx] mask of pixels strictly inside the circle."""
        pts = self.pixel_centers()
        d = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
        return (d < radius * (1.0 - 1e-12)).reshape(self.shape)


@dataclass
class ImageGrid:
    """Scalar pixel field over a GridSpec with a region-of-interest mask."""

    spec: GridSpec
    pixels: np.ndarray
    mask: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.shape != self.spec.shape:
            raise ValueError(f"pixels shape {self.pixels.shape} != grid {self.spec.shape}")
        if self.mask is None:
            self.mask = np.ones(self.spec.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.spec.shape:
                raise ValueError("mask shape mismatch")

    def unmasked(self) -> np.ndarray:
        return self.pixels[self.mask]

    def peak(self) -> float:
        vals = self.unmasked()
        return float(vals.max()) if vals.size else 0.0

    def normalize(self) -> "ImageGrid":
        """Scale so the unmasked peak is 1; a zero image is returned as-is
        with meta['normalized'] = False."""
        p = self.peak()
        out = ImageGrid(self.spec, self.pixels.copy(), self.mask.copy(), dict(self.meta))
        if p > 0:
            out.pixels[out.mask] = out.pixels[out.mask] / p
            out.meta["normalized"] = True
        else:
            out.meta["normalized"] = False
        return out

    def argmax_position(self) -> tuple[float, float]:
        """Physical (x, y) of the largest unmasked pixel."""
        vals = np.where(self.mask, self.pixels, -np.inf)
        iy, ix = np.unravel_index(int(np.argmax(vals)), self.spec.shape)
        return (
            self.spec.origin[0] + self.spec.spacing * ix,
            self.spec.origin[1] + self.spec.spacing * iy,
        )

    def to_csv(self, path) -> None:
        """Rows of x_m, y_m, value for every unmasked pixel."""
        pts = self.spec.pixel_centers()
        vals = self.pixels.ravel()
        keep = self.mask.ravel()
        data = np.column_stack([pts[keep], vals[keep]])
        np.savetxt(path, data, delimiter=",", header="x_m,y_m,value", comments="", fmt="%.17e")

    def to_pgm(self, path) -> None:
        """8-bit graymap, linear map with unmasked peak at 255, masked = 0."""
        p = self.peak()
        img = np.zeros(self.spec.shape, dtype=np.uint8)
        if p > 0:
            scaled = np.clip(self.pixels / p, 0.0, 1.0) * 255.0
            img[self.mask] = np.rint(scaled[self.mask]).astype(np.uint8)
        write_pgm(path, img)


def write_pgm(path, img: np.ndarray) -> None:
    """Binary (P5) portable graymap writer for uint8 arrays."""
    img = np.asarray(img, dtype=np.uint8)
    ny, nx = img.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
