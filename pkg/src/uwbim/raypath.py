"""Refraction paths across a circular boundary via stationary travel time.

An exterior antenna point and an interior focal point are connected by
two-segment rays that refract once on the circle. Candidate refraction
points live on the source-facing (visible) arc, parameterized by boundary
angle. The travel-time derivative along the arc is proportional to the
signed Snell residual

    g(phi) = n1 * sin(theta_i) - n2 * sin(theta_r)

so stationary-time paths are exactly the roots of g. The solver seeds
roots from sign changes of g on a fine angular grid and polishes each
bracket with a safeguarded Newton iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.constants import c as C0

from .dielectric import DielectricSpectrum, refractive_index
from .errors import PointNotExterior, PointNotInterior, SolverError
from .grid import GridSpec, write_pgm

__all__ = [
    "CylinderScene",
    "RayPath",
    "LegPaths",
    "candidate_times",
    "solve_refraction_points",
    "least_time_path",
    "least_time_batch",
    "solve_legs",
    "path_count_map",
    "PathCountMap",
]

SEED_STEP_DEG = 0.25      # sign-change scan resolution
DEDUPE_DEG = 0.05         # merge threshold for duplicate roots
MAX_REFRACTION_DEG = 89.9  # beyond this the interior leg is treated as grazing
FINE_STEP_DEG = 0.01      # least-time discretization

_MAX_SCAN_BLOCK = int(2e7)  # elements per g-scan block, keeps peak memory modest


@dataclass(frozen=True)
class CylinderScene:
    """Circular two-medium region: medium1 outside, medium2 inside."""

    center: tuple[float, float]
    radius: float
    medium1: DielectricSpectrum
    medium2: DielectricSpectrum

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def index_ratio(self, f: float) -> float:
        """n2/n1 at frequency f (real refractive indices)."""
        return float(refractive_index(self.medium2, f)) / float(
            refractive_index(self.medium1, f)
        )


@dataclass(frozen=True)
class RayPath:
    """One refraction solution between an exterior and an interior point.

    ``d_out`` is the exterior segment length, ``d_in`` the interior one;
    angles are unsigned and measured from the boundary normal. ``time_s``
    is the two-segment travel time at the query frequency.
    """

    refraction_point: tuple[float, float]
    d_out: float
    d_in: float
    incidence_angle: float
    refraction_angle: float
    time_s: float
    stationary: bool = True


@dataclass(frozen=True)
class LegPaths:
    """Flat arrays of every stationary path of a (focal x frequency) batch.

    Row r describes one path for focal ``focal_idx[r]`` at frequency index
    ``freq_idx[r]``. ``counts[n, k]`` is the number of paths for focal n at
    frequency k (0..3).
    """

    n_focals: int
    n_freqs: int
    focal_idx: np.ndarray
    freq_idx: np.ndarray
    phi: np.ndarray
    d_out: np.ndarray
    d_in: np.ndarray
    sin_i: np.ndarray
    sin_r: np.ndarray
    counts: np.ndarray


# ---------------------------------------------------------------------------
# geometry kernels


def _require_exterior(scene: CylinderScene, point) -> tuple[np.ndarray, float]:
    p = np.asarray(point, dtype=float)
    d = float(np.hypot(p[0] - scene.center[0], p[1] - scene.center[1]))
    if d <= scene.radius:
        raise PointNotExterior(f"point {tuple(p)} is not outside the circle (|p-c|={d:.6g})")
    return p, d


def _require_interior(scene: CylinderScene, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.hypot(pts[:, 0] - scene.center[0], pts[:, 1] - scene.center[1])
    if np.any(d >= scene.radius):
        bad = pts[d >= scene.radius][0]
        raise PointNotInterior(f"point {tuple(bad)} is not strictly inside the circle")
    return pts


def _arc(scene: CylinderScene, source) -> tuple[np.ndarray, float, float]:
    """Source point, its bearing from the center, and the visible half-arc."""
    s, dist = _require_exterior(scene, source)
    phi_s = float(np.arctan2(s[1] - scene.center[1], s[0] - scene.center[0]))
    alpha = float(np.arccos(scene.radius / dist))
    return s, phi_s, alpha


def _symmetric_offsets(alpha: float, step: float) -> np.ndarray:
    """Seed offsets -K*step..K*step, symmetric about the source bearing."""
    k = int(np.floor(alpha / step - 1e-12))
    return step * np.arange(-k, k + 1)


def _source_side(scene, s, phi):
    """sin/cos of the incidence angle and exterior length at angles phi."""
    cx, cy = scene.center
    r = scene.radius
    bx = cx + r * np.cos(phi)
    by = cy + r * np.sin(phi)
    ex = bx - s[0]
    ey = by - s[1]
    d1 = np.hypot(ex, ey)
    # tangent (-sin, cos), outward normal (cos, sin)
    sin_i = (-ex * np.sin(phi) + ey * np.cos(phi)) / d1
    cos_i = -(ex * np.cos(phi) + ey * np.sin(phi)) / d1
    return bx, by, d1, sin_i, cos_i


def _focal_side(scene, fx, fy, phi):
    """Same quantities for the interior leg; fx/fy broadcast against phi."""
    cx, cy = scene.center
    r = scene.radius
    bx = cx + r * np.cos(phi)
    by = cy + r * np.sin(phi)
    ex = fx - bx
    ey = fy - by
    d2 = np.hypot(ex, ey)
    sin_r = (-ex * np.sin(phi) + ey * np.cos(phi)) / d2
    cos_r = -(ex * np.cos(phi) + ey * np.sin(phi)) / d2
    return d2, sin_r, cos_r


def _g_gp(scene, s, fx, fy, phi, n1, n2):
    """Snell residual g and its derivative dg/dphi at angles phi.

    Fused evaluation of both boundary-side geometries; g is proportional
    to dT/dphi, so its roots are the stationary-time refraction points.
    """
    r = scene.radius
    cx, cy = scene.center
    cphi = np.cos(phi)
    sphi = np.sin(phi)
    bx = cx + r * cphi
    by = cy + r * sphi
    ex = bx - s[0]
    ey = by - s[1]
    d1 = np.hypot(ex, ey)
    sin_i = (-ex * sphi + ey * cphi) / d1
    cos_i = -(ex * cphi + ey * sphi) / d1
    gx = fx - bx
    gy = fy - by
    d2 = np.hypot(gx, gy)
    sin_r = (-gx * sphi + gy * cphi) / d2
    cos_r = -(gx * cphi + gy * sphi) / d2
    g = n1 * sin_i - n2 * sin_r
    gp = n1 * ((r / d1) * cos_i**2 + cos_i) - n2 * (-(r / d2) * cos_r**2 + cos_r)
    return g, gp


def _refine(scene, s, fx, fy, lo, hi, glo_sign, n1, n2, tol=1e-12, max_iters=48):
    """Safeguarded Newton on g within brackets [lo, hi], vectorized.

    Every evaluation tightens the bracket, Newton steps that leave it
    fall back to bisection, and converged roots retire from the active
    set. Worst case is pure bisection: 0.25deg * 2^-48 is far below tol.
    """
    x = 0.5 * (lo + hi)
    lo = lo.copy()
    hi = hi.copy()
    idx = np.arange(len(x))
    for _ in range(max_iters):
        if not len(idx):
            break
        g, gp = _g_gp(scene, s, fx[idx], fy[idx], x[idx], n1[idx], n2[idx])
        same = np.sign(g) == glo_sign[idx]
        lo[idx] = np.where(same, x[idx], lo[idx])
        hi[idx] = np.where(same, hi[idx], x[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x[idx] - g / gp
        bad = ~np.isfinite(xn) | (xn <= lo[idx]) | (xn >= hi[idx])
        x[idx] = np.where(bad, 0.5 * (lo[idx] + hi[idx]), xn)
        idx = idx[(hi[idx] - lo[idx]) > tol]
    return x


def _ranges_concat(starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Concatenate arange(start, start+count) for every row, vectorized."""
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    rep = np.repeat(np.cumsum(counts) - counts, counts)
    return np.repeat(starts, counts) + np.arange(total, dtype=np.int64) - rep


def _scan_direct(a_sin, b_sin, n1f, n2f, n_pts, n_phi):
    """Sign-change brackets by materializing g over (F, N, J) blocks.

    Returns (fi, ni, j) bracket triples and (fi, ni, j) exact node zeros.
    """
    n_f = len(n1f)
    f_block = max(1, min(n_f, _MAX_SCAN_BLOCK // max(1, n_pts * n_phi)))
    ci_l, cn_l, cj_l = [], [], []
    zi_l, zn_l, zj_l = [], [], []
    for f0 in range(0, n_f, f_block):
        f1 = min(n_f, f0 + f_block)
        g = (
            n1f[f0:f1][:, None, None] * a_sin[None, None, :]
            - n2f[f0:f1][:, None, None] * b_sin[None, :, :]
        )
        sg = np.sign(g)
        ci, cn, cj = np.nonzero(sg[:, :, :-1] * sg[:, :, 1:] < 0)
        zi, zn, zj = np.nonzero(g == 0.0)
        ci_l.append(ci + f0)
        cn_l.append(cn)
        cj_l.append(cj)
        zi_l.append(zi + f0)
        zn_l.append(zn)
        zj_l.append(zj)
    cat = lambda xs: np.concatenate(xs) if xs else np.empty(0, dtype=np.int64)
    return (cat(ci_l), cat(cn_l), cat(cj_l)), (cat(zi_l), cat(zn_l), cat(zj_l))


def _scan_ratio(a_sin, b_sin, rho):
    """Sign-change brackets via the index-ratio parameterization.

    g(phi_j; f) = n1(f) * (a_j - rho(f) * b_j) with rho = n2/n1, so the set
    of rho values for which the pair (j, j+1) brackets a root is an
    interval, its complement, or a ray in rho, depending on the signs of
    b_j and b_j+1. Frequencies are matched to pairs by binary search on
    sorted rho, costing O(J log F) per focal instead of O(J F).
    """
    n_pts, n_phi = b_sin.shape
    n_f = len(rho)
    order = np.argsort(rho, kind="stable")
    rs = rho[order]

    a1 = a_sin[:-1][None, :]
    a2 = a_sin[1:][None, :]
    b1 = b_sin[:, :-1]
    b2 = b_sin[:, 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = a1 / b1
        r2 = a2 / b2
    s12 = np.sign(b1) * np.sign(b2)

    # two candidate f-ranges per pair, encoded as [start, stop) into rs
    i0a = np.zeros(b1.shape, dtype=np.int64)
    i1a = np.zeros(b1.shape, dtype=np.int64)
    i0b = np.zeros(b1.shape, dtype=np.int64)
    i1b = np.zeros(b1.shape, dtype=np.int64)

    inside = s12 > 0
    if np.any(inside):
        lo = np.minimum(r1, r2)[inside]
        hi = np.maximum(r1, r2)[inside]
        i0a[inside] = np.searchsorted(rs, lo, side="right")
        i1a[inside] = np.searchsorted(rs, hi, side="left")

    outside = s12 < 0
    if np.any(outside):
        lo = np.minimum(r1, r2)[outside]
        hi = np.maximum(r1, r2)[outside]
        i1a[outside] = np.searchsorted(rs, lo, side="left")
        i0b[outside] = np.searchsorted(rs, hi, side="right")
        i1b[outside] = n_f

    z1 = (b1 == 0) & (b2 != 0) & (a1 != 0)
    if np.any(z1):
        v = r2[z1]
        right = (np.broadcast_to(a1, b1.shape)[z1] * b2[z1]) > 0
        i0a[z1] = np.where(right, np.searchsorted(rs, v, side="right"), 0)
        i1a[z1] = np.where(right, n_f, np.searchsorted(rs, v, side="left"))

    z2 = (b2 == 0) & (b1 != 0) & (a2 != 0)
    if np.any(z2):
        v = r1[z2]
        right = (np.broadcast_to(a2, b2.shape)[z2] * b1[z2]) > 0
        i0a[z2] = np.where(right, np.searchsorted(rs, v, side="right"), 0)
        i1a[z2] = np.where(right, n_f, np.searchsorted(rs, v, side="left"))

    zz = (b1 == 0) & (b2 == 0) & ((np.broadcast_to(a1, b1.shape) * a2) < 0)
    if np.any(zz):
        i1a[zz] = n_f

    # emit flat (f, n, j) triples for both range sets
    out = []
    for i0, i1 in ((i0a, i1a), (i0b, i1b)):
        cnt = np.maximum(i1 - i0, 0).ravel()
        keep = cnt > 0
        if not np.any(keep):
            continue
        flat = np.nonzero(keep)[0]
        starts = i0.ravel()[flat]
        c = cnt[flat]
        f_sorted = _ranges_concat(starts, c)
        fi = order[f_sorted]
        ni = np.repeat(flat // (n_phi - 1), c)
        cj = np.repeat(flat % (n_phi - 1), c)
        out.append((fi, ni, cj))
    if out:
        ci = np.concatenate([o[0] for o in out])
        cn = np.concatenate([o[1] for o in out])
        cj = np.concatenate([o[2] for o in out])
    else:
        ci = cn = cj = np.empty(0, dtype=np.int64)

    # structural node zeros: a_j == 0 and b_j == 0 (g vanishes at all f)
    zn, zj = np.nonzero((a_sin == 0.0)[None, :] & (b_sin == 0.0))
    if len(zn):
        zi = np.tile(np.arange(n_f, dtype=np.int64), len(zn))
        zn = np.repeat(zn, n_f)
        zj = np.repeat(zj, n_f)
    else:
        zi = np.empty(0, dtype=np.int64)
    return (ci, cn, cj), (zi, zn, zj)


def _travel_time(n1, n2, d1, d2):
    return (n1 * d1 + n2 * d2) / C0


# ---------------------------------------------------------------------------
# batch solver


def solve_legs(
    scene: CylinderScene,
    source,
    focals,
    freqs,
    step_deg: float = SEED_STEP_DEG,
    check_max_paths: bool = True,
    scan_mode: str = "auto",
) -> LegPaths:
    """Stationary refraction paths for every (focal, frequency) pair.

    Parameters
    ----------
    source : (2,) point outside the circle
    focals : (N, 2) points strictly inside
    freqs : (F,) query frequencies in Hz
    scan_mode : 'direct' materializes the residual over every frequency,
        'ratio' locates brackets by binary search on the sorted index
        ratio (much faster for dense frequency grids), 'auto' picks.

    Returns a LegPaths with one row per path. Zero rows for a pair means
    the focal point is unreachable from this source at that frequency.
    """
    s, phi_s, alpha = _arc(scene, source)
    focals = _require_interior(scene, focals)
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    n_f = len(freqs)
    n_pts = len(focals)
    n1f = np.atleast_1d(refractive_index(scene.medium1, freqs)).astype(float)
    n2f = np.atleast_1d(refractive_index(scene.medium2, freqs)).astype(float)

    step = np.deg2rad(step_deg)
    phi = phi_s + _symmetric_offsets(alpha, step)
    n_phi = len(phi)
    _, _, _, a_sin, _ = _source_side(scene, s, phi)
    fx = focals[:, 0][:, None]
    fy = focals[:, 1][:, None]
    _, b_sin, _ = _focal_side(scene, fx, fy, phi[None, :])

    if scan_mode == "auto":
        scan_mode = "ratio" if n_f > 16 else "direct"
    if scan_mode == "ratio":
        (ci, cn, cj), (zi, zn, zj) = _scan_ratio(a_sin, b_sin, n2f / n1f)
    elif scan_mode == "direct":
        (ci, cn, cj), (zi, zn, zj) = _scan_direct(a_sin, b_sin, n1f, n2f, n_pts, n_phi)
    else:
        raise ValueError(f"unknown scan_mode {scan_mode!r}")

    if len(ci):
        lo = phi[cj]
        hi = phi[cj + 1]
        glo_sign = np.sign(n1f[ci] * a_sin[cj] - n2f[ci] * b_sin[cn, cj])
        rfx = focals[cn, 0]
        rfy = focals[cn, 1]
        root = _refine(scene, s, rfx, rfy, lo, hi, glo_sign, n1f[ci], n2f[ci])
    else:
        root = np.empty(0)
        ci = cn = np.empty(0, dtype=np.int64)

    if len(zi):
        ci = np.concatenate([ci, zi])
        cn = np.concatenate([cn, zn])
        root = np.concatenate([root, phi[zj]])

    if len(root):
        order = np.lexsort((root, ci, cn))
        ci, cn, root = ci[order], cn[order], root[order]
        # drop near-duplicate roots within the same (focal, freq) group
        if len(root) > 1:
            same_group = (np.diff(cn) == 0) & (np.diff(ci) == 0)
            dup = np.concatenate([[False], same_group & (np.diff(root) < np.deg2rad(DEDUPE_DEG))])
            keep = ~dup
            ci, cn, root = ci[keep], cn[keep], root[keep]
        _, _, d1, sin_i, _ = _source_side(scene, s, root)
        d2, sin_r, _ = _focal_side(scene, focals[cn, 0], focals[cn, 1], root)
        ok = np.abs(sin_r) <= np.sin(np.deg2rad(MAX_REFRACTION_DEG))
        fi, ni, phi_r = ci[ok], cn[ok], root[ok]
        d_out, d_in = d1[ok], d2[ok]
        sin_i, sin_r = sin_i[ok], sin_r[ok]
    else:
        fi = ni = np.empty(0, dtype=np.int64)
        phi_r = d_out = d_in = sin_i = sin_r = np.empty(0)

    counts = np.zeros((n_pts, n_f), dtype=np.int64)
    np.add.at(counts, (ni, fi), 1)
    if check_max_paths and counts.size and counts.max() > 3:
        n_bad, f_bad = np.unravel_index(int(np.argmax(counts)), counts.shape)
        raise SolverError(
            f"{counts.max()} stationary paths found for focal {tuple(focals[n_bad])} "
            f"at {freqs[f_bad]:.4g} Hz; a single circular boundary admits at most 3"
        )
    return LegPaths(
        n_focals=n_pts,
        n_freqs=n_f,
        focal_idx=ni,
        freq_idx=fi,
        phi=phi_r,
        d_out=d_out,
        d_in=d_in,
        sin_i=sin_i,
        sin_r=sin_r,
        counts=counts,
    )


# ---------------------------------------------------------------------------
# scalar API


def candidate_times(
    scene: CylinderScene,
    source,
    focal,
    f: float,
    step_deg: float = 1.0,
) -> np.ndarray:
    """Travel time through each candidate refraction point on the visible arc.

    Returns an (N, 2) array of (boundary angle rad, travel time s) ordered
    by boundary angle. The candidate set is symmetric about the source
    bearing and covers the source-facing arc at ``step_deg`` spacing.
    """
    if step_deg <= 0:
        raise ValueError("step_deg must be positive")
    s, phi_s, alpha = _arc(scene, source)
    focal = _require_interior(scene, focal)[0]
    n1 = float(refractive_index(scene.medium1, f))
    n2 = float(refractive_index(scene.medium2, f))
    phi = phi_s + _symmetric_offsets(alpha, np.deg2rad(step_deg))
    _, _, d1, _, _ = _source_side(scene, s, phi)
    d2, _, _ = _focal_side(scene, focal[0], focal[1], phi)
    return np.column_stack([phi, _travel_time(n1, n2, d1, d2)])


def _path_from_phi(scene, s, focal, phi, n1, n2, stationary=True) -> RayPath:
    bx, by, d1, sin_i, _ = _source_side(scene, s, np.asarray([phi]))
    d2, sin_r, _ = _focal_side(scene, focal[0], focal[1], np.asarray([phi]))
    return RayPath(
        refraction_point=(float(bx[0]), float(by[0])),
        d_out=float(d1[0]),
        d_in=float(d2[0]),
        incidence_angle=float(np.arcsin(np.clip(abs(sin_i[0]), 0.0, 1.0))),
        refraction_angle=float(np.arcsin(np.clip(abs(sin_r[0]), 0.0, 1.0))),
        time_s=float(_travel_time(n1, n2, d1[0], d2[0])),
        stationary=stationary,
    )


def solve_refraction_points(scene: CylinderScene, source, focal, f: float) -> list[RayPath]:
    """All stationary-time refraction paths from source to focal at f.

    Zero to three paths, ordered by travel time ascending. An empty list
    is a valid result: the focal point is unreachable along refracted
    rays from this source position.
    """
    legs = solve_legs(scene, source, np.asarray([focal], dtype=float), [f])
    s, _, _ = _arc(scene, source)
    focal = np.asarray(focal, dtype=float)
    n1 = float(refractive_index(scene.medium1, f))
    n2 = float(refractive_index(scene.medium2, f))
    paths = [
        _path_from_phi(scene, s, focal, p, n1, n2)
        for p in legs.phi
    ]
    return sorted(paths, key=lambda p: p.time_s)


def least_time_path(scene: CylinderScene, source, focal, f: float) -> RayPath:
    """Global minimum-time candidate path, stationarity not required.

    Scans the visible arc at 0.01 degrees, takes the global minimum and
    polishes interior minima with a parabolic fit. Unlike
    solve_refraction_points this always returns a path, even for focal
    points in the zero-stationary-path region.
    """
    s, phi_s, alpha = _arc(scene, source)
    focal = _require_interior(scene, focal)[0]
    n1 = float(refractive_index(scene.medium1, f))
    n2 = float(refractive_index(scene.medium2, f))
    phi = phi_s + _symmetric_offsets(alpha, np.deg2rad(FINE_STEP_DEG))
    _, _, d1, _, _ = _source_side(scene, s, phi)
    d2, _, _ = _focal_side(scene, focal[0], focal[1], phi)
    t = _travel_time(n1, n2, d1, d2)
    i = int(np.argmin(t))
    phi_min = phi[i]
    t_min = t[i]
    if 0 < i < len(phi) - 1:
        # parabolic vertex through the three lowest samples
        denom = t[i - 1] - 2 * t[i] + t[i + 1]
        if denom > 0:
            phi_v = phi[i] + 0.5 * np.deg2rad(FINE_STEP_DEG) * (t[i - 1] - t[i + 1]) / denom
            phi_v = float(np.clip(phi_v, phi_s - alpha, phi_s + alpha))
            _, _, d1v, _, _ = _source_side(scene, s, np.asarray([phi_v]))
            d2v, _, _ = _focal_side(scene, focal[0], focal[1], np.asarray([phi_v]))
            tv = float(_travel_time(n1, n2, d1v[0], d2v[0]))
            if tv < t_min:
                phi_min, t_min = phi_v, tv
    # the exact visible-arc endpoints are legitimate candidates too
    for edge in (phi_s - alpha, phi_s + alpha):
        _, _, d1e, _, _ = _source_side(scene, s, np.asarray([edge]))
        d2e, _, _ = _focal_side(scene, focal[0], focal[1], np.asarray([edge]))
        te = float(_travel_time(n1, n2, d1e[0], d2e[0]))
        if te < t_min:
            phi_min, t_min = edge, te
    return _path_from_phi(scene, s, focal, float(phi_min), n1, n2, stationary=False)


def least_time_batch(
    scene: CylinderScene, source, focals, f: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Least travel times for many focal points at one frequency.

    Coarse 0.25-degree scan to locate minima basins, then a local
    0.01-degree scan with parabolic polish in each basin. Matches
    least_time_path within discretization tolerance. Returns
    (times, d_out, d_in), each (N,).
    """
    s, phi_s, alpha = _arc(scene, source)
    focals = _require_interior(scene, focals)
    n1 = float(refractive_index(scene.medium1, f))
    n2 = float(refractive_index(scene.medium2, f))
    coarse_step = np.deg2rad(SEED_STEP_DEG)
    phi = phi_s + _symmetric_offsets(alpha, coarse_step)
    fx = focals[:, 0][:, None]
    fy = focals[:, 1][:, None]
    _, _, d1, _, _ = _source_side(scene, s, phi)
    d2, _, _ = _focal_side(scene, fx, fy, phi[None, :])
    t = (n1 * d1[None, :] + n2 * d2) / C0

    basin = np.zeros_like(t, dtype=bool)
    basin[:, 1:-1] = (t[:, 1:-1] < t[:, :-2]) & (t[:, 1:-1] <= t[:, 2:])
    basin[:, 0] = True
    basin[:, -1] = True
    ni, nj = np.nonzero(basin)

    # refine each basin on a local fine grid clipped to the visible arc
    fine = np.deg2rad(FINE_STEP_DEG)
    half = int(round(SEED_STEP_DEG / FINE_STEP_DEG))
    offsets = fine * np.arange(-half, half + 1)
    phi_win = np.clip(
        phi[nj][:, None] + offsets[None, :], phi_s - alpha, phi_s + alpha
    )
    _, _, d1w, _, _ = _source_side(scene, s, phi_win)
    d2w, _, _ = _focal_side(
        scene, focals[ni, 0][:, None], focals[ni, 1][:, None], phi_win
    )
    tw = (n1 * d1w + n2 * d2w) / C0
    k = np.argmin(tw, axis=1)
    rows = np.arange(len(k))
    t_best = tw[rows, k]
    phi_best = phi_win[rows, k]
    inner = (k > 0) & (k < len(offsets) - 1)
    if np.any(inner):
        r = rows[inner]
        ki = k[inner]
        tm, t0, tp = tw[r, ki - 1], tw[r, ki], tw[r, ki + 1]
        denom = tm - 2 * t0 + tp
        good = denom > 0
        phi_v = phi_win[r, ki] + np.where(
            good, 0.5 * fine * (tm - tp) / np.where(good, denom, 1.0), 0.0
        )
        phi_v = np.clip(phi_v, phi_s - alpha, phi_s + alpha)
        _, _, d1v, _, _ = _source_side(scene, s, phi_v)
        d2v, _, _ = _focal_side(scene, focals[ni[inner], 0], focals[ni[inner], 1], phi_v)
        tv = (n1 * d1v + n2 * d2v) / C0
        # same vertex rule as least_time_path, for batch/scalar agreement
        better = good & (tv < t_best[inner])
        t_best[inner] = np.where(better, tv, t_best[inner])
        phi_best[inner] = np.where(better, phi_v, phi_best[inner])

    # pick the winning basin per focal
    order = np.lexsort((t_best, ni))
    first = np.concatenate([[True], np.diff(ni[order]) != 0])
    win = order[first]
    times = np.full(len(focals), np.inf)
    d_out = np.zeros(len(focals))
    d_in = np.zeros(len(focals))
    sel = ni[win]
    _, _, d1b, _, _ = _source_side(scene, s, phi_best[win])
    d2b, _, _ = _focal_side(scene, focals[sel, 0], focals[sel, 1], phi_best[win])
    times[sel] = t_best[win]
    d_out[sel] = d1b
    d_in[sel] = d2b
    return times, d_out, d_in


# ---------------------------------------------------------------------------
# path-count maps


@dataclass
class PathCountMap:
    """Per-pixel stationary-path counts over a grid; -1 outside the circle."""

    spec: GridSpec
    counts: np.ndarray
    mask: np.ndarray

    _LEVELS = {3: 0, 2: 85, 1: 170, 0: 255}

    def to_csv(self, path) -> None:
        pts = self.spec.pixel_centers()
        keep = self.mask.ravel()
        data = np.column_stack([pts[keep], self.counts.ravel()[keep]])
        np.savetxt(
            path, data, delimiter=",", header="x_m,y_m,count", comments="",
            fmt=["%.17e", "%.17e", "%d"],
        )

    def to_pgm(self, path) -> None:
        img = np.full(self.spec.shape, 255, dtype=np.uint8)
        for count, level in self._LEVELS.items():
            img[self.mask & (self.counts == count)] = level
        write_pgm(path, img)


def path_count_map(scene: CylinderScene, source, grid: GridSpec, f: float) -> PathCountMap:
    """Count stationary paths from ``source`` to every interior pixel at f.

    Pixels outside the circle are marked not-applicable (count -1). The
    standard rendering maps counts {3, 2, 1, 0} to black, dark gray,
    light gray and white.
    """
    mask = grid.circle_mask(scene.center, scene.radius)
    pts = grid.pixel_centers()[mask.ravel()]
    counts = np.full(grid.shape, -1, dtype=np.int64)
    if len(pts):
        legs = solve_legs(scene, source, pts, [f])
        counts_flat = counts.ravel()
        idx = np.nonzero(mask.ravel())[0]
        counts_flat[idx] = legs.counts[:, 0]
        counts = counts_flat.reshape(grid.shape)
    return PathCountMap(spec=grid, counts=counts, mask=mask)
