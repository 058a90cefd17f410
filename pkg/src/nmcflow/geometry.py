"""Star-shaped planar sets represented as polar graphs, and their geometry.

A shape is a radial graph over a uniform angular grid about a chosen center.
This module provides the measurement operations (perimeter, area, curvature,
normals), the set metrics (Hausdorff distance and the asymmetric
integral-of-distance pseudo-distance), the reflection/star-shapedness
predicates used by the preservation audits, and morphological offsets.

All shapes are immutable; every function here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

TWO_PI = 2.0 * np.pi

# Default relative tolerance for geometric verdicts, scaled by shape diameter.
GEOM_TOL_REL = 1e-3

# Memory guard for pseudo-distance rasterization.
_MAX_RASTER_CELLS = 6_000_000


class ShapeError(ValueError):
    """Invalid shape data or an operation that would leave the polar class."""


class RasterBudgetError(ValueError):
    """Raster resolution request exceeds the in-memory cell budget."""


def _as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(a)):
        raise ShapeError("point coordinates must be finite")
    return a


@dataclass(frozen=True)
class StarShape:
    """Bounded open set star-shaped about ``center``, as a polar graph.

    ``radii[k]`` is the boundary distance from ``center`` at angle
    ``theta_k = 2*pi*k / n_theta``. The radii array is periodic and every
    entry must be strictly positive.
    """

    center: np.ndarray
    radii: np.ndarray

    def __init__(self, center, radii):
        object.__setattr__(self, "center", _as_point(center))
        r = np.array(radii, dtype=float)
        if r.ndim != 1 or r.size < 8:
            raise ShapeError("radii must be a 1-D array with at least 8 samples")
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise ShapeError("all radii must be finite and strictly positive")
        r.setflags(write=False)
        self.center.setflags(write=False)
        object.__setattr__(self, "radii", r)

    @property
    def n_theta(self) -> int:
        return self.radii.size

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.n_theta) * (TWO_PI / self.n_theta)

    @property
    def diameter(self) -> float:
        """Extent of the boundary's bounding box (larger side)."""
        p = self.boundary_points()
        ext = p.max(axis=0) - p.min(axis=0)
        return float(ext.max())

    def boundary_points(self, upsample: int = 1) -> np.ndarray:
        """Boundary samples as an (m, 2) array, optionally angularly refined."""
        if upsample == 1:
            th, r = self.thetas, self.radii
        else:
            m = self.n_theta * int(upsample)
            th = np.arange(m) * (TWO_PI / m)
            r = self.radius_at(th)
        return self.center + np.column_stack((r * np.cos(th), r * np.sin(th)))

    def radius_at(self, theta) -> np.ndarray:
        """Boundary radius at arbitrary angles, by periodic linear interpolation."""
        th = np.mod(np.asarray(theta, dtype=float), TWO_PI)
        grid = np.arange(self.n_theta + 1) * (TWO_PI / self.n_theta)
        vals = np.concatenate((self.radii, self.radii[:1]))
        return np.interp(th, grid, vals)

    def contains_margin(self, points) -> np.ndarray:
        """Signed radial margin of points: positive inside, negative outside."""
        p = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        theta = np.arctan2(p[:, 1], p[:, 0])
        return self.radius_at(theta) - np.hypot(p[:, 0], p[:, 1])

    def to_dict(self) -> dict:
        return {
            "center": [float(self.center[0]), float(self.center[1])],
            "radii": [float(v) for v in self.radii],
            "n_theta": int(self.n_theta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StarShape":
        shape = cls(d["center"], d["radii"])
        if "n_theta" in d and int(d["n_theta"]) != shape.n_theta:
            raise ShapeError("n_theta does not match the radii array length")
        return shape


@dataclass(frozen=True)
class HalfSpaceSpec:
    """Half-space ``{x : x . direction > offset}`` and its bounding plane."""

    direction: np.ndarray
    offset: float

    def __init__(self, direction, offset):
        d = _as_point(direction)
        if abs(np.hypot(d[0], d[1]) - 1.0) > 1e-12:
            raise ShapeError("direction must be a unit vector (within 1e-12)")
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "offset", float(offset))

    @classmethod
    def from_angle(cls, alpha: float, offset: float) -> "HalfSpaceSpec":
        return cls((np.cos(alpha), np.sin(alpha)), offset)

    def signed_distance(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return p @ self.direction - self.offset

    def reflect(self, points) -> np.ndarray:
        """Mirror points across the bounding plane."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.signed_distance(p)
        return p - 2.0 * d[:, None] * self.direction[None, :]


@dataclass(frozen=True)
class ReflectionCheck:
    """Outcome of the plane-reflection predicate at a given inner radius rho."""

    passed: bool
    margin: float            # min clearance if passed, worst violation depth if not
    ball_margin: float       # inner radius minus rho (condition on containing the ball)
    n_directions: int
    n_offsets: int
    tol: float


@dataclass(frozen=True)
class GeometryReport:
    """Per-shape geometric certificates relative to the origin."""

    rho_reflection: ReflectionCheck
    star_radius: float
    inner_radius: float
    outer_radius: float
    annulus_width: float
    derived_star_radius: float = field(default=float("nan"))


# ---------------------------------------------------------------------------
# differentiation on the periodic angular grid

def _fourier_derivatives(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second theta-derivatives of periodic samples via FFT."""
    n = r.size
    coef = np.fft.rfft(r)
    k = np.arange(coef.size, dtype=float)
    c1 = coef * (1j * k)
    if n % 2 == 0:
        c1[-1] = 0.0  # odd operator annihilates the unresolved Nyquist mode
    d1 = np.fft.irfft(c1, n)
    d2 = np.fft.irfft(coef * -(k * k), n)
    return d1, d2


# ---------------------------------------------------------------------------
# measurements

def perimeter(shape: StarShape) -> float:
    """Boundary length, by periodic trapezoidal quadrature of sqrt(r^2 + r'^2)."""
    r = shape.radii
    d1, _ = _fourier_derivatives(r)
    integrand = np.hypot(r, d1)
    return float(integrand.sum() * (TWO_PI / r.size))

def area(shape: StarShape) -> float:
    """Enclosed area, (1/2) * integral of r(theta)^2."""
    r = shape.radii
    return float(0.5 * (r * r).sum() * (TWO_PI / r.size))


def curvature_profile(shape: StarShape) -> np.ndarray:
    """Signed boundary curvature at every sample; positive for convex sets."""
    r = shape.radii
    d1, d2 = _fourier_derivatives(r)
    g = r * r + d1 * d1
    return (r * r + 2.0 * d1 * d1 - r * d2) / np.power(g, 1.5)


def curvature_at(shape: StarShape, k: int) -> float:
    return float(curvature_profile(shape)[int(k) % shape.n_theta])


def outward_normals(shape: StarShape) -> np.ndarray:
    """Unit outward normals at every boundary sample, (n, 2)."""
    r = shape.radii
    d1, _ = _fourier_derivatives(r)
    th = shape.thetas
    nx = r * np.cos(th) + d1 * np.sin(th)
    ny = r * np.sin(th) - d1 * np.cos(th)
    norm = np.hypot(nx, ny)
    return np.column_stack((nx / norm, ny / norm))


def outward_normal_at(shape: StarShape, k: int) -> np.ndarray:
    return outward_normals(shape)[int(k) % shape.n_theta]


def inner_outer_radii(shape: StarShape) -> tuple[float, float]:
    """Min and max distance of the boundary from the origin."""
    p = shape.boundary_points()
    d = np.hypot(p[:, 0], p[:, 1])
    return float(d.min()), float(d.max())


def star_radius(shape: StarShape, about=(0.0, 0.0)) -> float:
    """Largest certified r such that the shape is star-shaped about B_r(about).

    Computed as the minimum over boundary samples of (x - about) . n_x.
    Raises if ``about`` lies outside the set, where the quantity is meaningless.
    """
    c = _as_point(about)
    if shape.contains_margin(c[None, :])[0] <= 0:
        raise ShapeError("reference point lies outside the set")
    p = shape.boundary_points()
    nu = outward_normals(shape)
    return float(np.einsum("ij,ij->i", p - c, nu).min())


# ---------------------------------------------------------------------------
# set metrics

def _segment_distances(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Min distance from each point to a closed polyline (vertex array)."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a                                    # (k, 2)
    denom = np.einsum("ij,ij->i", ab, ab)
    ap = points[:, None, :] - a[None, :, :]       # (m, k, 2)
    t = np.einsum("mkj,kj->mk", ap, ab) / denom[None, :]
    np.clip(t, 0.0, 1.0, out=t)
    proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.hypot(points[:, None, 0] - proj[:, :, 0], points[:, None, 1] - proj[:, :, 1])
    return d.min(axis=1)


def _directed_set_distance(a: StarShape, b: StarShape, upsample: int = 2) -> float:
    """sup over the set a of the distance to the set b (attained on the boundary)."""
    pa = a.boundary_points(upsample)
    margins = b.contains_margin(pa)
    outside = margins < 0
    if not np.any(outside):
        return 0.0
    d = _segment_distances(pa[outside], b.boundary_points(upsample))
    return float(d.max())


def hausdorff_distance(a: StarShape, b: StarShape) -> float:
    """Symmetric Hausdorff distance between the two closed sets.

    Shapes sharing the same center and angular grid compare radially, which
    is exact for concentric graphs; otherwise dense boundary samplings with
    containment handling are used.
    """
    if a.n_theta == b.n_theta and np.allclose(a.center, b.center, atol=1e-15):
        return float(np.abs(a.radii - b.radii).max())
    return max(_directed_set_distance(a, b), _directed_set_distance(b, a))


def boundary_hausdorff_distance(a: StarShape, b: StarShape) -> float:
    """Hausdorff distance between the two boundary curves."""
    if a.n_theta == b.n_theta and np.allclose(a.center, b.center, atol=1e-15):
        return float(np.abs(a.radii - b.radii).max())
    pa, pb = a.boundary_points(2), b.boundary_points(2)
    d_ab = _segment_distances(pa, pb).max()
    d_ba = _segment_distances(pb, pa).max()
    return float(max(d_ab, d_ba))


def pseudo_distance(e: StarShape, f: StarShape, cell: float | None = None) -> float:
    """Asymmetric dissipation metric: sqrt of the integral over the symmetric
    difference of the distance to the boundary of the FIRST argument.

    Both sets are rasterized on a common grid (default cell: bounding-box
    extent / 512); the unsigned distance to the first boundary comes from a
    Euclidean distance transform seeded on interface cells.
    """
    pts = np.vstack((e.boundary_points(), f.boundary_points()))
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    extent = float((hi - lo).max())
    if cell is None:
        cell = extent / 512.0
    if cell <= 0:
        raise ValueError("cell size must be positive")
    lo -= 2.0 * cell
    hi += 2.0 * cell
    nx = int(np.ceil((hi[0] - lo[0]) / cell)) + 1
    ny = int(np.ceil((hi[1] - lo[1]) / cell)) + 1
    if nx * ny > _MAX_RASTER_CELLS:
        raise RasterBudgetError(
            f"raster would need {nx * ny} cells (budget {_MAX_RASTER_CELLS}); "
            "use a coarser cell size"
        )
    xs = lo[0] + cell * np.arange(nx)
    ys = lo[1] + cell * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    centers = np.column_stack((gx.ravel(), gy.ravel()))

    margin_e = e.contains_margin(centers).reshape(nx, ny)
    margin_f = f.contains_margin(centers).reshape(nx, ny)
    in_e = margin_e > 0
    in_f = margin_f > 0
    sym = in_e ^ in_f
    if not np.any(sym):
        return 0.0

    # Interface band of the first set: cells within half a cell of the
    # boundary, plus sign-transition cells so the band is never broken.
    band = np.abs(margin_e) <= 0.5 * cell
    for ax in (0, 1):
        for shift in (1, -1):
            band |= in_e ^ np.roll(in_e, shift, axis=ax)
    dist = ndimage.distance_transform_edt(~band) * cell
    total = float(dist[sym].sum() * cell * cell)
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# reflection predicate and derived bounds

def rho_reflection_check(
    shape: StarShape,
    rho: float,
    n_directions: int = 128,
    n_offsets: int = 64,
    boundary_upsample: int = 2,
    tol: float | None = None,
) -> ReflectionCheck:
    """Check the plane-reflection property at inner radius ``rho``.

    Condition (i): the closed ball of radius rho about the origin lies inside.
    Condition (ii): for every direction nu and plane offset s > rho, the part
    of the set beyond the plane reflects into the set. The directions and
    offsets are discretized; boundary samples beyond each plane are reflected
    and tested for membership with a signed margin.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if tol is None:
        tol = GEOM_TOL_REL * shape.diameter

    pts = shape.boundary_points(boundary_upsample)
    inner, outer = inner_outer_radii(shape)
    ball_margin = inner - rho
    origin_inside = shape.contains_margin(np.zeros((1, 2)))[0] > 0
    worst = ball_margin if origin_inside else -np.inf

    if outer > rho:
        offsets = rho + (np.arange(1, n_offsets + 1) / n_offsets) * (outer - rho)
        for i in range(n_directions):
            alpha = TWO_PI * i / n_directions
            nu = np.array((np.cos(alpha), np.sin(alpha)))
            d = pts @ nu                                   # (m,)
            excess = d[None, :] - offsets[:, None]         # (s, m)
            beyond = excess > 0
            if not np.any(beyond):
                continue
            refl = pts[None, :, :] - 2.0 * excess[:, :, None] * nu[None, None, :]
            m = shape.contains_margin(refl.reshape(-1, 2)).reshape(excess.shape)
            worst = min(worst, float(m[beyond].min()))

    return ReflectionCheck(
        passed=bool(worst >= -tol),
        margin=float(worst),
        ball_margin=float(ball_margin),
        n_directions=n_directions,
        n_offsets=n_offsets,
        tol=float(tol),
    )


def annulus_and_derived_radius(shape: StarShape, rho: float) -> tuple[float, float]:
    """Boundary annulus width about the origin and the star radius certified
    by a passing reflection check: sqrt(inner^2 - rho^2)."""
    inner, outer = inner_outer_radii(shape)
    if inner <= rho:
        raise ShapeError("inner radius does not exceed rho; derived radius undefined")
    return outer - inner, float(np.sqrt(inner * inner - rho * rho))


def geometry_report(
    shape: StarShape,
    rho: float,
    n_directions: int = 128,
    n_offsets: int = 64,
    tol: float | None = None,
) -> GeometryReport:
    """Assemble the per-shape certificate bundle used by the audits."""
    check = rho_reflection_check(shape, rho, n_directions, n_offsets, tol=tol)
    inner, outer = inner_outer_radii(shape)
    try:
        sr = star_radius(shape, (0.0, 0.0))
    except ShapeError:
        sr = float("nan")
    derived = float(np.sqrt(inner * inner - rho * rho)) if inner > rho else float("nan")
    return GeometryReport(
        rho_reflection=check,
        star_radius=sr,
        inner_radius=inner,
        outer_radius=outer,
        annulus_width=outer - inner,
        derived_star_radius=derived,
    )


# ---------------------------------------------------------------------------
# morphology and scaling

def _chunked_polyline_distance(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    out = np.empty(points.shape[0])
    chunk = 8192
    for i in range(0, points.shape[0], chunk):
        out[i : i + chunk] = _segment_distances(points[i : i + chunk], poly)
    return out


def offset(shape: StarShape, a: float, scan: int = 48, iters: int = 30) -> StarShape:
    """Morphological erosion (a > 0) or dilation (a < 0) by a disk of radius |a|.

    Along each grid ray the outermost point satisfying the offset-set
    criterion is located by a coarse scan plus bisection. Applying the
    distance criterion against the full boundary prunes self-intersecting
    normal offsets automatically.
    """
    if a == 0.0:
        return shape
    poly = shape.boundary_points(2)
    th = shape.thetas
    r = shape.radii
    u = np.column_stack((np.cos(th), np.sin(th)))
    rows = np.arange(r.size)

    def criterion(t: np.ndarray) -> np.ndarray:
        pts = shape.center + t[:, None] * u
        d = _chunked_polyline_distance(pts, poly)
        if a > 0:
            # point survives erosion: inside and at depth >= a
            return (shape.contains_margin(pts) > 0) & (d >= a)
        # point covered by dilation: inside, or within |a| of the boundary
        return (shape.contains_margin(pts) > 0) | (d <= -a)

    if a > 0:
        if a >= r.min():
            raise ShapeError("erosion radius must be smaller than the inner radius")
        ts = r[:, None] * (1.0 - np.arange(scan)[None, :] / (scan - 1.0))
    else:
        t_top = r.max() + 1.5 * (-a)
        ts = np.tile(np.linspace(t_top, 0.0, scan), (r.size, 1))

    ok = np.empty(ts.shape, dtype=bool)
    for j in range(scan):
        ok[:, j] = criterion(ts[:, j])
    if not np.all(ok.any(axis=1)):
        raise ShapeError("offset empties the set along some ray")
    first = ok.argmax(axis=1)  # outermost scan index satisfying the criterion
    if a > 0:
        # deeper samples must stay eroded, else the result is not a polar graph
        deeper_bad = ~ok & (np.arange(scan)[None, :] > first[:, None])
        if np.any(deeper_bad & (ts > 1e-12)):
            raise ShapeError("erosion destroys star-shapedness about the center")

    t_good = ts[rows, first]
    t_bad = ts[rows, np.maximum(first - 1, 0)]
    for _ in range(iters):
        mid = 0.5 * (t_good + t_bad)
        good = criterion(mid)
        t_good = np.where(good, mid, t_good)
        t_bad = np.where(good, t_bad, mid)
    new_r = 0.5 * (t_good + t_bad)
    if np.any(new_r <= 0):
        raise ShapeError("offset empties the set")
    return StarShape(shape.center, new_r)


def scale_about_origin(shape: StarShape, factor: float) -> StarShape:
    """Dilate the set about the origin: radii and center both scale."""
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    return StarShape(shape.center * factor, shape.radii * factor)
