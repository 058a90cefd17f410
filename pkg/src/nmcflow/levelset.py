"""Grid level-set evolution of the positive phase under V = -H + forcing.

The scalar field u is positive inside the evolving set. Updates are explicit:
u += dt * (|Du| * kappa_eps + |Du| * forcing), with the curvature term
regularized at flat gradients and all derivatives by central differences.
Signed-distance structure is restored periodically without moving the zero
level, and shapes are extracted by radial ray casting from the origin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .forcing import ForcingLaw
from .geometry import StarShape, TWO_PI
from .trajectory import Trajectory, TrajectoryBuilder

FORCING_MODES = ("normalized", "fixed", "floored")


class GridError(ValueError):
    """Grid too small for the shape or otherwise unusable."""


class ExtractionError(RuntimeError):
    """The positive phase is not a radial graph about the origin."""


class CflError(RuntimeError):
    """Requested time step exceeds the stability bound."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice: nx-by-ny nodes, spacing dx, physical origin of node (0, 0)."""

    nx: int
    ny: int
    dx: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise GridError("grid must be at least 8x8")
        if self.dx <= 0:
            raise GridError("dx must be positive")

    @classmethod
    def centered_square(cls, half_width: float, dx: float) -> "GridSpec":
        n = int(round(2.0 * half_width / dx)) + 1
        return cls(n, n, dx, (-half_width, -half_width))

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin[0] + self.dx * np.arange(self.nx)
        ys = self.origin[1] + self.dx * np.arange(self.ny)
        return xs, ys


@dataclass(frozen=True)
class LevelSetField:
    """Field snapshot: values[ix, iy] on the grid, positive inside the set."""

    grid: GridSpec
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.nx, self.grid.ny):
            raise GridError("values shape does not match the grid")
        if not np.any(v > 0):
            raise GridError("positive phase is empty")
        if not np.any(np.abs(v) < 3.0 * self.grid.dx):
            raise GridError("no interface band present")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class LevelSetConfig:
    """Parameters of a grid run (forcing semantics match the flow engine)."""

    forcing_mode: str = "normalized"
    eta: float | Callable[[float], float] | None = None
    M: float | None = None
    dt_safety: float = 1.0            # scales the 0.25*dx^2/(1+dx*|forcing|) bound
    t_end: float = 0.1
    snapshot_stride: int = 200
    reinit_every: int = 50
    reinit_iterations: int = 16
    n_theta: int = 256                # extraction resolution
    checkpoint_times: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.forcing_mode not in FORCING_MODES:
            raise ValueError(f"forcing_mode must be one of {FORCING_MODES}")
        if self.forcing_mode == "fixed" and self.eta is None:
            raise ValueError("fixed mode requires eta")
        if self.forcing_mode == "floored" and (self.M is None or self.M <= 0):
            raise ValueError("floored mode requires M > 0")
        if not (0.0 < self.dt_safety <= 1.0):
            raise ValueError("dt_safety must lie in (0, 1]")


def init_from_shape(shape: StarShape, grid: GridSpec) -> LevelSetField:
    """Signed distance to the shape boundary on the grid, positive inside.

    Requires 5 dx of clearance between the boundary and the grid edge.
    """
    xs, ys = grid.node_coords()
    poly = shape.boundary_points(2)
    clearance = 5.0 * grid.dx
    if (poly[:, 0].min() - xs[0] < clearance or xs[-1] - poly[:, 0].max() < clearance
            or poly[:, 1].min() - ys[0] < clearance or ys[-1] - poly[:, 1].max() < clearance):
        raise GridError("shape does not fit in the grid with 5*dx clearance")

    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack((gx.ravel(), gy.ravel()))
    from .geometry import _chunked_polyline_distance  # same polyline metric as offsets

    dist = _chunked_polyline_distance(pts, poly)
    sign = np.where(shape.contains_margin(pts) > 0, 1.0, -1.0)
    return LevelSetField(grid, (sign * dist).reshape(grid.nx, grid.ny), time=0.0)


def positive_area(field: LevelSetField) -> float:
    """Area of the positive phase, exact for the piecewise-linear interpolant.

    Each cell is split into two triangles; the positive fraction of a linear
    function on a triangle has a closed form per sign pattern.
    """
    u = field.values
    dx = field.grid.dx
    a = u[:-1, :-1]
    b = u[1:, :-1]
    c = u[:-1, 1:]
    d = u[1:, 1:]
    tri_area = 0.5 * dx * dx
    total = 0.0
    for (v1, v2, v3) in ((a, b, c), (d, b, c)):
        pos1, pos2, pos3 = v1 > 0, v2 > 0, v3 > 0
        npos = pos1.astype(np.int8) + pos2.astype(np.int8) + pos3.astype(np.int8)
        frac = np.zeros_like(v1)
        frac[npos == 3] = 1.0
        for (p, q, r_) in ((v1, v2, v3), (v2, v3, v1), (v3, v1, v2)):
            solo = (p > 0) & ~(q > 0) & ~(r_ > 0)
            if np.any(solo):
                ps, qs, rs = p[solo], q[solo], r_[solo]
                frac[solo] = ps * ps / ((ps - qs) * (ps - rs))
            anti = ~(p > 0) & (q > 0) & (r_ > 0)
            if np.any(anti):
                pa, qa, ra = p[anti], q[anti], r_[anti]
                frac[anti] = 1.0 - pa * pa / ((pa - qa) * (pa - ra))
        total += float(frac.sum()) * tri_area
    return total


def _forcing_value(config: LevelSetConfig, law: ForcingLaw, vol: float, t: float) -> float:
    if config.forcing_mode == "normalized":
        return law.lam(vol)
    if config.eta is None:
        return law.lam(vol)
    return config.eta(t) if callable(config.eta) else float(config.eta)


def cfl_limit(field: LevelSetField, forcing: float, dt_safety: float = 1.0) -> float:
    dx = field.grid.dx
    return dt_safety * 0.25 * dx * dx / (1.0 + dx * abs(forcing))


def step_grid(field: LevelSetField, dt: float, law: ForcingLaw,
              config: LevelSetConfig) -> LevelSetField:
    """One explicit update. The forcing is frozen at the step's start volume."""
    vol = positive_area(field)
    forcing = _forcing_value(config, law, vol, field.time)
    if dt > cfl_limit(field, forcing, config.dt_safety) * (1.0 + 1e-9):
        raise CflError("dt exceeds the parabolic stability bound")
    new_vals = _apply_step(field.values, field.grid.dx, dt, forcing,
                           config.M if config.forcing_mode == "floored" else None)
    return LevelSetField(field.grid, new_vals, time=field.time + dt)


def _apply_step(u: np.ndarray, dx: float, dt: float, forcing: float,
                floor: float | None) -> np.ndarray:
    eps = 1e-6 * dx
    ux = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * dx)
    uy = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * dx)
    uxx = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / (dx * dx)
    uyy = (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / (dx * dx)
    uxy = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * dx * dx)
    grad2 = ux * ux + uy * uy + eps * eps
    kappa_term = (uxx * (uy * uy + eps * eps) - 2 * ux * uy * uxy
                  + uyy * (ux * ux + eps * eps)) / grad2  # |Du| * div(Du/|Du|)
    grad = np.sqrt(grad2)
    if floor is None:
        rate = kappa_term + grad * forcing
    else:
        rate = grad * np.maximum(kappa_term / grad + forcing, -floor)
    out = u.copy()
    out[1:-1, 1:-1] += dt * rate
    return out


def reinitialize(field: LevelSetField, iterations: int | None = None) -> LevelSetField:
    """Restore |Du| = 1 near the interface without moving the zero level.

    Interface-adjacent nodes relax toward a sub-cell distance estimate that
    pins the zero crossing; other nodes follow the upwind redistancing sweep.
    """
    u0 = field.values
    dx = field.grid.dx
    if iterations is None:
        iterations = 16
    s = u0 / np.sqrt(u0 * u0 + dx * dx)

    interface = np.zeros_like(u0, dtype=bool)
    pos = u0 > 0
    flip_x = pos[1:, :] != pos[:-1, :]
    flip_y = pos[:, 1:] != pos[:, :-1]
    interface[1:, :] |= flip_x
    interface[:-1, :] |= flip_x
    interface[:, 1:] |= flip_y
    interface[:, :-1] |= flip_y

    # sub-cell targets: first-order distance estimate u0/|grad u0| at interface
    # nodes, which preserves the incoming zero crossings
    dxc = np.zeros_like(u0)
    dyc = np.zeros_like(u0)
    dxc[1:-1, :] = (u0[2:, :] - u0[:-2, :]) / (2 * dx)
    dxc[0, :] = (u0[1, :] - u0[0, :]) / dx
    dxc[-1, :] = (u0[-1, :] - u0[-2, :]) / dx
    dyc[:, 1:-1] = (u0[:, 2:] - u0[:, :-2]) / (2 * dx)
    dyc[:, 0] = (u0[:, 1] - u0[:, 0]) / dx
    dyc[:, -1] = (u0[:, -1] - u0[:, -2]) / dx
    grad0 = np.maximum(np.hypot(dxc, dyc), 1e-12)
    target = u0 / grad0

    u = u0.copy()
    dtau = 0.5 * dx
    for _ in range(iterations):
        dmx = np.zeros_like(u)
        dpx = np.zeros_like(u)
        dmy = np.zeros_like(u)
        dpy = np.zeros_like(u)
        dmx[1:, :] = (u[1:, :] - u[:-1, :]) / dx
        dpx[:-1, :] = (u[1:, :] - u[:-1, :]) / dx
        dmy[:, 1:] = (u[:, 1:] - u[:, :-1]) / dx
        dpy[:, :-1] = (u[:, 1:] - u[:, :-1]) / dx
        # Godunov gradient norm oriented by the sign of u0
        ap = np.maximum(dmx, 0.0) ** 2
        am = np.minimum(dpx, 0.0) ** 2
        bp = np.maximum(dmy, 0.0) ** 2
        bm = np.minimum(dpy, 0.0) ** 2
        gpos = np.sqrt(np.maximum(ap, am) + np.maximum(bp, bm))
        an = np.minimum(dmx, 0.0) ** 2
        aq = np.maximum(dpx, 0.0) ** 2
        bn = np.minimum(dmy, 0.0) ** 2
        bq = np.maximum(dpy, 0.0) ** 2
        gneg = np.sqrt(np.maximum(an, aq) + np.maximum(bn, bq))
        g = np.where(u0 > 0, gpos, gneg)
        unew = u - dtau * s * (g - 1.0)
        # interface nodes are pinned: pure relaxation toward the sub-cell
        # distance target, never the redistancing sweep
        unew[interface] = u[interface] + (dtau / dx) * (target[interface] - u[interface])
        u = unew
    return LevelSetField(field.grid, u, time=field.time)


def bilinear(field: LevelSetField, points: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of the field at physical points."""
    g = field.grid
    fx = (points[:, 0] - g.origin[0]) / g.dx
    fy = (points[:, 1] - g.origin[1]) / g.dx
    if np.any(fx < 0) or np.any(fy < 0) or np.any(fx > g.nx - 1) or np.any(fy > g.ny - 1):
        raise GridError("interpolation point outside the grid")
    ix = np.minimum(fx.astype(int), g.nx - 2)
    iy = np.minimum(fy.astype(int), g.ny - 2)
    tx = fx - ix
    ty = fy - iy
    v = field.values
    return ((1 - tx) * (1 - ty) * v[ix, iy] + tx * (1 - ty) * v[ix + 1, iy]
            + (1 - tx) * ty * v[ix, iy + 1] + tx * ty * v[ix + 1, iy + 1])


def extract_shape(field: LevelSetField, n_theta: int = 256) -> StarShape:
    """Radial graph of the positive phase about the origin.

    Casts rays from the origin and finds the zero crossing by linear
    interpolation. A ray with more than one sign change (or a nonpositive
    origin value) means the phase is not star-shaped about the origin.
    """
    g = field.grid
    origin_val = bilinear(field, np.zeros((1, 2)))[0]
    if origin_val <= 0:
        raise ExtractionError("origin is not inside the positive phase")
    xs, ys = g.node_coords()
    t_max = min(-xs[0], xs[-1], -ys[0], ys[-1]) - g.dx
    if t_max <= 0:
        raise ExtractionError("origin is not interior to the grid")
    n_samples = max(int(np.ceil(t_max / (0.5 * g.dx))), 8)
    ts = np.linspace(0.0, t_max, n_samples + 1)[1:]
    radii = np.empty(n_theta)
    thetas = np.arange(n_theta) * (TWO_PI / n_theta)
    for k, th in enumerate(thetas):
        pts = np.column_stack((ts * np.cos(th), ts * np.sin(th)))
        vals = bilinear(field, pts)
        signs = np.concatenate(([origin_val], vals)) > 0
        flips = np.nonzero(signs[:-1] != signs[1:])[0]
        if flips.size == 0:
            raise ExtractionError(f"no zero crossing along the ray at theta={th:.4f}")
        if flips.size > 1:
            raise ExtractionError(
                f"multiple crossings along the ray at theta={th:.4f}; "
                "positive phase is not star-shaped about the origin"
            )
        i = flips[0]
        v0 = origin_val if i == 0 else vals[i - 1]
        t0 = 0.0 if i == 0 else ts[i - 1]
        v1 = vals[i]
        t1 = ts[i]
        radii[k] = t0 + (t1 - t0) * v0 / (v0 - v1)
    return StarShape((0.0, 0.0), radii)


def evolve_grid(shape0: StarShape, grid: GridSpec, config: LevelSetConfig,
                law: ForcingLaw) -> Trajectory:
    """Run the grid solver from a shape, recording extracted-shape snapshots."""
    field = init_from_shape(shape0, grid)
    u = field.values.copy()
    dx = grid.dx
    floor = config.M if config.forcing_mode == "floored" else None

    marks = sorted({float(c) for c in config.checkpoint_times if 0.0 < c <= config.t_end}
                   | {config.t_end})
    builder = TrajectoryBuilder("levelset", law)
    vol = positive_area(field)
    builder.add(0.0, 0, extract_shape(field, config.n_theta),
                _forcing_value(config, law, vol, 0.0))

    t = 0.0
    k_step = 0
    next_mark_idx = 0
    reason = None
    try:
        while t < config.t_end - 1e-14:
            cur = LevelSetField(grid, u, time=t)
            vol = positive_area(cur)
            forcing = _forcing_value(config, law, vol, t)
            dt = config.dt_safety * 0.25 * dx * dx / (1.0 + dx * abs(forcing))
            target = marks[next_mark_idx]
            clipped = False
            if t + dt >= target - 1e-14:
                dt = target - t
                clipped = True
            u = _apply_step(u, dx, dt, forcing, floor)
            t = target if clipped else t + dt
            k_step += 1
            if clipped:
                next_mark_idx = min(next_mark_idx + 1, len(marks) - 1)
            if k_step % config.reinit_every == 0:
                u = reinitialize(LevelSetField(grid, u, time=t),
                                 config.reinit_iterations).values.copy()
            if clipped or k_step % config.snapshot_stride == 0:
                snap = LevelSetField(grid, u, time=t)
                builder.add(t, k_step, extract_shape(snap, config.n_theta),
                            _forcing_value(config, law, positive_area(snap), t))
    except (ExtractionError, GridError) as exc:
        reason = str(exc)

    return builder.build(termination_reason=reason,
                         meta={"dx": dx, "nx": grid.nx, "ny": grid.ny,
                               "forcing_mode": config.forcing_mode})


# ---------------------------------------------------------------------------
# field snapshot files: JSON header next to a flat little-endian binary

def save_field(field: LevelSetField, path_prefix) -> tuple[str, str]:
    """Write ``<prefix>.json`` (header) and ``<prefix>.bin`` (float64 values).

    The binary holds nx*ny little-endian float64 values in C order with the
    x index slowest, matching values[ix, iy].
    """
    header = {
        "nx": field.grid.nx,
        "ny": field.grid.ny,
        "dx": field.grid.dx,
        "origin": list(field.grid.origin),
        "time": field.time,
        "dtype": "<f8",
        "order": "C (x index slowest)",
    }
    jpath = f"{path_prefix}.json"
    bpath = f"{path_prefix}.bin"
    with open(jpath, "w") as fh:
        json.dump(header, fh, indent=1)
    field.values.astype("<f8").tofile(bpath)
    return jpath, bpath


def load_field(path_prefix) -> LevelSetField:
    with open(f"{path_prefix}.json") as fh:
        header = json.load(fh)
    vals = np.fromfile(f"{path_prefix}.bin", dtype="<f8")
    grid = GridSpec(header["nx"], header["ny"], header["dx"], tuple(header["origin"]))
    return LevelSetField(grid, vals.reshape(grid.nx, grid.ny), time=header["time"])
