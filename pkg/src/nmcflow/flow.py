"""Front-tracking evolution of a polar graph under V = -H + forcing.

The boundary radius field r(theta, t) obeys r_t = V * sqrt(r^2 + r'^2) / r,
advanced by explicit Euler under a parabolic step-size restriction.
Spatial derivatives use central differences on the periodic grid, whose
stability limit the step-size rule is calibrated against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .forcing import ForcingLaw
from .geometry import StarShape, TWO_PI
from .trajectory import Trajectory, TrajectoryBuilder

FORCING_MODES = ("normalized", "fixed", "floored")


class CflError(RuntimeError):
    """Requested time step exceeds the stability bound."""


class BlowDownError(RuntimeError):
    """The evolving set collapsed (some radius reached zero)."""


@dataclass(frozen=True)
class FlowConfig:
    """Parameters of a front-tracking run.

    forcing_mode selects the velocity law: "normalized" uses the volume
    feedback lam(area); "fixed" uses the supplied eta(t); "floored" clips the
    normal speed below at -M and draws the forcing from eta when given, else
    from the volume feedback.
    """

    forcing_mode: str = "normalized"
    eta: float | Callable[[float], float] | None = None
    M: float | None = None
    dt_safety: float = 0.4
    t_end: float = 1.0
    snapshot_stride: int = 100
    checkpoint_times: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.forcing_mode not in FORCING_MODES:
            raise ValueError(f"forcing_mode must be one of {FORCING_MODES}")
        if not (0.0 < self.dt_safety <= 1.0):
            raise ValueError("dt_safety must lie in (0, 1]")
        if self.forcing_mode == "fixed" and self.eta is None:
            raise ValueError("fixed mode requires eta")
        if self.forcing_mode == "floored" and (self.M is None or self.M <= 0):
            raise ValueError("floored mode requires M > 0")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be at least 1")


def _forcing_value(config: FlowConfig, law: ForcingLaw, vol: float, t: float) -> float:
    if config.forcing_mode == "normalized":
        return law.lam(vol)
    if config.eta is None:
        return law.lam(vol)      # floored variant of the volume-feedback flow
    return config.eta(t) if callable(config.eta) else float(config.eta)


def _speeds(r, d1, d2, forcing, floor):
    g = r * r + d1 * d1
    kappa = (g + d1 * d1 - r * d2) / (g * np.sqrt(g))
    v = forcing - kappa
    if floor is not None:
        np.maximum(v, -floor, out=v)
    return v, g


def _central_derivatives(r, dtheta):
    rp = np.roll(r, -1)
    rm = np.roll(r, 1)
    d1 = (rp - rm) / (2.0 * dtheta)
    d2 = (rp - 2.0 * r + rm) / (dtheta * dtheta)
    return d1, d2


def normal_velocity(shape: StarShape, k: int, law: ForcingLaw,
                    config: FlowConfig, t: float = 0.0) -> float:
    """Outward normal speed at boundary sample k under the configured mode."""
    return float(normal_velocities(shape, law, config, t)[int(k) % shape.n_theta])


def normal_velocities(shape: StarShape, law: ForcingLaw,
                      config: FlowConfig, t: float = 0.0) -> np.ndarray:
    r = shape.radii
    dtheta = TWO_PI / r.size
    d1, d2 = _central_derivatives(r, dtheta)
    vol = float(0.5 * (r * r).sum() * dtheta)
    forcing = _forcing_value(config, law, vol, t)
    floor = config.M if config.forcing_mode == "floored" else None
    v, _ = _speeds(r, d1, d2, forcing, floor)
    return v


def cfl_limit(shape: StarShape, config: FlowConfig) -> float:
    """Largest admissible explicit step for the current shape."""
    dtheta = TWO_PI / shape.n_theta
    rmin = float(shape.radii.min())
    return config.dt_safety * (dtheta * rmin) ** 2


def step(shape: StarShape, dt: float, config: FlowConfig, law: ForcingLaw,
         t: float = 0.0) -> StarShape:
    """Single explicit Euler update of all radii; validates the result."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > cfl_limit(shape, config) * (1.0 + 1e-9):
        raise CflError(f"dt={dt} exceeds the stability limit {cfl_limit(shape, config)}")
    r = shape.radii
    dtheta = TWO_PI / r.size
    d1, d2 = _central_derivatives(r, dtheta)
    vol = float(0.5 * (r * r).sum() * dtheta)
    forcing = _forcing_value(config, law, vol, t)
    floor = config.M if config.forcing_mode == "floored" else None
    v, g = _speeds(r, d1, d2, forcing, floor)
    new_r = r + dt * v * np.sqrt(g) / r
    if np.any(new_r <= 0):
        raise BlowDownError(f"radius became nonpositive at t={t + dt}")
    return StarShape(shape.center, new_r)


def evolve(shape0: StarShape, config: FlowConfig, law: ForcingLaw) -> Trajectory:
    """Advance shape0 to t_end, recording snapshots every ``snapshot_stride``
    steps, at every requested checkpoint time, and at the final time."""
    n = shape0.n_theta
    dtheta = TWO_PI / n
    center = shape0.center.copy()
    r = shape0.radii.copy()
    floor = config.M if config.forcing_mode == "floored" else None

    marks = sorted({float(c) for c in config.checkpoint_times if 0.0 < c <= config.t_end}
                   | {config.t_end})
    builder = TrajectoryBuilder("flow", law)

    t = 0.0
    k_step = 0
    vol = float(0.5 * (r * r).sum() * dtheta)
    builder.add(0.0, 0, StarShape(center, r), _forcing_value(config, law, vol, 0.0)
                if config.forcing_mode != "normalized" else law.lam(vol))
    reason = None
    next_mark_idx = 0
    try:
        while t < config.t_end - 1e-14:
            rmin = r.min()
            dt = config.dt_safety * (dtheta * rmin) ** 2
            target = marks[next_mark_idx]
            clipped = False
            if t + dt >= target - 1e-14:
                dt = target - t
                clipped = True
            rp = np.roll(r, -1)
            rm = np.roll(r, 1)
            d1 = (rp - rm) / (2.0 * dtheta)
            d2 = (rp - 2.0 * r + rm) / (dtheta * dtheta)
            vol = float(0.5 * (r * r).sum() * dtheta)
            forcing = _forcing_value(config, law, vol, t)
            v, g = _speeds(r, d1, d2, forcing, floor)
            r = r + dt * v * np.sqrt(g) / r
            if np.any(r <= 0) or not np.all(np.isfinite(r)):
                raise BlowDownError(f"radius became nonpositive at t={t + dt}")
            t += dt
            k_step += 1
            at_mark = clipped
            if at_mark:
                t = target  # land exactly, avoiding float drift
                next_mark_idx = min(next_mark_idx + 1, len(marks) - 1)
            if at_mark or k_step % config.snapshot_stride == 0:
                vol_now = float(0.5 * (r * r).sum() * dtheta)
                builder.add(t, k_step, StarShape(center, r),
                            _forcing_value(config, law, vol_now, t))
    except BlowDownError as exc:
        reason = str(exc)

    return builder.build(termination_reason=reason,
                         meta={"dt_safety": config.dt_safety, "n_theta": n,
                               "forcing_mode": config.forcing_mode})


def circle_ode_oracle(
    r0: float,
    law: ForcingLaw,
    t_end: float,
    mode: str = "normalized",
    eta: float | Callable[[float], float] | None = None,
    floor: float | None = None,
    sample_times=None,
    dt_scale: float = 1e-4,
) -> tuple[np.ndarray, np.ndarray]:
    """Radial reduction R' = -(n-1)/R + forcing, integrated by classical RK4.

    Returns (times, radii) at the requested sample times (default: t_end
    only, prefixed by t=0). Any ambient dimension of the law is honored.
    Integration stops with a blow-down marker (nan radii) if R reaches zero.
    """
    if r0 <= 0:
        raise ValueError("initial radius must be positive")
    if mode not in FORCING_MODES:
        raise ValueError(f"mode must be one of {FORCING_MODES}")
    n = law.n

    def forcing_at(rr: float, t: float) -> float:
        if mode == "normalized" or (mode == "floored" and eta is None):
            return law.lam(law.w_n * rr**n)
        return eta(t) if callable(eta) else float(eta)

    def rhs(rr: float, t: float) -> float:
        v = -(n - 1) / rr + forcing_at(rr, t)
        if mode == "floored":
            v = max(v, -float(floor))
        return v

    if sample_times is None:
        sample_times = [t_end]
    samples = sorted({float(s) for s in sample_times if 0.0 < s <= t_end} | {t_end})
    out_t = [0.0]
    out_r = [float(r0)]

    dt_max = dt_scale * max(t_end, 1e-12)
    t, rr = 0.0, float(r0)
    alive = True
    for target in samples:
        while alive and t < target - 1e-15:
            dt = min(dt_max, target - t)
            k1 = rhs(rr, t)
            k2 = rhs(rr + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = rhs(rr + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = rhs(rr + dt * k3, t + dt)
            rr_new = rr + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if rr_new <= 0 or not np.isfinite(rr_new):
                alive = False
                break
            rr, t = rr_new, t + dt
        out_t.append(target)
        out_r.append(rr if alive else float("nan"))
    return np.array(out_t), np.array(out_r)
