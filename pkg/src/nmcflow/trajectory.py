"""Time-indexed shape trajectories shared by the three evolution engines."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .forcing import ForcingLaw
from .geometry import ShapeError, StarShape

CSV_COLUMNS = (
    "t",
    "volume",
    "perimeter",
    "energy",
    "lambda",
    "star_radius",
    "inner_radius",
    "outer_radius",
    "hausdorff_to_fitted_ball",
)


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of an evolving shape with per-snapshot scalar series.

    Times are strictly increasing; all series arrays share the snapshot count.
    ``termination_reason`` is None for runs that reached their end time.
    """

    engine: str
    times: np.ndarray
    steps: np.ndarray
    shapes: tuple
    volume: np.ndarray
    perimeter: np.ndarray
    energy: np.ndarray
    lam: np.ndarray
    star_radius: np.ndarray
    inner_radius: np.ndarray
    outer_radius: np.ndarray
    termination_reason: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.times.size
        if n == 0:
            raise ValueError("trajectory must hold at least one snapshot")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        for name in ("steps", "volume", "perimeter", "energy", "lam",
                     "star_radius", "inner_radius", "outer_radius"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"series '{name}' length does not match times")
        if len(self.shapes) != n:
            raise ValueError("shape count does not match times")

    def __len__(self) -> int:
        return self.times.size

    def shape_at_time(self, t: float, atol: float = 1e-9) -> StarShape:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol:
            raise KeyError(f"no snapshot at t={t} (nearest is {self.times[i]})")
        return self.shapes[i]


class TrajectoryBuilder:
    """Accumulates snapshots during a run and freezes them into a Trajectory."""

    def __init__(self, engine: str, law: ForcingLaw):
        self.engine = engine
        self.law = law
        self._rows: list[tuple] = []
        self._shapes: list[StarShape] = []

    def add(self, t: float, step: int, shape: StarShape, lam_value: float | None = None):
        vol = geometry.area(shape)
        per = geometry.perimeter(shape)
        en = per - self.law.antiderivative(vol)
        if lam_value is None:
            lam_value = self.law.lam(vol)
        inner, outer = geometry.inner_outer_radii(shape)
        try:
            sr = geometry.star_radius(shape, (0.0, 0.0))
        except ShapeError:
            sr = float("nan")
        self._rows.append((t, step, vol, per, en, lam_value, sr, inner, outer))
        self._shapes.append(shape)

    def build(self, termination_reason: str | None = None, meta: dict | None = None) -> Trajectory:
        rows = np.array([r for r in self._rows], dtype=float)
        return Trajectory(
            engine=self.engine,
            times=rows[:, 0],
            steps=rows[:, 1].astype(int),
            shapes=tuple(self._shapes),
            volume=rows[:, 2],
            perimeter=rows[:, 3],
            energy=rows[:, 4],
            lam=rows[:, 5],
            star_radius=rows[:, 6],
            inner_radius=rows[:, 7],
            outer_radius=rows[:, 8],
            termination_reason=termination_reason,
            meta=dict(meta or {}),
        )


def write_trajectory_csv(traj: Trajectory, path, fitted_residuals=None) -> None:
    """Write the trajectory series as delimited text.

    ``fitted_residuals`` fills the hausdorff_to_fitted_ball column; when
    omitted the column is left as nan (the audit layer recomputes it).
    """
    n = len(traj)
    res = np.full(n, np.nan) if fitted_residuals is None else np.asarray(fitted_residuals, float)
    if res.shape != (n,):
        raise ValueError("fitted_residuals length does not match the trajectory")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for i in range(n):
            w.writerow([
                repr(float(traj.times[i])),
                repr(float(traj.volume[i])),
                repr(float(traj.perimeter[i])),
                repr(float(traj.energy[i])),
                repr(float(traj.lam[i])),
                repr(float(traj.star_radius[i])),
                repr(float(traj.inner_radius[i])),
                repr(float(traj.outer_radius[i])),
                repr(float(res[i])),
            ])


def read_trajectory_csv(path) -> dict:
    """Read a trajectory CSV back as a dict of column arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected trajectory columns: {header}")
        data = np.array([[float(v) for v in row] for row in reader])
    if data.size == 0:
        raise ValueError("trajectory file holds no rows")
    return {name: data[:, j] for j, name in enumerate(CSV_COLUMNS)}
