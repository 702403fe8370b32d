"""Blade-array environments, distance fields, and signature beams.

The world is a box containing axis-aligned blades arranged in columns
along x and extruded along y. All topology reasoning happens in the x-z
projection plane; "up" is +z.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels

Interval = tuple[float, float]
Point3 = tuple[float, float, float]


@dataclass(frozen=True)
class Blade:
    """One axis-aligned box obstacle, addressed by (column, row)."""

    x_interval: Interval
    y_interval: Interval
    z_interval: Interval
    row_index: int
    column_index: int

    def __post_init__(self):
        for name, (lo, hi) in (
            ("x_interval", self.x_interval),
            ("y_interval", self.y_interval),
            ("z_interval", self.z_interval),
        ):
            if not lo < hi:
                raise ValueError(f"degenerate blade {name}: ({lo}, {hi})")


@dataclass(frozen=True)
class Environment:
    """A bounded box world with an ordered list of blades."""

    bounds_min: Point3
    bounds_max: Point3
    blades: tuple[Blade, ...]
    columns: tuple[Interval, ...]  # x-interval per column index


@dataclass(frozen=True)
class BladeArraySpec:
    """Parameters for a regular rows-by-columns blade array.

    Each column is a vertical stack of `blades_per_column` blades separated
    by `gap` in z. Columns are spaced `column_spacing` apart in x starting
    at `first_column_x`. `column_z_offsets` shifts whole columns in z for
    staggered layouts (one entry per column, or empty for none).
    """

    bounds_min: Point3
    bounds_max: Point3
    num_columns: int
    blades_per_column: int
    blade_width: float
    blade_height: float
    gap: float
    first_column_x: float
    column_spacing: float
    z_start: float | None = None
    column_z_offsets: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Regular grid of clamped distances to the nearest blade surface."""

    origin: Point3
    resolution: float
    dims: tuple[int, int, int]
    values: np.ndarray  # shape == dims
    bounds_max: Point3
    d_max: float

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float)
        bmax = np.asarray(self.bounds_max, dtype=float)
        origin.flags.writeable = False
        bmax.flags.writeable = False
        object.__setattr__(self, "_origin_arr", origin)
        object.__setattr__(self, "_bmax_arr", bmax)


@dataclass(frozen=True)
class Beam:
    """Vertical signature ray anchored on a blade's projected top edge."""

    letter: int
    anchor: tuple[float, float]  # (x, z)
    top_z: float

    @property
    def x(self) -> float:
        return self.anchor[0]

    @property
    def z_interval(self) -> Interval:
        return (self.anchor[1], self.top_z)


def _boxes_overlap(a: Blade, b: Blade) -> bool:
    def ov(i: Interval, j: Interval) -> bool:
        return i[0] < j[1] and j[0] < i[1]

    return (
        ov(a.x_interval, b.x_interval)
        and ov(a.y_interval, b.y_interval)
        and ov(a.z_interval, b.z_interval)
    )


def environment_from_blades(
    bounds_min: Point3, bounds_max: Point3, blades: list[Blade] | tuple[Blade, ...]
) -> Environment:
    """Assemble and validate an environment from explicit blades."""
    if not all(bounds_min[i] < bounds_max[i] for i in range(3)):
        raise ValueError("degenerate environment bounds")
    blades = tuple(blades)
    for b in blades:
        inside = (
            bounds_min[0] <= b.x_interval[0]
            and b.x_interval[1] <= bounds_max[0]
            and bounds_min[1] <= b.y_interval[0]
            and b.y_interval[1] <= bounds_max[1]
            and bounds_min[2] <= b.z_interval[0]
            and b.z_interval[1] <= bounds_max[2]
        )
        if not inside:
            raise ValueError(f"blade {b.column_index}/{b.row_index} outside bounds")
    for i, a in enumerate(blades):
        for b in blades[i + 1 :]:
            if _boxes_overlap(a, b):
                raise ValueError(
                    f"overlapping blades ({a.column_index},{a.row_index}) and "
                    f"({b.column_index},{b.row_index})"
                )
    col_ids = sorted({b.column_index for b in blades})
    if col_ids and col_ids != list(range(len(col_ids))):
        raise ValueError(f"column indices not contiguous from 0: {col_ids}")
    columns = []
    for c in col_ids:
        xs = [b.x_interval for b in blades if b.column_index == c]
        columns.append((min(x[0] for x in xs), max(x[1] for x in xs)))
    return Environment(tuple(bounds_min), tuple(bounds_max), blades, tuple(columns))


def build_environment(spec: BladeArraySpec) -> Environment:
    """Build a regular blade array; raises on non-positive gaps or overlap."""
    if spec.num_columns < 1 or spec.blades_per_column < 1:
        raise ValueError("need at least one column and one blade per column")
    if spec.gap <= 0:
        raise ValueError(f"z gap must be positive, got {spec.gap}")
    if spec.blade_width <= 0 or spec.blade_height <= 0:
        raise ValueError("blade dimensions must be positive")

    stack_height = (
        spec.blades_per_column * spec.blade_height
        + (spec.blades_per_column - 1) * spec.gap
    )
    if spec.z_start is not None:
        z0 = spec.z_start
    else:
        z0 = 0.5 * (spec.bounds_min[2] + spec.bounds_max[2]) - 0.5 * stack_height
    offsets = spec.column_z_offsets or (0.0,) * spec.num_columns
    if len(offsets) != spec.num_columns:
        raise ValueError("column_z_offsets length must match num_columns")

    blades = []
    for c in range(spec.num_columns):
        x0 = spec.first_column_x + c * spec.column_spacing
        for r in range(spec.blades_per_column):
            zb = z0 + offsets[c] + r * (spec.blade_height + spec.gap)
            blades.append(
                Blade(
                    x_interval=(x0, x0 + spec.blade_width),
                    y_interval=(spec.bounds_min[1], spec.bounds_max[1]),
                    z_interval=(zb, zb + spec.blade_height),
                    row_index=r,
                    column_index=c,
                )
            )
    return environment_from_blades(spec.bounds_min, spec.bounds_max, blades)


def smallest_gap(env: Environment) -> float:
    """Smallest z gap between z-adjacent blades within any column."""
    best = math.inf
    for c in range(len(env.columns)):
        zs = sorted(b.z_interval for b in env.blades if b.column_index == c)
        for (lo0, hi0), (lo1, _) in zip(zs, zs[1:]):
            best = min(best, lo1 - hi0)
    return best


def build_distance_field(
    env: Environment, resolution: float, d_max: float = 1.0
) -> DistanceField:
    """Sample min(d_max, distance-to-nearest-blade-surface) at cell centers."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    gap = smallest_gap(env)
    if env.blades and resolution > gap:
        warnings.warn(
            f"distance-field resolution {resolution} exceeds smallest blade gap "
            f"{gap:.4f}; narrow passages may be unresolvable",
            stacklevel=2,
        )

    lo = np.asarray(env.bounds_min, dtype=float)
    hi = np.asarray(env.bounds_max, dtype=float)
    dims = tuple(max(1, int(math.ceil((hi[i] - lo[i]) / resolution))) for i in range(3))
    axes = [lo[i] + (np.arange(dims[i]) + 0.5) * resolution for i in range(3)]
    X = axes[0][:, None, None]
    Y = axes[1][None, :, None]
    Z = axes[2][None, None, :]

    values = np.full(dims, d_max, dtype=float)
    for b in env.blades:
        dx = np.maximum(np.maximum(b.x_interval[0] - X, X - b.x_interval[1]), 0.0)
        dy = np.maximum(np.maximum(b.y_interval[0] - Y, Y - b.y_interval[1]), 0.0)
        dz = np.maximum(np.maximum(b.z_interval[0] - Z, Z - b.z_interval[1]), 0.0)
        np.minimum(values, np.sqrt(dx * dx + dy * dy + dz * dz), out=values)
    np.minimum(values, d_max, out=values)
    return DistanceField(
        origin=tuple(lo),
        resolution=resolution,
        dims=dims,
        values=values,
        bounds_max=tuple(hi),
        d_max=d_max,
    )


def clearance_points(df: DistanceField, pts: np.ndarray) -> np.ndarray:
    """Trilinear clearance for an (n, 3) array of points; 0 outside bounds."""
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if _kernels.NUMBA:
        out = _kernels.trilinear_clearance(
            df.values, df._origin_arr, df.resolution, df._bmax_arr, pts
        )
        return out[0] if single else out
    lo = df._origin_arr
    hi = df._bmax_arr
    inside = np.all((pts >= lo) & (pts <= hi), axis=1)

    u = (pts - lo) / df.resolution - 0.5
    dims = np.asarray(df.dims)
    base = np.clip(np.floor(u).astype(int), 0, np.maximum(dims - 2, 0))
    frac = np.clip(u - base, 0.0, 1.0)
    nxt = np.minimum(base + 1, dims - 1)

    v = df.values
    i0, j0, k0 = base[:, 0], base[:, 1], base[:, 2]
    i1, j1, k1 = nxt[:, 0], nxt[:, 1], nxt[:, 2]
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]

    c00 = v[i0, j0, k0] * (1 - fx) + v[i1, j0, k0] * fx
    c01 = v[i0, j0, k1] * (1 - fx) + v[i1, j0, k1] * fx
    c10 = v[i0, j1, k0] * (1 - fx) + v[i1, j1, k0] * fx
    c11 = v[i0, j1, k1] * (1 - fx) + v[i1, j1, k1] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    out = np.where(inside, c0 * (1 - fz) + c1 * fz, 0.0)
    return out[0] if single else out


def clearance(df: DistanceField, p) -> float:
    """Clearance at a single 3-D point (meters)."""
    return float(clearance_points(df, np.asarray(p, dtype=float)))


def project(p) -> tuple[float, float]:
    """Drop the y coordinate: (x, y, z) -> (x, z)."""
    return (float(p[0]), float(p[2]))


def place_beams(env: Environment) -> list[Beam]:
    """One vertical beam per blade, anchored at the projected top-center.

    A beam runs upward until the first blade projection above it or the
    environment ceiling, whichever is lower. Letters are assigned in
    (column ascending, anchor z descending) order.
    """
    anchors = []
    for b in env.blades:
        xc = 0.5 * (b.x_interval[0] + b.x_interval[1])
        anchors.append((b, xc, b.z_interval[1]))

    order = sorted(
        range(len(anchors)),
        key=lambda i: (anchors[i][0].column_index, -anchors[i][2]),
    )
    beams = []
    for letter, idx in enumerate(order):
        blade, xc, z_anchor = anchors[idx]
        top = env.bounds_max[2]
        for other in env.blades:
            if other is blade:
                continue
            if other.x_interval[0] < xc < other.x_interval[1]:
                if other.z_interval[0] >= z_anchor:
                    top = min(top, other.z_interval[0])
        beams.append(Beam(letter=letter, anchor=(xc, z_anchor), top_z=top))
    return beams
