"""Kinematics and validity checks for the serpentine manipulator.

The robot is a prismatic base followed by `num_units` flexible units, each
modeled as `subunits_per_unit` rigid segments that all mimic the unit's
pitch/yaw relative to their predecessor. Collision checking treats each
body point as a sphere of `body_radius` against the distance field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .env import DistanceField, Environment, clearance_points


@dataclass(frozen=True)
class RobotSpec:
    num_units: int
    subunits_per_unit: int
    subunit_length: float
    body_radius: float
    pitch_limit: float
    yaw_limit: float
    prismatic_range: tuple[float, float]
    base_position: tuple[float, float, float]
    base_forward: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.num_units < 1 or self.subunits_per_unit < 1:
            raise ValueError("need at least one unit and one subunit per unit")
        if self.subunit_length <= 0 or self.body_radius <= 0:
            raise ValueError("subunit_length and body_radius must be positive")
        if self.pitch_limit <= 0 or self.yaw_limit <= 0:
            raise ValueError("joint limits must be positive")
        if not self.prismatic_range[0] < self.prismatic_range[1]:
            raise ValueError("prismatic_range must be a non-degenerate interval")
        f = np.asarray(self.base_forward, dtype=float)
        n = np.linalg.norm(f)
        if n == 0:
            raise ValueError("base_forward must be nonzero")
        f = f / n
        object.__setattr__(self, "base_forward", tuple(f))
        up_hint = np.array([0.0, 0.0, 1.0])
        if abs(np.dot(f, up_hint)) > 0.99:
            up_hint = np.array([0.0, 1.0, 0.0])
        lateral = np.cross(up_hint, f)
        lateral /= np.linalg.norm(lateral)
        up = np.cross(f, lateral)
        rot = np.column_stack([f, lateral, up])
        rot.flags.writeable = False
        pos = np.asarray(self.base_position, dtype=float)
        pos.flags.writeable = False
        object.__setattr__(self, "_base_rot", rot)
        object.__setattr__(self, "_base_pos", pos)
        n = self.num_units
        lo = np.concatenate(
            [
                [self.prismatic_range[0]],
                np.full(n, -self.pitch_limit),
                np.full(n, -self.yaw_limit),
            ]
        )
        hi = np.concatenate(
            [
                [self.prismatic_range[1]],
                np.full(n, self.pitch_limit),
                np.full(n, self.yaw_limit),
            ]
        )
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "_joint_lo", lo)
        object.__setattr__(self, "_joint_hi", hi)

    @property
    def dof(self) -> int:
        return 1 + 2 * self.num_units

    @property
    def total_length(self) -> float:
        return self.num_units * self.subunits_per_unit * self.subunit_length

    def base_frame(self) -> np.ndarray:
        """World-from-local rotation; columns are (forward, lateral, up)."""
        return self._base_rot.copy()


@dataclass(frozen=True, eq=False)
class Configuration:
    """Joint state: prismatic extension plus per-unit pitch and yaw."""

    extension: float
    pitch: np.ndarray
    yaw: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pitch, dtype=float)
        y = np.asarray(self.yaw, dtype=float)
        if p.shape != y.shape or p.ndim != 1:
            raise ValueError("pitch and yaw must be 1-D arrays of equal length")
        ext = float(self.extension)
        n = len(p)
        vec = np.empty(1 + 2 * n)
        vec[0] = ext
        vec[1 : 1 + n] = p
        vec[1 + n :] = y
        vec.flags.writeable = False
        object.__setattr__(self, "pitch", vec[1 : 1 + n])
        object.__setattr__(self, "yaw", vec[1 + n :])
        object.__setattr__(self, "extension", ext)
        object.__setattr__(self, "_vec", vec)

    @property
    def num_units(self) -> int:
        return len(self.pitch)

    def as_vector(self) -> np.ndarray:
        """Stacked (extension, pitch..., yaw...) vector; read-only view."""
        return self._vec

    @classmethod
    def from_vector(cls, vec) -> "Configuration":
        vec = np.asarray(vec, dtype=float)
        n = (len(vec) - 1) // 2
        if len(vec) != 1 + 2 * n:
            raise ValueError(f"vector length {len(vec)} is not 1 + 2n")
        return cls(extension=vec[0], pitch=vec[1 : 1 + n], yaw=vec[1 + n :])

    @classmethod
    def straight(cls, num_units: int, extension: float = 0.0) -> "Configuration":
        return cls(extension, np.zeros(num_units), np.zeros(num_units))


def _pitch_matrix(theta: float) -> np.ndarray:
    # rotates local forward toward local up for positive theta
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def _yaw_matrix(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def forward_kinematics(spec: RobotSpec, c: Configuration) -> np.ndarray:
    """Body points (base then every subunit joint), shape (N*M + 1, 3).

    Every subunit of unit k rotates by (pitch_k, yaw_k) relative to its
    predecessor: pitch about the local lateral axis first, then yaw about
    the pitched vertical axis.
    """
    if c.num_units != spec.num_units:
        raise ValueError(
            f"configuration has {c.num_units} units, spec has {spec.num_units}"
        )
    if _kernels.NUMBA:
        return _kernels.fk_points(
            c.extension,
            c.pitch,
            c.yaw,
            spec._base_pos,
            spec._base_rot,
            spec.subunits_per_unit,
            spec.subunit_length,
        )
    m = spec.subunits_per_unit
    pts = np.empty((spec.num_units * m + 1, 3))
    rot = spec.base_frame()
    pos = spec._base_pos + c.extension * spec._base_rot[:, 0]
    pts[0] = pos
    i = 1
    for k in range(spec.num_units):
        step = _pitch_matrix(c.pitch[k]) @ _yaw_matrix(c.yaw[k])
        for _ in range(m):
            rot = rot @ step
            pos = pos + spec.subunit_length * rot[:, 0]
            pts[i] = pos
            i += 1
    return pts


def end_effector(spec: RobotSpec, c: Configuration) -> np.ndarray:
    """World position of the manipulator tip."""
    return forward_kinematics(spec, c)[-1]


def within_limits(spec: RobotSpec, c: Configuration, tol: float = 1e-9) -> bool:
    vec = c.as_vector()
    return bool(
        np.all(vec >= spec._joint_lo - tol) and np.all(vec <= spec._joint_hi + tol)
    )


def _self_collides(spec: RobotSpec, pts: np.ndarray) -> bool:
    # points closer than 2 subunits along the chain may always touch
    n = len(pts)
    if n < 4:
        return False
    diff = pts[:, None, :] - pts[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    idx = np.arange(n)
    chain = np.abs(idx[:, None] - idx[None, :])
    mask = chain > 2
    threshold = 2.0 * spec.body_radius
    return bool(np.any(dist2[mask] <= threshold * threshold))


def is_valid_state(
    spec: RobotSpec,
    env: Environment,
    df: DistanceField,
    c: Configuration,
    body: np.ndarray | None = None,
) -> bool:
    """Joint limits, blade clearance, and self-collision in one check."""
    if not within_limits(spec, c):
        return False
    pts = forward_kinematics(spec, c) if body is None else body
    if _kernels.NUMBA:
        return bool(
            _kernels.sphere_chain_clear(
                df.values,
                df._origin_arr,
                df.resolution,
                df._bmax_arr,
                pts,
                spec.body_radius,
            )
        )
    if np.any(clearance_points(df, pts) <= spec.body_radius):
        return False
    return not _self_collides(spec, pts)


def interpolation_steps(
    a: Configuration,
    b: Configuration,
    step_rev: float = 0.05,
    step_pris: float = 0.01,
) -> int:
    """Number of joint-space interpolation intervals between a and b."""
    if step_rev <= 0 or step_pris <= 0:
        raise ValueError("interpolation steps must be positive")
    d = np.abs(a.as_vector() - b.as_vector())
    d_ang = float(np.max(d[1:])) if len(d) > 1 else 0.0
    return max(1, math.ceil(d_ang / step_rev), math.ceil(d[0] / step_pris))


def is_valid_transition(
    spec: RobotSpec,
    env: Environment,
    df: DistanceField,
    a: Configuration,
    b: Configuration,
    step_rev: float = 0.05,
    step_pris: float = 0.01,
    state_check=None,
) -> bool:
    """Linear joint-space sweep validity, endpoints included.

    `state_check(config) -> bool` overrides the per-state check; the
    planner passes a caching wrapper around is_valid_state.
    """
    check = state_check or (lambda q: is_valid_state(spec, env, df, q))
    n = interpolation_steps(a, b, step_rev, step_pris)
    va, vb = a.as_vector(), b.as_vector()
    for i in range(n + 1):
        t = i / n
        q = a if i == 0 else (b if i == n else Configuration.from_vector(va + t * (vb - va)))
        if not check(q):
            return False
    return True


def transition_cost(spec: RobotSpec, a: Configuration, b: Configuration) -> float:
    """Euclidean distance between the two end-effector positions."""
    return float(np.linalg.norm(end_effector(spec, a) - end_effector(spec, b)))


def successor_vectors(
    spec: RobotSpec, vec: np.ndarray, delta_rev: float, delta_pris: float
) -> np.ndarray:
    """Joint vectors one signed step away; limit-violating rows omitted."""
    d = len(vec)
    deltas = np.empty(d)
    deltas[0] = delta_pris
    deltas[1:] = delta_rev
    cand = np.repeat(vec[None, :], 2 * d, axis=0)
    idx = np.arange(d)
    cand[2 * idx, idx] += deltas
    cand[2 * idx + 1, idx] -= deltas
    ok = np.all(
        (cand >= spec._joint_lo - 1e-12) & (cand <= spec._joint_hi + 1e-12), axis=1
    )
    return cand[ok]
