"""Continuous neighbor generation by black-box objective minimization.

A neighbor of a stuck state is the configuration minimizing a weighted sum
of obstacle cost (reciprocal summed body clearance), distance of the tip
to a nearby end-effector target, and reconfiguration distance from the
stuck state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cmaes import cmaes_minimize, default_popsize
from .env import DistanceField, clearance_points
from .robot import Configuration, RobotSpec, forward_kinematics

COLLISION_PENALTY = 1e6


@dataclass(frozen=True)
class ObjectiveWeights:
    goal_weight: float = 10.0
    state_weight: float = 1.0

    def __post_init__(self):
        if self.goal_weight <= 0 or self.state_weight <= 0:
            raise ValueError("objective weights must be positive")


@dataclass(frozen=True, eq=False)
class OptRequest:
    start: Configuration
    ee_goal: tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class OptResult:
    candidate: Configuration
    objective_value: float
    evaluations: int
    converged: bool


def obstacle_cost(
    spec: RobotSpec,
    df: DistanceField,
    c: Configuration,
    body: np.ndarray | None = None,
) -> float:
    """Reciprocal of the surface-clearance integral along the body.

    The body is a sphere chain of radius body_radius, so the distance of
    "every point on the robot" to the blades is the field value minus that
    radius. Any touching sphere (margin <= 0) yields a flat penalty, which
    keeps the landscape finite but makes physically colliding candidates
    never beat a valid one. Each subunit joint weights one subunit_length
    of body; the base point carries no body mass.
    """
    pts = forward_kinematics(spec, c) if body is None else body
    margin = clearance_points(df, pts[1:]) - spec.body_radius
    deficit = float(-np.sum(margin[margin <= 0.0]))
    if deficit > 0.0 or np.any(margin == 0.0):
        # graded by penetration depth so the optimizer can climb back out
        return COLLISION_PENALTY * (1.0 + deficit)
    return 1.0 / float(np.sum(margin) * spec.subunit_length)


def goal_cost(
    spec: RobotSpec,
    c: Configuration,
    g,
    body: np.ndarray | None = None,
) -> float:
    pts = forward_kinematics(spec, c) if body is None else body
    return float(np.linalg.norm(pts[-1] - np.asarray(g, dtype=float)))


def state_cost(a: Configuration, b: Configuration) -> float:
    return float(np.linalg.norm(a.as_vector() - b.as_vector()))


def objective(
    spec: RobotSpec,
    df: DistanceField,
    req: OptRequest,
    w: ObjectiveWeights,
    c: Configuration,
    body: np.ndarray | None = None,
) -> float:
    if body is None:
        body = forward_kinematics(spec, c)
    return (
        obstacle_cost(spec, df, c, body)
        + w.goal_weight * goal_cost(spec, c, req.ee_goal, body)
        + w.state_weight * state_cost(req.start, c)
    )


def _joint_box(spec: RobotSpec):
    n = spec.num_units
    lo = np.concatenate(
        [[spec.prismatic_range[0]], -spec.pitch_limit * np.ones(n), -spec.yaw_limit * np.ones(n)]
    )
    hi = np.concatenate(
        [[spec.prismatic_range[1]], spec.pitch_limit * np.ones(n), spec.yaw_limit * np.ones(n)]
    )
    return lo, hi


def six_connected_ee_goals(spec: RobotSpec, c: Configuration, eps: float) -> np.ndarray:
    """Unit end-effector targets: tip +- eps along each world axis."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    tip = forward_kinematics(spec, c)[-1]
    out = np.repeat(tip[None, :], 6, axis=0)
    for axis in range(3):
        out[2 * axis, axis] += eps
        out[2 * axis + 1, axis] -= eps
    return out


def generate_neighbor(
    req: OptRequest,
    w: ObjectiveWeights,
    spec: RobotSpec,
    df: DistanceField,
    seed: int = 0,
    sigma0: float = 0.1,
    budget: int = 1500,
    popsize: int | None = None,
    reach_tol: float = 0.05,
) -> OptResult:
    """Minimize the objective toward one end-effector target.

    Joint limits are enforced with a sine box mapping so the optimizer
    sees an unconstrained space. Converged means the candidate tip landed
    within reach_tol of the target.
    """
    lo, hi = _joint_box(spec)
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)

    def to_config(y: np.ndarray) -> Configuration:
        return Configuration.from_vector(center + half * np.sin(y))

    def fun(y: np.ndarray) -> float:
        return objective(spec, df, req, w, to_config(y))

    x0 = req.start.as_vector()
    y0 = np.arcsin(np.clip((x0 - center) / half, -1.0, 1.0))
    try:
        res = cmaes_minimize(
            fun, y0, sigma0, budget, seed=seed, popsize=popsize or default_popsize(len(y0))
        )
    except ValueError:
        return OptResult(req.start, math.inf, 0, False)

    candidate = to_config(res.x)
    value = objective(spec, df, req, w, candidate)
    if not math.isfinite(value):
        return OptResult(req.start, math.inf, res.evaluations, False)
    converged = goal_cost(spec, candidate, req.ee_goal) <= reach_tol
    return OptResult(candidate, value, res.evaluations, converged)
