"""Shared fixtures: desk-scale robot, small worlds, deterministic stubs."""

from __future__ import annotations

import numpy as np
import pytest

from snakeplan import (
    Configuration,
    OptResult,
    RobotSpec,
    build_distance_field,
    environment_from_blades,
)
from snakeplan.env import Blade


def make_column(x0, width, passages, z_lo, z_hi, y_iv, col):
    """Blades forming one column with the given free z gaps."""
    edges = [z_lo]
    for p_lo, p_hi in sorted(passages):
        edges += [p_lo, p_hi]
    edges.append(z_hi)
    blades = []
    row = 0
    for b_lo, b_hi in zip(edges[::2], edges[1::2]):
        if b_hi - b_lo > 1e-9:
            blades.append(
                Blade(
                    x_interval=(x0, x0 + width),
                    y_interval=y_iv,
                    z_interval=(b_lo, b_hi),
                    row_index=row,
                    column_index=col,
                )
            )
            row += 1
    return blades


BOUNDS_MIN = (0.0, -0.4, 0.0)
BOUNDS_MAX = (3.0, 0.4, 1.6)


@pytest.fixture(scope="session")
def desk_robot() -> RobotSpec:
    return RobotSpec(
        num_units=5,
        subunits_per_unit=3,
        subunit_length=0.06,
        body_radius=0.035,
        pitch_limit=0.4,
        yaw_limit=0.4,
        prismatic_range=(0.0, 1.5),
        base_position=(0.12, 0.0, 0.8),
    )


@pytest.fixture(scope="session")
def empty_env():
    return environment_from_blades(BOUNDS_MIN, BOUNDS_MAX, [])


@pytest.fixture(scope="session")
def empty_df(empty_env):
    return build_distance_field(empty_env, 0.04)


@pytest.fixture(scope="session")
def two_column_env():
    """Passage at z [0.7, 0.9] in column 0, [0.55, 0.75] in column 1."""
    blades = make_column(1.15, 0.12, [(0.7, 0.9)], 0.0, 1.6, (-0.4, 0.4), 0)
    blades += make_column(1.75, 0.12, [(0.55, 0.75)], 0.0, 1.6, (-0.4, 0.4), 1)
    return environment_from_blades(BOUNDS_MIN, BOUNDS_MAX, blades)


@pytest.fixture(scope="session")
def two_column_df(two_column_env):
    return build_distance_field(two_column_env, 0.04)


def straight(n=5, ext=0.0) -> Configuration:
    return Configuration.straight(n, ext)


def jacobian_stub_generator(spec, iters: int = 12, damping: float = 0.3):
    """Deterministic tip-chasing generator: damped least-squares steps.

    Stands in for the black-box optimizer in lazy-vs-eager tests; the
    result depends only on (parent, target).
    """
    from snakeplan.robot import forward_kinematics

    lo = np.concatenate(
        [
            [spec.prismatic_range[0]],
            np.full(spec.num_units, -spec.pitch_limit),
            np.full(spec.num_units, -spec.yaw_limit),
        ]
    )
    hi = np.concatenate(
        [
            [spec.prismatic_range[1]],
            np.full(spec.num_units, spec.pitch_limit),
            np.full(spec.num_units, spec.yaw_limit),
        ]
    )

    def tip_of(vec):
        return forward_kinematics(spec, Configuration.from_vector(vec))[-1]

    def generator(ws, parent: Configuration, target, seed: int) -> OptResult:
        target = np.asarray(target, dtype=float)
        vec = parent.as_vector().copy()
        h = 1e-5
        for _ in range(iters):
            tip = tip_of(vec)
            err = target - tip
            if np.linalg.norm(err) <= ws.pc.effective_reach_tol:
                break
            jac = np.empty((3, len(vec)))
            for j in range(len(vec)):
                bumped = vec.copy()
                bumped[j] += h
                jac[:, j] = (tip_of(bumped) - tip) / h
            step, *_ = np.linalg.lstsq(jac, err, rcond=None)
            vec = np.clip(vec + damping * step, lo, hi)
        cand = Configuration.from_vector(vec)
        reach = float(np.linalg.norm(tip_of(vec) - target))
        return OptResult(
            candidate=cand,
            objective_value=reach,
            evaluations=iters,
            converged=reach <= ws.pc.effective_reach_tol,
        )

    return generator
