"""Scenario and plan files, plus procedural suite generation.

Scenario files are line-oriented key-value text under [section] headers,
so they diff cleanly and need no parser dependency. Suites are generated
deterministically from a seed; goals are placed at the tip of a randomly
walked valid configuration so every goal is reachable by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .env import (
    Blade,
    DistanceField,
    Environment,
    build_distance_field,
    environment_from_blades,
)
from .robot import (
    Configuration,
    RobotSpec,
    forward_kinematics,
    is_valid_state,
    is_valid_transition,
)
from .search import predefined_successors


class ScenarioParseError(ValueError):
    """Malformed scenario file; message names the line and field."""


class ScenarioValidationError(ValueError):
    """Syntactically fine but semantically invalid scenario."""


@dataclass(frozen=True)
class GoalPose:
    position: tuple[float, float, float]
    forward: tuple[float, float, float] | None = None


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    seed: int
    environment: Environment
    robot: RobotSpec
    start: Configuration
    goal: GoalPose
    df_resolution: float = 0.04
    df_max: float = 1.0

    def build_distance_field(self) -> DistanceField:
        return build_distance_field(self.environment, self.df_resolution, self.df_max)


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split()]


def _fail(path, lineno, field, msg) -> ScenarioParseError:
    return ScenarioParseError(f"{path}:{lineno}: field '{field}': {msg}")


def load_scenario(path, validate: bool = True) -> Scenario:
    """Parse and (optionally) validate a scenario file."""
    path = Path(path)
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    blades_raw: list[tuple[str, int]] = []
    current = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                sections.setdefault(current, {})
                continue
            if "=" not in line:
                raise ScenarioParseError(f"{path}:{lineno}: expected 'key = value'")
            if current is None:
                raise ScenarioParseError(f"{path}:{lineno}: key outside any section")
            key, value = (part.strip() for part in line.split("=", 1))
            if current == "environment" and key == "blade":
                blades_raw.append((value, lineno))
            else:
                sections[current][key] = (value, lineno)

    def need(section, key, parse=_floats):
        if section not in sections or key not in sections[section]:
            raise ScenarioParseError(f"{path}: missing field '{key}' in [{section}]")
        value, lineno = sections[section][key]
        try:
            return parse(value)
        except ValueError as exc:
            raise _fail(path, lineno, key, str(exc)) from exc

    def optional(section, key, default, parse=_floats):
        if section not in sections or key not in sections[section]:
            return default
        value, lineno = sections[section][key]
        try:
            return parse(value)
        except ValueError as exc:
            raise _fail(path, lineno, key, str(exc)) from exc

    name = optional("scenario", "name", path.stem, parse=str.strip)
    seed = int(optional("scenario", "seed", 0, parse=lambda s: int(s)))

    bounds = need("environment", "bounds")
    if len(bounds) != 6:
        raise ScenarioParseError(f"{path}: bounds needs 6 numbers, got {len(bounds)}")
    bounds_min = (bounds[0], bounds[2], bounds[4])
    bounds_max = (bounds[1], bounds[3], bounds[5])
    blades = []
    for value, lineno in blades_raw:
        nums = _floats(value)
        if len(nums) != 6:
            raise _fail(path, lineno, "blade", "expected: column row x0 x1 z0 z1")
        col, row, x0, x1, z0, z1 = nums
        blades.append(
            Blade(
                x_interval=(x0, x1),
                y_interval=(bounds_min[1], bounds_max[1]),
                z_interval=(z0, z1),
                row_index=int(row),
                column_index=int(col),
            )
        )
    try:
        env = environment_from_blades(bounds_min, bounds_max, blades)
    except ValueError as exc:
        raise ScenarioValidationError(f"{path}: {exc}") from exc

    resolution = float(optional("environment", "resolution", [0.04])[0])
    d_max = float(optional("environment", "clearance_cap", [1.0])[0])

    pr = need("robot", "prismatic_range")
    base_pos = need("robot", "base_position")
    base_fwd = optional("robot", "base_forward", [1.0, 0.0, 0.0])
    robot = RobotSpec(
        num_units=int(need("robot", "num_units")[0]),
        subunits_per_unit=int(need("robot", "subunits_per_unit")[0]),
        subunit_length=need("robot", "subunit_length")[0],
        body_radius=need("robot", "body_radius")[0],
        pitch_limit=need("robot", "pitch_limit")[0],
        yaw_limit=need("robot", "yaw_limit")[0],
        prismatic_range=(pr[0], pr[1]),
        base_position=tuple(base_pos),
        base_forward=tuple(base_fwd),
    )

    pitch = need("start", "pitch")
    yaw = need("start", "yaw")
    start = Configuration(
        extension=need("start", "extension")[0],
        pitch=np.asarray(pitch),
        yaw=np.asarray(yaw),
    )
    if start.num_units != robot.num_units:
        raise ScenarioValidationError(
            f"{path}: start has {start.num_units} units, robot has {robot.num_units}"
        )

    gpos = need("goal", "position")
    gfwd = optional("goal", "forward", None)
    goal = GoalPose(position=tuple(gpos), forward=tuple(gfwd) if gfwd else None)

    scenario = Scenario(
        name=name,
        seed=seed,
        environment=env,
        robot=robot,
        start=start,
        goal=goal,
        df_resolution=resolution,
        df_max=d_max,
    )
    if validate:
        validate_scenario(scenario)
    return scenario


def validate_scenario(scenario: Scenario) -> None:
    lo, hi = scenario.environment.bounds_min, scenario.environment.bounds_max
    g = scenario.goal.position
    if not all(lo[i] <= g[i] <= hi[i] for i in range(3)):
        raise ScenarioValidationError(f"goal position {g} outside bounds")
    df = scenario.build_distance_field()
    if not is_valid_state(scenario.robot, scenario.environment, df, scenario.start):
        raise ScenarioValidationError("start configuration is invalid")


def _fmt(values) -> str:
    return " ".join(f"{float(v):.9g}" for v in values)


def write_scenario(scenario: Scenario, path) -> None:
    env = scenario.environment
    lines = [
        "[scenario]",
        f"name = {scenario.name}",
        f"seed = {scenario.seed}",
        "",
        "[environment]",
        "bounds = "
        + _fmt(
            [
                env.bounds_min[0],
                env.bounds_max[0],
                env.bounds_min[1],
                env.bounds_max[1],
                env.bounds_min[2],
                env.bounds_max[2],
            ]
        ),
        f"resolution = {scenario.df_resolution:.9g}",
        f"clearance_cap = {scenario.df_max:.9g}",
    ]
    for b in env.blades:
        lines.append(
            f"blade = {b.column_index} {b.row_index} "
            + _fmt([b.x_interval[0], b.x_interval[1], b.z_interval[0], b.z_interval[1]])
        )
    r = scenario.robot
    lines += [
        "",
        "[robot]",
        f"num_units = {r.num_units}",
        f"subunits_per_unit = {r.subunits_per_unit}",
        f"subunit_length = {r.subunit_length:.9g}",
        f"body_radius = {r.body_radius:.9g}",
        f"pitch_limit = {r.pitch_limit:.9g}",
        f"yaw_limit = {r.yaw_limit:.9g}",
        f"prismatic_range = {_fmt(r.prismatic_range)}",
        f"base_position = {_fmt(r.base_position)}",
        f"base_forward = {_fmt(r.base_forward)}",
        "",
        "[start]",
        f"extension = {scenario.start.extension:.9g}",
        f"pitch = {_fmt(scenario.start.pitch)}",
        f"yaw = {_fmt(scenario.start.yaw)}",
        "",
        "[goal]",
        f"position = {_fmt(scenario.goal.position)}",
    ]
    if scenario.goal.forward is not None:
        lines.append(f"forward = {_fmt(scenario.goal.forward)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_plan(path, scenario_name: str, states, cost: float) -> None:
    lines = [
        "# snakeplan plan",
        f"# scenario = {scenario_name}",
        f"# cost = {cost:.9f}",
        f"# states = {len(states)}",
    ]
    for c in states:
        lines.append("state = " + _fmt(c.as_vector()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_plan(path) -> list[Configuration]:
    states = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "state":
                states.append(Configuration.from_vector(_floats(value)))
    return states


def revalidate_plan(scenario: Scenario, states, goal_checker=None) -> bool:
    """End-to-end recheck: every transition valid, endpoint in the goal set."""
    if not states:
        return False
    df = scenario.build_distance_field()
    for a, b in zip(states, states[1:]):
        if not is_valid_transition(scenario.robot, scenario.environment, df, a, b):
            return False
    if goal_checker is not None:
        return goal_checker(states[-1])
    return True


# --- procedural suites ------------------------------------------------------

DIFFICULTIES = ("open", "passages", "traps")


@dataclass(frozen=True)
class SuiteParams:
    """Geometry knobs for generated scenarios (desk scale defaults).

    The robot is short relative to its prismatic stroke so the straight
    start pose sits in front of the first blade column and the tip can
    still reach well past the last one.
    """

    num_units: int = 5
    subunits_per_unit: int = 3
    subunit_length: float = 0.06
    body_radius: float = 0.035
    pitch_limit: float = 0.4
    yaw_limit: float = 0.4
    prismatic_range: tuple[float, float] = (0.0, 1.5)
    bounds: tuple[float, float, float, float, float, float] = (0.0, 3.0, -0.4, 0.4, 0.0, 1.6)
    base_x: float = 0.12
    base_z: float = 0.8
    blade_width: float = 0.12
    df_resolution: float = 0.04
    walk_delta_rev: float = 0.02
    walk_delta_pris: float = 0.03


@dataclass(frozen=True, eq=False)
class GeneratedScenario:
    path: Path
    scenario: Scenario
    witness: Configuration


def _column_from_passages(x0, width, passages, z_lo, z_hi, y_iv, col) -> list[Blade]:
    """Blades are the complement of the passage intervals within a column."""
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


def _walk_witness(
    spec: RobotSpec,
    env: Environment,
    df: DistanceField,
    start: Configuration,
    waypoints,
    rng,
    params: SuiteParams,
    segment_timeout: float = 20.0,
    tail_moves: int = 25,
    tail_radius: float = 0.2,
) -> Configuration | None:
    """Valid walk through the waypoints, ending in a short random wander.

    Each waypoint leg is a small weighted search over the fine walk lattice
    (no optimizer); the trailing random moves scatter the final tip around
    the last waypoint, and the whole chain is the feasibility witness.
    """
    from .optimizer import ObjectiveWeights
    from .search import PlannerConfig, plan

    c = start
    for wp in waypoints:
        pc = PlannerConfig(
            heuristic_mode="euclidean",
            heuristic_weight=3.0,
            use_opt=True,  # narrow legs need the continuous actions
            use_lazy=True,
            delta_rev=params.walk_delta_rev,
            delta_pris=params.walk_delta_pris,
            interp_rev=params.walk_delta_rev / 2,
            interp_pris=params.walk_delta_pris / 2,
            goal_pos_tol=0.07,
            stagnation_window=20,
            ee_step=0.08,
            opt_budget=500,
            weights=ObjectiveWeights(goal_weight=60.0, state_weight=1.0),
            timeout=segment_timeout,
            seed=int(rng.integers(2**31)),
        )
        res = plan(spec, env, df, c, wp, pc)
        if not res.success:
            return None
        c = res.plan.states[-1]

    anchor = forward_kinematics(spec, c)[-1]
    for _ in range(tail_moves):
        cands = predefined_successors(
            spec, c, params.walk_delta_rev, params.walk_delta_pris
        )
        i = int(rng.integers(len(cands)))
        cand = cands[i]
        tip = forward_kinematics(spec, cand)[-1]
        if np.linalg.norm(tip - anchor) > tail_radius:
            continue
        if is_valid_transition(spec, env, df, c, cand):
            c = cand
    return c


def _route_waypoints(route, goal_hint, blade_width: float, approach: float = 0.18):
    """Entry and exit guide points for each passage plus the goal hint."""
    out = []
    for cx, cz in route:
        out.append((cx - blade_width / 2 - approach, 0.0, cz))
        out.append((cx + blade_width / 2 + approach, 0.0, cz))
    out.append((goal_hint[0], 0.0, goal_hint[1]))
    return out


def _scenario_layout(difficulty: str, rng, params: SuiteParams):
    """Sample blades plus the waypoint route used to place the goal."""
    x0, x1, y0, y1, z0, z1 = params.bounds
    y_iv = (y0, y1)
    r = params.body_radius
    blades: list[Blade] = []
    col_x = [1.15, 1.75]

    if difficulty == "open":
        width = 2 * r + 0.16 + 0.1 * rng.random()
        zc = params.base_z + rng.uniform(-0.12, 0.12)
        blades = _column_from_passages(
            col_x[0], params.blade_width, [(zc - width / 2, zc + width / 2)], z0, z1, y_iv, 0
        )
        route = [(col_x[0] + params.blade_width / 2, zc)]
        goal_hint = (col_x[0] + 0.55, zc + rng.uniform(-0.1, 0.1))
        return blades, route, goal_hint

    if difficulty == "passages":
        # two columns of tight gaps; the goal sits behind the second column
        width0 = 2 * r + rng.uniform(0.06, 0.11)
        width1 = 2 * r + rng.uniform(0.06, 0.11)
        m0 = params.base_z + rng.uniform(-0.25, 0.25)
        m1 = float(np.clip(m0 + rng.uniform(-0.3, 0.3), z0 + 0.25, z1 - 0.25))
        col0 = [(m0 - width0 / 2, m0 + width0 / 2)]
        col1 = [(m1 - width1 / 2, m1 + width1 / 2)]
        # decoy gaps away from the route keep the topology interesting
        decoy0 = m0 + rng.choice([-1.0, 1.0]) * rng.uniform(0.45, 0.6)
        if z0 + 0.15 < decoy0 < z1 - 0.15:
            col0.append((decoy0 - width0 / 2, decoy0 + width0 / 2))
        blades = _column_from_passages(
            col_x[0], params.blade_width, col0, z0, z1, y_iv, 0
        ) + _column_from_passages(col_x[1], params.blade_width, col1, z0, z1, y_iv, 1)
        route = [
            (col_x[0] + params.blade_width / 2, m0),
            (col_x[1] + params.blade_width / 2, m1),
        ]
        goal_hint = (col_x[1] + rng.uniform(0.3, 0.45), m1 + rng.uniform(-0.06, 0.06))
        return blades, route, goal_hint

    if difficulty == "traps":
        # two reachability traps: either the passage aligned with the goal
        # dead-ends (no continuation in column 2), or the lowest-deviation
        # passage sequence is too tight to thread and only the second-best
        # class works
        z_goal = params.base_z + rng.uniform(-0.04, 0.04)
        z_off = z_goal + rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 0.38)
        z_off = float(np.clip(z_off, z0 + 0.22, z1 - 0.22))
        wide = 2 * r + rng.uniform(0.16, 0.22)
        if rng.random() < 0.5:
            # dead-end pocket: bait passage in column 1 only
            bait = 2 * r + rng.uniform(0.08, 0.12)
            col0 = [
                (z_goal - bait / 2, z_goal + bait / 2),
                (z_off - wide / 2, z_off + wide / 2),
            ]
            col1 = [(z_off - wide / 2, z_off + wide / 2)]
        else:
            # rank trap: the aligned sequence exists but is barely passable,
            # so the top-ranked class stalls while the offset class works
            sliver = 2 * r + rng.uniform(0.008, 0.015)
            col0 = [
                (z_goal - wide / 2, z_goal + wide / 2),
                (z_off - wide / 2, z_off + wide / 2),
            ]
            col1 = [
                (z_goal - sliver / 2, z_goal + sliver / 2),
                (z_off - wide / 2, z_off + wide / 2),
            ]
        blades = _column_from_passages(
            col_x[0], params.blade_width, col0, z0, z1, y_iv, 0
        ) + _column_from_passages(col_x[1], params.blade_width, col1, z0, z1, y_iv, 1)
        route = [
            (col_x[0] + params.blade_width / 2, z_off),
            (col_x[1] + params.blade_width / 2, z_off),
        ]
        goal_hint = (col_x[1] + rng.uniform(0.3, 0.42), z_goal)
        return blades, route, goal_hint

    raise ValueError(f"unknown difficulty {difficulty!r}")


def generate_scenario(
    name: str, seed: int, difficulty: str, params: SuiteParams | None = None
):
    """One scenario plus its feasibility witness; None when the walk stalls."""
    params = params or SuiteParams()
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1, z0, z1 = params.bounds

    blades, route, goal_hint = _scenario_layout(difficulty, rng, params)
    env = environment_from_blades((x0, y0, z0), (x1, y1, z1), blades)
    robot = RobotSpec(
        num_units=params.num_units,
        subunits_per_unit=params.subunits_per_unit,
        subunit_length=params.subunit_length,
        body_radius=params.body_radius,
        pitch_limit=params.pitch_limit,
        yaw_limit=params.yaw_limit,
        prismatic_range=params.prismatic_range,
        base_position=(params.base_x, 0.0, params.base_z),
    )
    df = build_distance_field(env, params.df_resolution)
    start = Configuration.straight(robot.num_units)
    if not is_valid_state(robot, env, df, start):
        return None

    waypoints = _route_waypoints(route, goal_hint, params.blade_width)
    witness = _walk_witness(robot, env, df, start, waypoints, rng, params)
    if witness is None:
        return None
    goal_pos = forward_kinematics(robot, witness)[-1]

    scenario = Scenario(
        name=name,
        seed=seed,
        environment=env,
        robot=robot,
        start=start,
        goal=GoalPose(position=tuple(float(v) for v in goal_pos)),
        df_resolution=params.df_resolution,
    )
    return scenario, witness


def generate_suite(
    out_dir,
    seed: int,
    count: int,
    difficulty: str = "passages",
    params: SuiteParams | None = None,
    max_attempts_per_scenario: int = 25,
) -> list[GeneratedScenario]:
    """Write `count` scenario files; deterministic for a fixed seed."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"difficulty must be one of {DIFFICULTIES}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = []
    for idx in range(count):
        made = None
        for attempt in range(max_attempts_per_scenario):
            sub_seed = seed * 100_000 + idx * 1_000 + attempt
            made = generate_scenario(
                f"{difficulty}_{idx:03d}", sub_seed, difficulty, params
            )
            if made is not None:
                break
        if made is None:
            raise RuntimeError(
                f"scenario generation retry budget exhausted at index {idx}"
            )
        scenario, witness = made
        path = out_dir / f"{scenario.name}.scenario"
        write_scenario(scenario, path)
        out.append(GeneratedScenario(path=path, scenario=scenario, witness=witness))
    return out
