"""Multi-queue best-first planner with lazily generated optimization actions.

One OPEN list per heuristic, all sharing g-values and a CLOSED set. A
bandit scheduler picks the queue to expand from. When a queue stagnates,
expansions from it also emit pseudostates: placeholders for optimizer
neighbors toward the six axis-aligned end-effector targets, whose
configurations are generated only if the pseudostate is ever popped.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
import zlib
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .env import DistanceField, Environment, place_beams, project
from .homotopy import (
    EMPTY_WORD,
    HomotopyDistanceMap,
    beam_arrays,
    build_homotopy_distance_map,
    detect_relevant_classes,
    reduce_word,
    remainder_signature,
    segment_crossings,
    signature_of_polyline,
)
from .optimizer import (
    ObjectiveWeights,
    OptRequest,
    OptResult,
    generate_neighbor,
    six_connected_ee_goals,
)
from .robot import (
    Configuration,
    RobotSpec,
    forward_kinematics,
    is_valid_state,
    successor_vectors,
    within_limits,
)
from . import _kernels

HEURISTIC_MODES = ("euclidean", "bfs", "homotopy")
SCHEDULERS = ("dts", "round_robin")


@dataclass
class PlannerConfig:
    heuristic_weight: float = 3.0
    heuristic_mode: str = "homotopy"
    num_classes: int = 2
    scheduler: str = "dts"
    use_opt: bool = True
    use_lazy: bool = True
    ee_step: float = 0.1
    reach_tol: float | None = None  # default ee_step / 2
    delta_rev: float = 0.1
    delta_pris: float = 0.05
    interp_rev: float = 0.05
    interp_pris: float = 0.01
    goal_pos_tol: float = 0.1
    goal_axis_tol: float | None = None
    stagnation_window: int = 50
    stagnation_tol: float | None = None  # default ee_step / 2
    timeout: float = 60.0
    max_expansions: int | None = None
    seed: int = 0
    max_word_len: int = 6
    dts_cap: float = 10.0
    opt_budget: int = 1500
    opt_sigma0: float = 0.1
    opt_popsize: int | None = None
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)

    def validate(self) -> None:
        if self.heuristic_weight < 1:
            raise ValueError("heuristic_weight must be >= 1")
        if self.stagnation_window < 1:
            raise ValueError("stagnation_window must be >= 1")
        if self.ee_step <= 0:
            raise ValueError("ee_step must be positive")
        if self.heuristic_mode not in HEURISTIC_MODES:
            raise ValueError(f"unknown heuristic_mode {self.heuristic_mode!r}")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")

    @property
    def effective_reach_tol(self) -> float:
        return self.ee_step / 2 if self.reach_tol is None else self.reach_tol

    @property
    def effective_stagnation_tol(self) -> float:
        return self.ee_step / 2 if self.stagnation_tol is None else self.stagnation_tol


@dataclass
class SearchStats:
    expansions: int = 0
    optimizer_calls: int = 0
    pseudostates_discarded: int = 0
    pseudostates_inserted: int = 0
    setup_time: float = 0.0
    search_time: float = 0.0
    optimizer_time: float = 0.0

    @property
    def total_time(self) -> float:
        return self.setup_time + self.search_time


@dataclass
class Plan:
    states: list[Configuration]
    cost: float
    stats: SearchStats


@dataclass
class PlanningResult:
    plan: Plan | None
    reason: str  # solved | timeout | exhausted | expansion_limit
    stats: SearchStats

    @property
    def success(self) -> bool:
        return self.plan is not None


class SearchNode:
    __slots__ = (
        "kind",
        "vec",
        "config",
        "body",
        "sig",
        "ee_target",
        "target_index",
        "g",
        "h",
        "parent",
        "key",
        "generation_count",
        "resolved",
    )

    def __init__(self, kind, g, h, parent):
        self.kind = kind  # "real" | "pseudo"
        self.g = g
        self.h = h
        self.parent = parent
        self.vec = None
        self.config = None
        self.body = None
        self.sig = EMPTY_WORD
        self.ee_target = None
        self.target_index = -1
        self.key = None
        self.generation_count = 0
        self.resolved = False


class Queue:
    """One OPEN list plus its bandit statistics and stagnation window."""

    def __init__(self, heuristic, window: int):
        self.heuristic = heuristic
        self.heap: list = []
        self.alpha = 1.0
        self.beta = 1.0
        self.best_h = math.inf
        self.h_history: deque = deque(maxlen=window)

    def __len__(self) -> int:
        return len(self.heap)


def detect_stagnation(queue: Queue, window: int, tol: float) -> bool:
    """True when the queue's best expanded h barely improved over the window."""
    hist = queue.h_history
    if len(hist) < window:
        return False
    return hist[0] - hist[-1] <= tol


def dts_select_queue(queues, rng) -> int:
    """Thompson sampling over nonempty queues; returns the queue index."""
    candidates = [i for i, q in enumerate(queues) if len(q) > 0]
    if not candidates:
        raise RuntimeError("all queues are empty")
    if len(candidates) == 1:
        return candidates[0]
    draws = [rng.beta(queues[i].alpha, queues[i].beta) for i in candidates]
    return candidates[int(np.argmax(draws))]


def dts_update(queue: Queue, improved: bool, cap: float) -> None:
    queue.alpha += 1.0 if improved else 0.0
    queue.beta += 0.0 if improved else 1.0
    total = queue.alpha + queue.beta
    if total > cap:
        queue.alpha *= cap / total
        queue.beta *= cap / total


def predefined_successors(
    spec: RobotSpec, c: Configuration, delta_rev: float, delta_pris: float
) -> list[Configuration]:
    """Unit increment/decrement of every joint; limit-violating moves omitted."""
    return [
        Configuration.from_vector(v)
        for v in successor_vectors(spec, c.as_vector(), delta_rev, delta_pris)
    ]


def goal_check(
    spec: RobotSpec,
    c: Configuration,
    goal_position,
    pos_tol: float,
    goal_axis=None,
    axis_tol: float | None = None,
    body: np.ndarray | None = None,
) -> bool:
    pts = forward_kinematics(spec, c) if body is None else body
    if _dist3(pts[-1], goal_position) > pos_tol:
        return False
    if axis_tol is None or goal_axis is None:
        return True
    d = pts[-1] - pts[-2]
    d = d / np.linalg.norm(d)
    a = np.asarray(goal_axis, dtype=float)
    a = a / np.linalg.norm(a)
    angle = math.acos(float(np.clip(np.dot(d, a), -1.0, 1.0)))
    return angle <= axis_tol


def extract_path(goal_node: SearchNode, spec: RobotSpec, stats: SearchStats) -> Plan:
    """Walk the parent chain and cross-check the accumulated cost."""
    chain = []
    node = goal_node
    while node is not None:
        chain.append(node)
        node = node.parent
    chain.reverse()
    states = [n.config for n in chain]
    cost = 0.0
    for a, b in zip(chain, chain[1:]):
        cost += _dist3(a.body[-1], b.body[-1])
    if abs(cost - goal_node.g) > 1e-9:
        raise RuntimeError(f"path cost {cost} disagrees with stored g {goal_node.g}")
    return Plan(states=states, cost=cost, stats=stats)


def _dist3(a, b) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def _stable_seed(base_seed: int, key, target_index: int) -> int:
    blob = repr((key, target_index)).encode()
    return (base_seed * 1_000_003 + zlib.crc32(blob)) % (2**32)


# --- heuristics ------------------------------------------------------------


class TipDistanceHeuristic:
    """Straight-line 3-D distance from the tip to the goal position."""

    def __init__(self, goal_position):
        self.goal = np.asarray(goal_position, dtype=float)

    def of_node(self, node) -> float:
        return _dist3(node.body[-1], self.goal)

    def of_point(self, point, est_sig) -> float:
        return _dist3(point, self.goal)


class GridDistanceHeuristic:
    """Homotopy-blind projected grid distance to the goal."""

    def __init__(self, dmap: HomotopyDistanceMap):
        self.dmap = dmap

    def of_node(self, node) -> float:
        cell = self.dmap.cell_of(project(node.body[-1]))
        return self.dmap.distance(cell, EMPTY_WORD)

    def of_point(self, point, est_sig) -> float:
        cell = self.dmap.cell_of(project(point))
        return self.dmap.distance(cell, EMPTY_WORD)


class HomotopyClassHeuristic:
    """Projected distance to the goal along one target class."""

    def __init__(self, dmap: HomotopyDistanceMap, goal_sig):
        self.dmap = dmap
        self.goal_sig = tuple(goal_sig)

    def of_node(self, node) -> float:
        rem = remainder_signature(node.sig, self.goal_sig)
        cell = self.dmap.cell_of(project(node.body[-1]))
        return self.dmap.distance(cell, rem)

    def of_point(self, point, est_sig) -> float:
        rem = remainder_signature(est_sig, self.goal_sig)
        cell = self.dmap.cell_of(project(point))
        return self.dmap.distance(cell, rem)


# --- planner ---------------------------------------------------------------


class _Workspace:
    """Shared geometry plus per-query caches keyed by raw joint vectors."""

    _CACHE_CAP = 400_000

    def __init__(self, spec, env, df, pc):
        self.spec = spec
        self.env = env
        self.df = df
        self.pc = pc
        self._fk: dict[bytes, np.ndarray] = {}
        self._valid: dict[bytes, bool] = {}
        self._quant = np.concatenate(
            [
                [pc.delta_pris / 2.0],
                np.full(2 * spec.num_units, pc.delta_rev / 2.0),
            ]
        )
        self._n = spec.num_units

    def body_vec(self, vec: np.ndarray) -> np.ndarray:
        key = vec.tobytes()
        pts = self._fk.get(key)
        if pts is None:
            if _kernels.NUMBA:
                pts = _kernels.fk_points(
                    vec[0],
                    vec[1 : self._n + 1],
                    vec[self._n + 1 :],
                    self.spec._base_pos,
                    self.spec._base_rot,
                    self.spec.subunits_per_unit,
                    self.spec.subunit_length,
                )
            else:
                pts = forward_kinematics(self.spec, Configuration.from_vector(vec))
            if len(self._fk) > self._CACHE_CAP:
                self._fk.clear()
            self._fk[key] = pts
        return pts

    def body(self, c: Configuration) -> np.ndarray:
        return self.body_vec(c.as_vector())

    def valid_vec(self, vec: np.ndarray) -> bool:
        key = vec.tobytes()
        ok = self._valid.get(key)
        if ok is None:
            spec = self.spec
            if _kernels.NUMBA:
                if not _kernels.vec_within(vec, spec._joint_lo, spec._joint_hi, 1e-9):
                    ok = False
                else:
                    ok = bool(
                        _kernels.sphere_chain_clear(
                            self.df.values,
                            self.df._origin_arr,
                            self.df.resolution,
                            self.df._bmax_arr,
                            self.body_vec(vec),
                            spec.body_radius,
                        )
                    )
            else:
                c = Configuration.from_vector(vec)
                ok = is_valid_state(spec, self.env, self.df, c, body=self.body_vec(vec))
            if len(self._valid) > self._CACHE_CAP:
                self._valid.clear()
            self._valid[key] = ok
        return ok

    def state_valid(self, c: Configuration) -> bool:
        return self.valid_vec(c.as_vector())

    def transition_valid_vec(self, va: np.ndarray, vb: np.ndarray) -> bool:
        """Endpoint states plus linear joint-space interpolation at sweep step."""
        if not self.valid_vec(va) or not self.valid_vec(vb):
            return False
        d = np.abs(va - vb)
        d_ang = float(np.max(d[1:])) if len(d) > 1 else 0.0
        n = max(
            1,
            math.ceil(d_ang / self.pc.interp_rev),
            math.ceil(d[0] / self.pc.interp_pris),
        )
        step = vb - va
        for i in range(1, n):
            if not self.valid_vec(va + (i / n) * step):
                return False
        return True

    def transition_valid(self, a: Configuration, b: Configuration) -> bool:
        return self.transition_valid_vec(a.as_vector(), b.as_vector())

    def config_key(self, vec: np.ndarray) -> bytes:
        return np.round(vec / self._quant).astype(np.int64).tobytes()


def default_generator(ws: _Workspace, parent: Configuration, target, seed: int) -> OptResult:
    pc = ws.pc
    req = OptRequest(start=parent, ee_goal=tuple(float(v) for v in target))
    return generate_neighbor(
        req,
        pc.weights,
        ws.spec,
        ws.df,
        seed=seed,
        sigma0=pc.opt_sigma0,
        budget=pc.opt_budget,
        popsize=pc.opt_popsize,
        reach_tol=pc.effective_reach_tol,
    )


def _build_queues(ws, start, goal_position, pc):
    """Queue list per heuristic mode; homotopy falls back to plain grid."""
    g_proj = project(goal_position)
    if pc.heuristic_mode == "euclidean":
        return [Queue(TipDistanceHeuristic(goal_position), pc.stagnation_window)], ()

    if pc.heuristic_mode == "bfs":
        dmap = build_homotopy_distance_map(
            ws.env, (), g_proj, max_word_len=0, resolution=ws.df.resolution
        )
        return [Queue(GridDistanceHeuristic(dmap), pc.stagnation_window)], ()

    beams = place_beams(ws.env)
    classes = detect_relevant_classes(
        ws.spec,
        ws.env,
        beams,
        start,
        g_proj,
        k=pc.num_classes,
        min_width=2.0 * ws.spec.body_radius,
    )
    queues = [Queue(TipDistanceHeuristic(goal_position), pc.stagnation_window)]
    if not classes:
        dmap = build_homotopy_distance_map(
            ws.env, (), g_proj, max_word_len=0, resolution=ws.df.resolution
        )
        queues.append(Queue(GridDistanceHeuristic(dmap), pc.stagnation_window))
        return queues, ()
    dmap = build_homotopy_distance_map(
        ws.env,
        beams,
        g_proj,
        classes=[c.signature for c in classes],
        max_word_len=pc.max_word_len,
        resolution=ws.df.resolution,
    )
    for cls in classes:
        queues.append(
            Queue(HomotopyClassHeuristic(dmap, cls.signature), pc.stagnation_window)
        )
    return queues, tuple(beams)


def plan(
    spec: RobotSpec,
    env: Environment,
    df: DistanceField,
    start: Configuration,
    goal_position,
    pc: PlannerConfig,
    goal_axis=None,
    generator=None,
) -> PlanningResult:
    """Search from start until a configuration reaches the goal tolerance."""
    pc.validate()
    stats = SearchStats()
    t0 = time.monotonic()

    ws = _Workspace(spec, env, df, pc)
    goal_position = np.asarray(goal_position, dtype=float)
    if not np.all(
        (goal_position >= np.asarray(env.bounds_min))
        & (goal_position <= np.asarray(env.bounds_max))
    ):
        raise ValueError(f"goal position {goal_position.tolist()} outside bounds")
    if not ws.state_valid(start):
        raise ValueError("start configuration is invalid")
    generator = generator or default_generator

    queues, beams = _build_queues(ws, start, goal_position, pc)
    nq = len(queues)
    track_sigs = any(isinstance(q.heuristic, HomotopyClassHeuristic) for q in queues)
    barr = beam_arrays(beams) if track_sigs else None
    rng = np.random.default_rng(pc.seed)
    seq = itertools.count()
    closed: set = set()
    gvalues: dict = {}
    w_h = pc.heuristic_weight
    stats.setup_time = time.monotonic() - t0

    def make_real(vec, parent, g) -> SearchNode:
        node = SearchNode("real", g, None, parent)
        node.vec = vec
        node.config = Configuration.from_vector(vec)
        node.body = ws.body_vec(vec)
        node.key = ws.config_key(vec)
        if track_sigs:
            node.sig = signature_of_polyline(
                beams, node.body[:, (0, 2)], arrays=barr
            )
        node.h = [q.heuristic.of_node(node) for q in queues]
        return node

    def push(node: SearchNode) -> None:
        for qi in range(nq):
            heapq.heappush(
                queues[qi].heap, (node.g + w_h * node.h[qi], -node.g, next(seq), node)
            )

    def insert_real(node: SearchNode) -> bool:
        if node.key in closed:
            return False
        existing = gvalues.get(node.key)
        if existing is not None and existing.g <= node.g + 1e-12:
            return False
        gvalues[node.key] = node
        push(node)
        return True

    def try_generated(parent: SearchNode, target_index: int, target) -> bool:
        """Run the generator for one target and insert the result if usable."""
        t_gen = time.monotonic()
        result = generator(
            ws, parent.config, target, _stable_seed(pc.seed, parent.key, target_index)
        )
        stats.optimizer_time += time.monotonic() - t_gen
        stats.optimizer_calls += 1
        if not result.converged:
            return False
        vec = result.candidate.as_vector()
        if not ws.valid_vec(vec) or not ws.transition_valid_vec(parent.vec, vec):
            return False
        g = parent.g + _dist3(ws.body_vec(vec)[-1], parent.body[-1])
        return insert_real(make_real(vec, parent, g))

    def pop_from(queue: Queue) -> SearchNode | None:
        while queue.heap:
            _, _, _, node = heapq.heappop(queue.heap)
            if node.kind == "pseudo":
                if node.resolved:
                    continue
                return node
            if node.key in closed or gvalues.get(node.key) is not node:
                continue
            return node
        return None

    start_node = make_real(start.as_vector().copy(), None, 0.0)
    gvalues[start_node.key] = start_node
    push(start_node)

    # pseudostate g lower bound: the candidate tip may fall reach_tol short
    optimistic_step = max(0.0, pc.ee_step - pc.effective_reach_tol)
    deadline = t0 + pc.timeout
    rr_pointer = 0

    def finish(reason, plan_obj=None):
        stats.search_time = time.monotonic() - t0 - stats.setup_time
        return PlanningResult(plan=plan_obj, reason=reason, stats=stats)

    while True:
        if time.monotonic() > deadline:
            return finish("timeout")
        if pc.max_expansions is not None and stats.expansions >= pc.max_expansions:
            return finish("expansion_limit")

        node = None
        qi = -1
        if pc.scheduler == "dts":
            while node is None:
                try:
                    qi = dts_select_queue(queues, rng)
                except RuntimeError:
                    return finish("exhausted")
                node = pop_from(queues[qi])
        else:
            tried = 0
            while node is None and tried < nq:
                qi = rr_pointer % nq
                rr_pointer += 1
                tried += 1
                node = pop_from(queues[qi])
            if node is None:
                return finish("exhausted")

        if node.kind == "pseudo":
            node.resolved = True
            node.generation_count += 1
            if not try_generated(node.parent, node.target_index, node.ee_target):
                stats.pseudostates_discarded += 1
            continue

        node.generation_count += 1
        if goal_check(
            spec,
            node.config,
            goal_position,
            pc.goal_pos_tol,
            goal_axis,
            pc.goal_axis_tol,
            body=node.body,
        ):
            return finish("solved", extract_path(node, spec, stats))

        # expand
        closed.add(node.key)
        stats.expansions += 1
        queue = queues[qi]
        h_here = node.h[qi]
        improved = h_here < queue.best_h - 1e-12
        queue.best_h = min(queue.best_h, h_here)
        queue.h_history.append(queue.best_h)
        if pc.scheduler == "dts":
            dts_update(queue, improved, pc.dts_cap)

        tip = node.body[-1]
        for vec in successor_vectors(spec, node.vec, pc.delta_rev, pc.delta_pris):
            key = ws.config_key(vec)
            if key in closed:
                continue
            g = node.g + _dist3(ws.body_vec(vec)[-1], tip)
            existing = gvalues.get(key)
            if existing is not None and existing.g <= g + 1e-12:
                continue
            if not ws.transition_valid_vec(node.vec, vec):
                continue
            insert_real(make_real(vec, node, g))

        if pc.use_opt and detect_stagnation(
            queue, pc.stagnation_window, pc.effective_stagnation_tol
        ):
            targets = six_connected_ee_goals(spec, node.config, pc.ee_step)
            if pc.use_lazy:
                tip_proj = project(tip)
                for ti, target in enumerate(targets):
                    pseudo = SearchNode("pseudo", node.g + optimistic_step, None, node)
                    pseudo.ee_target = np.asarray(target, dtype=float)
                    pseudo.target_index = ti
                    est_sig = node.sig
                    if track_sigs:
                        hits = segment_crossings(beams, tip_proj, project(target))
                        est_sig = reduce_word(node.sig + tuple(h[1] for h in hits))
                    pseudo.h = [
                        q.heuristic.of_point(pseudo.ee_target, est_sig) for q in queues
                    ]
                    push(pseudo)
                    stats.pseudostates_inserted += 1
            else:
                for ti, target in enumerate(targets):
                    try_generated(node, ti, target)
