"""Signatures of projected curves and homotopy-aware grid distances.

A curve's class is identified by the reduced word of signed beam letters
it crosses in the x-z plane. Words are tuples of nonzero ints: entry
+(k+1) means beam k crossed left-to-right, -(k+1) the reverse.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .env import Beam, Environment, project
from .robot import Configuration, RobotSpec, forward_kinematics

Word = tuple[int, ...]
EMPTY_WORD: Word = ()

_SQRT2 = math.sqrt(2.0)


def reduce_word(word) -> Word:
    """Cancel adjacent letter/inverse pairs until none remain."""
    out: list[int] = []
    for letter in word:
        if out and out[-1] == -letter:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


def inverse_word(word) -> Word:
    return tuple(-x for x in reversed(word))


def concat_words(a, b) -> Word:
    return reduce_word(tuple(a) + tuple(b))


def remainder_signature(state_sig, goal_sig) -> Word:
    """Class left to traverse: reduce(inverse(state) * goal)."""
    return reduce_word(inverse_word(state_sig) + tuple(goal_sig))


def segment_crossings(
    beams: list[Beam] | tuple[Beam, ...], p, q
) -> list[tuple[float, int]]:
    """Signed beam letters crossed by segment p->q, ordered by parameter.

    Half-open side rule: a point with x exactly on a beam belongs to the
    beam's right side, so grazing endpoints never double count.
    """
    px, pz = p
    qx, qz = q
    hits = []
    for beam in beams:
        bx = beam.x
        p_right = px >= bx
        q_right = qx >= bx
        if p_right == q_right:
            continue
        t = (bx - px) / (qx - px)
        z = pz + t * (qz - pz)
        z0, z1 = beam.z_interval
        if z0 <= z <= z1:
            sign = 1 if q_right else -1
            hits.append((t, sign * (beam.letter + 1)))
    hits.sort()
    return hits


def beam_arrays(beams):
    """Column arrays (x, z_lo, z_hi) indexed by letter, for the fast path."""
    n = len(beams)
    bx = np.empty(n)
    bz0 = np.empty(n)
    bz1 = np.empty(n)
    for beam in beams:
        bx[beam.letter] = beam.x
        bz0[beam.letter] = beam.z_interval[0]
        bz1[beam.letter] = beam.z_interval[1]
    return bx, bz0, bz1


def signature_of_polyline(beams, pts, arrays=None) -> Word:
    """Reduced word of beam crossings along a polyline of (x, z) points."""
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 2:
        raise ValueError("polyline needs at least two points")
    if not len(beams):
        return EMPTY_WORD
    if _kernels.NUMBA:
        bx, bz0, bz1 = arrays if arrays is not None else beam_arrays(beams)
        word = _kernels.polyline_signature(pts, bx, bz0, bz1)
        return tuple(int(x) for x in word)
    out: list[int] = []
    for p, q in zip(pts[:-1], pts[1:]):
        for _, letter in segment_crossings(beams, p, q):
            if out and out[-1] == -letter:
                out.pop()
            else:
                out.append(letter)
    return tuple(out)


def signature_of_state(
    spec: RobotSpec,
    beams,
    c: Configuration,
    body: np.ndarray | None = None,
) -> Word:
    """Signature of the projected body polyline, base to tip."""
    pts = forward_kinematics(spec, c) if body is None else body
    return signature_of_polyline(beams, [project(p) for p in pts])


@dataclass(frozen=True)
class Passage:
    """Free z gap within one column, between blades or blade and bound."""

    column_index: int
    z_interval: tuple[float, float]

    @property
    def z_mid(self) -> float:
        return 0.5 * (self.z_interval[0] + self.z_interval[1])

    @property
    def width(self) -> float:
        return self.z_interval[1] - self.z_interval[0]


@dataclass(frozen=True)
class ClassSpec:
    """A relevant homotopy class and the passage sequence inducing it."""

    passages: tuple[Passage, ...]
    signature: Word
    rank: int
    deviation: float = 0.0


def find_passages(env: Environment, column: int) -> list[Passage]:
    """All free gaps in a column, bottom to top, boundary gaps included."""
    intervals = sorted(
        b.z_interval for b in env.blades if b.column_index == column
    )
    edges = [env.bounds_min[2]]
    for lo, hi in intervals:
        edges.extend([lo, hi])
    edges.append(env.bounds_max[2])
    out = []
    for lo, hi in zip(edges[::2], edges[1::2]):
        if hi - lo > 0:
            out.append(Passage(column_index=column, z_interval=(lo, hi)))
    return out


def detect_relevant_classes(
    spec: RobotSpec,
    env: Environment,
    beams,
    start: Configuration,
    g_proj,
    k: int,
    min_width: float = 0.0,
) -> list[ClassSpec]:
    """Rank passage sequences from start to goal by total z deviation.

    Walks the columns lying between the start tip and the goal, picks one
    passage per column, and prefers sequences whose consecutive passages
    (and final passage vs. the goal) stay close in z. Each sequence is
    converted to a signature by tracing a straight polyline through the
    passage midpoints. Returns at most k classes, best first; empty when
    some column has no wide-enough passage.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    s_proj = project(forward_kinematics(spec, start)[-1])
    gx, gz = float(g_proj[0]), float(g_proj[1])
    lo_x, hi_x = min(s_proj[0], gx), max(s_proj[0], gx)

    crossed = [
        c
        for c, (x0, x1) in enumerate(env.columns)
        if lo_x < 0.5 * (x0 + x1) < hi_x
    ]
    crossed.sort(key=lambda c: 0.5 * sum(env.columns[c]))
    if gx < s_proj[0]:
        crossed.reverse()
    if not crossed:
        return [ClassSpec(passages=(), signature=EMPTY_WORD, rank=0)]

    per_column = []
    for c in crossed:
        usable = [p for p in find_passages(env, c) if p.width >= min_width]
        if not usable:
            return []
        per_column.append(usable)

    scored = []
    for combo in itertools.product(*per_column):
        dev = sum(
            abs(b.z_mid - a.z_mid) for a, b in zip(combo, combo[1:])
        ) + abs(combo[-1].z_mid - gz)
        scored.append((dev, tuple(p.z_mid for p in combo), combo))
    scored.sort(key=lambda item: (item[0], item[1]))

    out: list[ClassSpec] = []
    seen: set[Word] = set()
    for dev, _, combo in scored:
        waypoints = [s_proj] + [(0.5 * sum(env.columns[p.column_index]), p.z_mid) for p in combo]
        waypoints.append((gx, gz))
        sig = signature_of_polyline(beams, waypoints)
        if sig in seen:
            continue
        seen.add(sig)
        out.append(
            ClassSpec(passages=combo, signature=sig, rank=len(out), deviation=dev)
        )
        if len(out) == k:
            break
    return out


@dataclass(eq=False)
class HomotopyDistanceMap:
    """Distances from every (cell, word) node to the projected goal.

    distance(cell, w) is the length in meters of the shortest free grid
    path from the cell to the goal whose signature is w.
    """

    origin: tuple[float, float]
    resolution: float
    dims: tuple[int, int]
    goal_cell: tuple[int, int]
    occupancy: np.ndarray  # True where blocked
    distances: dict[tuple[int, int, Word], float]
    max_word_len: int

    def cell_of(self, p) -> tuple[int, int] | None:
        i = int(math.floor((p[0] - self.origin[0]) / self.resolution))
        j = int(math.floor((p[1] - self.origin[1]) / self.resolution))
        if 0 <= i < self.dims[0] and 0 <= j < self.dims[1]:
            return (i, j)
        return None

    def cell_center(self, cell) -> tuple[float, float]:
        return (
            self.origin[0] + (cell[0] + 0.5) * self.resolution,
            self.origin[1] + (cell[1] + 0.5) * self.resolution,
        )

    def distance(self, cell, word) -> float:
        if cell is None:
            return math.inf
        return self.distances.get((cell[0], cell[1], tuple(word)), math.inf)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            for (i, j, word), d in sorted(self.distances.items()):
                tag = ".".join(str(x) for x in word) or "-"
                fh.write(f"{i}\t{j}\t{tag}\t{d:.9f}\n")


_DIRS8 = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
]


def projected_occupancy(env: Environment, resolution: float):
    """Boolean grid over the x-z footprint; True where a blade projects."""
    x0, z0 = env.bounds_min[0], env.bounds_min[2]
    x1, z1 = env.bounds_max[0], env.bounds_max[2]
    nx = max(1, int(math.ceil((x1 - x0) / resolution)))
    nz = max(1, int(math.ceil((z1 - z0) / resolution)))
    occ = np.zeros((nx, nz), dtype=bool)
    for b in env.blades:
        i0 = max(0, int(math.floor((b.x_interval[0] - x0) / resolution)))
        i1 = min(nx, int(math.ceil((b.x_interval[1] - x0) / resolution)))
        j0 = max(0, int(math.floor((b.z_interval[0] - z0) / resolution)))
        j1 = min(nz, int(math.ceil((b.z_interval[1] - z0) / resolution)))
        for i in range(i0, i1):
            cx0 = x0 + i * resolution
            if not (cx0 < b.x_interval[1] and cx0 + resolution > b.x_interval[0]):
                continue
            for j in range(j0, j1):
                cz0 = z0 + j * resolution
                if cz0 < b.z_interval[1] and cz0 + resolution > b.z_interval[0]:
                    occ[i, j] = True
    return (x0, z0), (nx, nz), occ


def _edge_crossing_words(origin, dims, resolution, beams):
    """Sparse map (i, j, di, dj) -> crossing word for grid-center moves."""
    words: dict[tuple[int, int, int, int], Word] = {}
    x0, z0 = origin
    nx, nz = dims
    candidate_cols: set[int] = set()
    for beam in beams:
        ic = (beam.x - x0) / resolution - 0.5
        for i in range(int(math.floor(ic)) - 1, int(math.ceil(ic)) + 2):
            if 0 <= i < nx:
                candidate_cols.add(i)
    for i in candidate_cols:
        for j in range(nz):
            cx = x0 + (i + 0.5) * resolution
            cz = z0 + (j + 0.5) * resolution
            for di, dj in _DIRS8:
                ni, nj = i + di, j + dj
                if not (0 <= ni < nx and 0 <= nj < nz):
                    continue
                qx = x0 + (ni + 0.5) * resolution
                qz = z0 + (nj + 0.5) * resolution
                hits = segment_crossings(beams, (cx, cz), (qx, qz))
                if hits:
                    words[(i, j, di, dj)] = tuple(h[1] for h in hits)
    return words


def build_homotopy_distance_map(
    env: Environment,
    beams,
    g_proj,
    classes=(),
    max_word_len: int = 6,
    resolution: float = 0.05,
) -> HomotopyDistanceMap:
    """Octile-cost uniform search over (cell, signature) nodes from the goal.

    The stored word at a node is the signature of the best path from that
    cell to the goal, so heuristic queries can use the remainder signature
    directly. Words longer than the effective cap are pruned; the cap is
    raised automatically to cover any requested class.
    """
    origin, dims, occ = projected_occupancy(env, resolution)
    goal_cell = (
        int(math.floor((g_proj[0] - origin[0]) / resolution)),
        int(math.floor((g_proj[1] - origin[1]) / resolution)),
    )
    if not (0 <= goal_cell[0] < dims[0] and 0 <= goal_cell[1] < dims[1]):
        raise ValueError(f"projected goal {tuple(g_proj)} outside environment")
    if occ[goal_cell]:
        raise ValueError(f"projected goal {tuple(g_proj)} inside an obstacle")

    eff_max = max(max_word_len, max((len(c) for c in classes), default=0))
    edge_words = _edge_crossing_words(origin, dims, resolution, beams)

    # Edge counts (orthogonal, diagonal) are tracked as integers so the
    # final distance is a single deterministic expression per node.
    dist: dict[tuple[int, int, Word], float] = {}
    best: dict[tuple[int, int, Word], float] = {}
    counter = itertools.count()
    start = (goal_cell[0], goal_cell[1], EMPTY_WORD)
    heap = [(0.0, next(counter), start, 0, 0)]
    best[start] = 0.0
    res = resolution
    while heap:
        pri, _, node, n_orth, n_diag = heapq.heappop(heap)
        if node in dist:
            continue
        dist[node] = n_orth * res + n_diag * (res * _SQRT2)
        i, j, word = node
        for di, dj in _DIRS8:
            ni, nj = i + di, j + dj
            if not (0 <= ni < dims[0] and 0 <= nj < dims[1]) or occ[ni, nj]:
                continue
            # word of the reverse move: neighbor -> current cell
            w_edge = edge_words.get((ni, nj, -di, -dj), EMPTY_WORD)
            new_word = reduce_word(w_edge + word)
            if len(new_word) > eff_max:
                continue
            key = (ni, nj, new_word)
            if key in dist:
                continue
            if di and dj:
                no, nd = n_orth, n_diag + 1
            else:
                no, nd = n_orth + 1, n_diag
            npri = no * res + nd * (res * _SQRT2)
            if npri < best.get(key, math.inf):
                best[key] = npri
                heapq.heappush(heap, (npri, next(counter), key, no, nd))

    return HomotopyDistanceMap(
        origin=origin,
        resolution=resolution,
        dims=dims,
        goal_cell=goal_cell,
        occupancy=occ,
        distances=dist,
        max_word_len=eff_max,
    )


def homotopy_heuristic(
    dmap: HomotopyDistanceMap,
    spec: RobotSpec,
    beams,
    c: Configuration,
    goal_sig,
    body: np.ndarray | None = None,
) -> float:
    """Projected distance to the goal through the class still to traverse."""
    pts = forward_kinematics(spec, c) if body is None else body
    sig = signature_of_polyline(beams, [project(p) for p in pts])
    rem = remainder_signature(sig, goal_sig)
    return dmap.distance(dmap.cell_of(project(pts[-1])), rem)
