import heapq
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snakeplan import (
    Configuration,
    RobotSpec,
    build_distance_field,
    build_homotopy_distance_map,
    detect_relevant_classes,
    environment_from_blades,
    find_passages,
    homotopy_heuristic,
    inverse_word,
    place_beams,
    remainder_signature,
    reduce_word,
    signature_of_polyline,
    signature_of_state,
)
from snakeplan.env import Blade
from snakeplan.homotopy import concat_words, projected_occupancy

from conftest import BOUNDS_MAX, BOUNDS_MIN, make_column

SQRT2 = math.sqrt(2.0)


# --- independent oracle machinery -------------------------------------------


def oracle_crossings(beams, p, q):
    """Test-local crossing enumeration (same half-open convention)."""
    out = []
    for beam in beams:
        bx, (z0, z1) = beam.x, beam.z_interval
        pr, qr = p[0] >= bx, q[0] >= bx
        if pr == qr:
            continue
        t = (bx - p[0]) / (q[0] - p[0])
        z = p[1] + t * (q[1] - p[1])
        if z0 <= z <= z1:
            out.append((t, (beam.letter + 1) if qr else -(beam.letter + 1)))
    return [letter for _, letter in sorted(out)]


def oracle_signature(beams, pts):
    word = []
    for p, q in zip(pts, pts[1:]):
        word.extend(oracle_crossings(beams, p, q))
    # naive repeated-scan reduction
    changed = True
    while changed:
        changed = False
        for i in range(len(word) - 1):
            if word[i] == -word[i + 1]:
                del word[i : i + 2]
                changed = True
                break
    return tuple(word)


def oracle_augmented_dijkstra(occ, origin, res, beams, goal_cell, max_len):
    """Textbook Dijkstra over the explicit (cell, word) product graph.

    Distances are derived from integer (orthogonal, diagonal) step counts
    with the same closed-form expression the library uses, so exact
    comparison is meaningful.
    """
    nx, nz = occ.shape
    dirs = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]

    def center(cell):
        return (
            origin[0] + (cell[0] + 0.5) * res,
            origin[1] + (cell[1] + 0.5) * res,
        )

    start = (goal_cell[0], goal_cell[1], ())
    dist = {}
    heap = [(0.0, 0, start, 0, 0)]
    counter = itertools.count(1)
    while heap:
        d, _, node, n_o, n_d = heapq.heappop(heap)
        if node in dist:
            continue
        dist[node] = n_o * res + n_d * (res * SQRT2)
        i, j, word = node
        for di, dj in dirs:
            ni, nj = i + di, j + dj
            if not (0 <= ni < nx and 0 <= nj < nz) or occ[ni, nj]:
                continue
            crossing = oracle_crossings(beams, center((ni, nj)), center((i, j)))
            new_word = list(crossing) + list(word)
            changed = True
            while changed:
                changed = False
                for k in range(len(new_word) - 1):
                    if new_word[k] == -new_word[k + 1]:
                        del new_word[k : k + 2]
                        changed = True
                        break
            if len(new_word) > max_len:
                continue
            key = (ni, nj, tuple(new_word))
            if key in dist:
                continue
            no2, nd2 = (n_o, n_d + 1) if (di and dj) else (n_o + 1, n_d)
            pri = no2 * res + nd2 * (res * SQRT2)
            heapq.heappush(heap, (pri, next(counter), key, no2, nd2))
    return dist


def small_env(passage_lists, bounds=(2.0, 2.0), width=0.12, col_x=None):
    """Environment on a small square footprint from per-column passages."""
    bx, bz = bounds
    cols = col_x or [0.6 + 0.5 * i for i in range(len(passage_lists))]
    blades = []
    for ci, (x0, passages) in enumerate(zip(cols, passage_lists)):
        blades += make_column(x0, width, passages, 0.0, bz, (-0.2, 0.2), ci)
    return environment_from_blades((0.0, -0.2, 0.0), (bx, 0.2, bz), blades)


# --- reduced words -----------------------------------------------------------


class TestReduceWord:
    def test_simple_cancellation(self):
        assert reduce_word((1, -1)) == ()

    def test_no_cancellation(self):
        assert reduce_word((1, 3)) == (1, 3)

    def test_nested_cancellation(self):
        assert reduce_word((1, 2, -2, -1)) == ()

    def test_partial(self):
        assert reduce_word((2, 1, -1, 3)) == (2, 3)

    @given(st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), max_size=30))
    @settings(max_examples=300, deadline=None)
    def test_idempotent(self, word):
        once = reduce_word(tuple(word))
        assert reduce_word(once) == once

    @given(st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), max_size=20))
    @settings(max_examples=200, deadline=None)
    def test_inverse_concatenation_is_trivial(self, word):
        w = tuple(word)
        assert concat_words(w, inverse_word(w)) == ()


class TestRemainderSignature:
    def test_matching_state_and_goal(self):
        assert remainder_signature((1,), (1,)) == ()

    def test_partial_progress(self):
        assert remainder_signature((1,), (1, 2)) == (2,)

    def test_empty_state_is_identity(self):
        g = (2, -1, 3)
        assert remainder_signature((), g) == g

    @given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=12))
    @settings(max_examples=200, deadline=None)
    def test_self_remainder_empty(self, word):
        w = reduce_word(tuple(word))
        assert remainder_signature(w, w) == ()


# --- polyline signatures ------------------------------------------------------


def build_three_obstacles():
    blades = []
    for ci, x0 in enumerate([1.0, 2.0, 3.0]):
        blades.append(
            Blade((x0, x0 + 0.2), (-0.2, 0.2), (0.4, 0.6), 0, ci)
        )
    return environment_from_blades((0, -0.2, 0), (4.0, 0.2, 2.0), blades)


class TestPolylineSignature:
    def test_left_of_all_beams_empty(self):
        env = build_three_obstacles()
        beams = place_beams(env)
        pts = [(0.2, 0.2), (0.4, 1.5), (0.6, 0.3)]
        assert signature_of_polyline(beams, pts) == ()

    def test_two_curve_fixture_matches_reference_classes(self):
        # tau_1 passes over obstacles 1 and 3 (crossing their beams) and
        # below obstacle 2; tau_2 dips below the first two obstacles
        env = build_three_obstacles()
        beams = place_beams(env)
        start, end = (0.5, 0.5), (3.7, 0.5)
        tau1 = [start, (1.1, 1.0), (1.6, 0.2), (2.5, 0.2), (3.1, 1.0), end]
        tau2 = [start, (1.5, 0.2), (2.5, 0.2), (3.1, 1.0), end]
        assert signature_of_polyline(beams, tau1) == (1, 3)
        assert signature_of_polyline(beams, tau2) == (3,)

    def test_back_and_forth_cancels(self):
        env = build_three_obstacles()
        beams = place_beams(env)
        pts = [(0.5, 1.0), (1.5, 1.0), (0.5, 1.1)]
        raw = oracle_crossings(beams, pts[0], pts[1]) + oracle_crossings(
            beams, pts[1], pts[2]
        )
        assert len(raw) == 2  # both crossings really happen
        assert signature_of_polyline(beams, pts) == ()

    def test_matches_oracle_on_random_polylines(self):
        env = build_three_obstacles()
        beams = place_beams(env)
        rng = np.random.default_rng(4)
        for _ in range(300):
            pts = np.column_stack(
                [rng.uniform(0.1, 3.9, 6), rng.uniform(0.1, 1.9, 6)]
            )
            assert signature_of_polyline(beams, pts) == oracle_signature(
                beams, pts.tolist()
            )

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            signature_of_polyline([], [(0, 0)])

    def test_concatenation_homomorphism(self):
        env = build_three_obstacles()
        beams = place_beams(env)
        rng = np.random.default_rng(8)
        for _ in range(200):
            a = np.column_stack([rng.uniform(0.1, 3.9, 4), rng.uniform(0.1, 1.9, 4)])
            b = np.column_stack([rng.uniform(0.1, 3.9, 4), rng.uniform(0.1, 1.9, 4)])
            b[0] = a[-1]
            whole = np.vstack([a, b[1:]])
            assert signature_of_polyline(beams, whole) == concat_words(
                signature_of_polyline(beams, a), signature_of_polyline(beams, b)
            )

    def test_deformation_invariance_sample(self):
        env = build_three_obstacles()
        beams = place_beams(env)
        rng = np.random.default_rng(12)
        checked = 0
        for _ in range(100):
            pts = np.column_stack(
                [rng.uniform(0.1, 3.9, 7), rng.uniform(0.1, 1.9, 7)]
            )
            sig = signature_of_polyline(beams, pts)
            base_raw = [
                tuple(oracle_crossings(beams, p, q)) for p, q in zip(pts, pts[1:])
            ]
            for _ in range(10):
                eps = 0.02
                for _ in range(6):
                    jit = pts + rng.uniform(-eps, eps, pts.shape)
                    raw = [
                        tuple(oracle_crossings(beams, p, q))
                        for p, q in zip(jit, jit[1:])
                    ]
                    if raw == base_raw:
                        assert signature_of_polyline(beams, jit) == sig
                        checked += 1
                        break
                    eps /= 2
        assert checked > 500


class TestStateSignature:
    def test_straight_left_of_blades_empty(self, desk_robot, two_column_env):
        beams = place_beams(two_column_env)
        c = Configuration.straight(5, 0.0)
        assert signature_of_state(desk_robot, beams, c) == ()

    def test_y_translation_invariance(self, two_column_env):
        beams = place_beams(two_column_env)
        for y in (-0.2, 0.0, 0.2):
            spec = RobotSpec(
                num_units=5,
                subunits_per_unit=3,
                subunit_length=0.06,
                body_radius=0.035,
                pitch_limit=0.4,
                yaw_limit=0.4,
                prismatic_range=(0.0, 1.5),
                base_position=(0.12, y, 0.8),
            )
            c = Configuration(
                0.3, np.full(5, 0.05), np.full(5, 0.1)
            )
            assert signature_of_state(spec, beams, c) == signature_of_state(
                RobotSpec(
                    num_units=5,
                    subunits_per_unit=3,
                    subunit_length=0.06,
                    body_radius=0.035,
                    pitch_limit=0.4,
                    yaw_limit=0.4,
                    prismatic_range=(0.0, 1.5),
                    base_position=(0.12, 0.0, 0.8),
                ),
                beams,
                c,
            )

    def test_threading_over_first_blade_crosses_beam(self):
        env = build_three_obstacles()
        beams = place_beams(env)
        spec = RobotSpec(
            num_units=2,
            subunits_per_unit=2,
            subunit_length=0.3,
            body_radius=0.02,
            pitch_limit=0.8,
            yaw_limit=0.8,
            prismatic_range=(0.0, 1.0),
            base_position=(0.5, 0.0, 0.9),
        )
        c = Configuration(0.0, np.array([0.35, -0.5]), np.zeros(2))
        from snakeplan import forward_kinematics

        pts = [(p[0], p[2]) for p in forward_kinematics(spec, c)]
        assert any(p[0] > 1.1 for p in pts)  # body reaches past beam 0
        sig = signature_of_state(spec, beams, c)
        assert sig == (1,)


# --- augmented distance maps --------------------------------------------------


class TestHomotopyDistanceMap:
    def test_goal_cell_zero(self):
        env = small_env([[(0.8, 1.2)]])
        dmap = build_homotopy_distance_map(
            env, place_beams(env), (1.6, 1.0), max_word_len=3, resolution=0.1
        )
        assert dmap.distance(dmap.goal_cell, ()) == 0.0

    def test_goal_inside_obstacle_rejected(self):
        env = small_env([[(0.8, 1.2)]])
        blade = env.blades[0]
        inside = (
            0.5 * (blade.x_interval[0] + blade.x_interval[1]),
            0.5 * (blade.z_interval[0] + blade.z_interval[1]),
        )
        with pytest.raises(ValueError, match="inside"):
            build_homotopy_distance_map(
                env, place_beams(env), inside, max_word_len=3, resolution=0.1
            )

    def test_obstacle_free_octile_closed_form(self, empty_env):
        res = 0.1
        dmap = build_homotopy_distance_map(
            empty_env, (), (1.05, 0.85), max_word_len=0, resolution=res
        )
        gi, gj = dmap.goal_cell
        for i in range(0, dmap.dims[0], 3):
            for j in range(0, dmap.dims[1], 3):
                di, dj = abs(i - gi), abs(j - gj)
                lo, hi = min(di, dj), max(di, dj)
                expected = (hi - lo) * res + lo * (res * SQRT2)
                assert dmap.distance((i, j), ()) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize(
        "passages,n_cols",
        [
            ([[(0.8, 1.2)]], 1),
            ([[(0.5, 0.8), (1.3, 1.6)]], 1),
            ([[(0.8, 1.1)], [(0.5, 0.8)]], 2),
            ([[(0.4, 0.7), (1.2, 1.5)], [(0.8, 1.1)]], 2),
        ],
    )
    def test_matches_product_graph_oracle(self, passages, n_cols):
        env = small_env(passages)
        beams = place_beams(env)
        res = 0.1
        goal = (1.7, 1.0)
        dmap = build_homotopy_distance_map(
            env, beams, goal, max_word_len=4, resolution=res
        )
        origin, dims, occ = projected_occupancy(env, res)
        oracle = oracle_augmented_dijkstra(
            occ, origin, res, beams, dmap.goal_cell, max_len=4
        )
        assert set(oracle) == set(dmap.distances)
        for key, expected in oracle.items():
            assert dmap.distances[key] == expected

    def test_distinct_classes_have_distinct_distances(self):
        # a floating blade: the goal is reachable under it (empty word) or
        # over it (crossing its beam), and the estimates differ
        blades = [Blade((0.9, 1.1), (-0.2, 0.2), (0.8, 1.2), 0, 0)]
        env = environment_from_blades((0, -0.2, 0), (2.0, 0.2, 2.0), blades)
        beams = place_beams(env)
        dmap = build_homotopy_distance_map(
            env, beams, (1.7, 1.0), max_word_len=3, resolution=0.1
        )
        probe = dmap.cell_of((0.3, 1.0))
        d_under = dmap.distance(probe, ())
        d_over = dmap.distance(probe, (1,))
        assert d_under < math.inf
        assert d_over < math.inf
        assert d_under != d_over

    def test_dump_roundtrip(self, tmp_path):
        env = small_env([[(0.8, 1.2)]])
        dmap = build_homotopy_distance_map(
            env, place_beams(env), (1.6, 1.0), max_word_len=2, resolution=0.1
        )
        out = tmp_path / "map.txt"
        dmap.dump(out)
        lines = out.read_text().splitlines()
        assert len(lines) == len(dmap.distances)


# --- passage detection ---------------------------------------------------------


class TestPassages:
    def test_boundary_and_interior(self):
        env = small_env([[(0.8, 1.2)]])
        ps = find_passages(env, 0)
        assert len(ps) == 1  # blades touch both bounds in this layout
        assert ps[0].z_interval == (0.8, 1.2)

    def test_single_blade_has_two_boundary_passages(self):
        blades = [Blade((0.9, 1.1), (-0.2, 0.2), (0.8, 1.2), 0, 0)]
        env = environment_from_blades((0, -0.2, 0), (2, 0.2, 2), blades)
        ps = find_passages(env, 0)
        assert [p.z_interval for p in ps] == [(0.0, 0.8), (1.2, 2.0)]


class TestDetectRelevantClasses:
    def make_spec(self, base_x=0.1):
        return RobotSpec(
            num_units=2,
            subunits_per_unit=2,
            subunit_length=0.1,
            body_radius=0.02,
            pitch_limit=0.8,
            yaw_limit=0.8,
            prismatic_range=(0.0, 1.5),
            base_position=(base_x, 0.0, 1.0),
        )

    def test_two_sequences_ranked_by_closeness(self):
        # column 1 offers a near and a far passage relative to the column-2
        # passage that leads to the goal
        env = small_env(
            [[(0.55, 0.75), (1.25, 1.45)], [(1.05, 1.25)]],
            bounds=(2.0, 2.0),
        )
        beams = place_beams(env)
        spec = self.make_spec()
        start = Configuration.straight(2)
        classes = detect_relevant_classes(
            spec, env, beams, start, (1.7, 1.1), k=4
        )
        assert len(classes) >= 2
        first = classes[0]
        # best class goes through the passage nearest the goal passage
        assert first.passages[0].z_interval == (1.25, 1.45)
        assert classes[0].deviation < classes[1].deviation

    def test_goal_before_first_column(self):
        env = small_env([[(0.8, 1.2)]])
        beams = place_beams(env)
        spec = self.make_spec()
        classes = detect_relevant_classes(
            spec, env, beams, Configuration.straight(2), (0.35, 1.0), k=2
        )
        assert len(classes) == 1
        assert classes[0].signature == ()
        assert classes[0].passages == ()

    def test_k1_returns_lowest_deviation_only(self):
        env = small_env(
            [[(0.55, 0.75), (1.25, 1.45)], [(1.05, 1.25)]],
            bounds=(2.0, 2.0),
        )
        beams = place_beams(env)
        spec = self.make_spec()
        all_classes = detect_relevant_classes(
            spec, env, beams, Configuration.straight(2), (1.7, 1.1), k=4
        )
        top = detect_relevant_classes(
            spec, env, beams, Configuration.straight(2), (1.7, 1.1), k=1
        )
        assert len(top) == 1
        assert top[0].signature == all_classes[0].signature
        # hand-computed deviations: near-passage route beats far-passage route
        assert top[0].deviation == pytest.approx(
            abs(1.35 - 1.15) + abs(1.15 - 1.1)
        )

    def test_blocked_column_returns_empty(self):
        env = small_env([[(0.9, 1.0)]])
        beams = place_beams(env)
        spec = self.make_spec()
        classes = detect_relevant_classes(
            spec, env, beams, Configuration.straight(2), (1.7, 1.0), k=2,
            min_width=0.3,
        )
        assert classes == []


@pytest.fixture(scope="module")
def heuristic_fixture():
    """Two floating obstacles; the robot body already crossed beam 0."""
    blades = [
        Blade((0.7, 0.9), (-0.2, 0.2), (0.8, 1.1), 0, 0),
        Blade((1.3, 1.5), (-0.2, 0.2), (0.8, 1.1), 0, 1),
    ]
    env = environment_from_blades((0, -0.2, 0), (2.0, 0.2, 2.0), blades)
    beams = place_beams(env)
    spec = RobotSpec(
        num_units=2,
        subunits_per_unit=2,
        subunit_length=0.18,
        body_radius=0.02,
        pitch_limit=1.2,
        yaw_limit=1.2,
        prismatic_range=(0.0, 1.2),
        base_position=(0.3, 0.0, 1.25),
    )
    state = Configuration.straight(2)  # body crosses beam 0 at z=1.25
    goal = (1.05, 1.35)
    dmap = build_homotopy_distance_map(
        env, beams, goal, max_word_len=4, resolution=0.1
    )
    return env, beams, spec, dmap, state, goal


class TestHomotopyHeuristic:

    def test_state_signature_is_first_letter(self, heuristic_fixture):
        env, beams, spec, dmap, state, goal = heuristic_fixture
        assert signature_of_state(spec, beams, state) == (1,)

    def test_matching_class_gives_direct_distance(self, heuristic_fixture):
        env, beams, spec, dmap, state, goal = heuristic_fixture
        from snakeplan import end_effector

        h = homotopy_heuristic(dmap, spec, beams, state, (1,))
        tip = end_effector(spec, state)
        straight = math.hypot(tip[0] - goal[0], tip[2] - goal[1])
        assert h < math.inf
        # remainder is empty, so the estimate is the direct grid reach
        assert h <= straight + 4 * dmap.resolution

    def test_detour_class_strictly_longer(self, heuristic_fixture):
        env, beams, spec, dmap, state, goal = heuristic_fixture
        d_direct = homotopy_heuristic(dmap, spec, beams, state, (1,))
        d_detour = homotopy_heuristic(dmap, spec, beams, state, (1, 2))
        assert d_direct < math.inf
        assert d_detour < math.inf
        # reaching the goal through the second class loops around obstacle 1
        assert d_detour > d_direct + 0.5

    def test_unreachable_word_is_infinite(self, heuristic_fixture):
        env, beams, spec, dmap, state, goal = heuristic_fixture
        # the remainder word exceeds the map's word-length cap
        assert homotopy_heuristic(dmap, spec, beams, state, (1,) * 6) == math.inf
