"""Search-based motion planning for a serpentine manipulator in blade arrays."""

from .cmaes import CmaResult, cmaes_minimize
from .env import (
    Beam,
    Blade,
    BladeArraySpec,
    DistanceField,
    Environment,
    build_distance_field,
    build_environment,
    clearance,
    clearance_points,
    environment_from_blades,
    place_beams,
    project,
)
from .homotopy import (
    ClassSpec,
    HomotopyDistanceMap,
    Passage,
    build_homotopy_distance_map,
    detect_relevant_classes,
    find_passages,
    homotopy_heuristic,
    inverse_word,
    reduce_word,
    remainder_signature,
    signature_of_polyline,
    signature_of_state,
)
from .optimizer import (
    ObjectiveWeights,
    OptRequest,
    OptResult,
    generate_neighbor,
    goal_cost,
    objective,
    obstacle_cost,
    six_connected_ee_goals,
    state_cost,
)
from .robot import (
    Configuration,
    RobotSpec,
    end_effector,
    forward_kinematics,
    is_valid_state,
    is_valid_transition,
    transition_cost,
)
from .scenario import (
    GoalPose,
    Scenario,
    SuiteParams,
    generate_suite,
    load_scenario,
    read_plan,
    revalidate_plan,
    write_plan,
    write_scenario,
)
from .search import (
    Plan,
    PlannerConfig,
    PlanningResult,
    SearchStats,
    detect_stagnation,
    dts_select_queue,
    extract_path,
    goal_check,
    plan,
    predefined_successors,
)

__version__ = "0.1.0"
