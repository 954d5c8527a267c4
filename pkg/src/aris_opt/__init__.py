"""Max-min rate design for an aerial-RIS two-node relay.

A UAV carrying a reconfigurable intelligent surface shuttles traffic between
two ground nodes. The package jointly tunes the communication schedule, the
per-slot reflection phases, and the 3D trajectory to maximize the minimum
average expected rate under an elevation-dependent probabilistic LoS channel,
and ships the Monte-Carlo and brute-force oracles used to validate each stage.
"""

from .scenario import (
    EnvironmentParams,
    GroundNode,
    KinematicLimits,
    RisGeometry,
    Scenario,
    Trajectory,
    initial_trajectory,
    load_scenario,
    save_scenario,
    validate_trajectory,
)
from .channel import (
    ChannelGrid,
    SlotChannel,
    compute_channel_grid,
    elevation_angle_deg,
    los_channel,
    los_probability,
    nlos_channel,
    sample_fading,
    scenario_fading,
    slot_distance,
    steering_vector,
)
from .rate import (
    PhasePlan,
    RateTerms,
    SlackState,
    XiCoefficients,
    build_gain_matrix,
    cascaded_gain,
    conditional_rate,
    expected_rate,
    expected_rates_matrix,
    identity_phases,
    rate_in_slacks,
    taylor_rate_lower_bound,
)
from .scheduling import Schedule, min_average_rate, reconstruct_binary, solve_schedule_lp
from .phase_opt import (
    LiftedPhase,
    brute_force_phases,
    coordinate_ascent_phases,
    gaussian_randomization,
    phase_objective,
    sdr_objective,
    slot_phase_inputs,
    solve_phase_sdr,
)
from .trajectory_opt import (
    LinearizationContext,
    SubproblemSolution,
    build_context,
    build_horizontal_subproblem,
    build_vertical_subproblem,
    init_slacks,
    linearize_elevation_upper,
    sca_step,
    solve_subproblem,
)
from .optimizer import (
    AoState,
    SchemeConfig,
    alternating_optimize,
    evaluate_objective,
    run_scheme_comparison,
)
from .validator import (
    McReport,
    best_binary_schedule,
    enumeration_expected_rate,
    grid_search_altitude,
    grid_search_waypoint,
    monte_carlo_expected_rate,
    schedule_threshold_oracle,
    toy_end_to_end_oracle,
)

__version__ = "0.1.0"
