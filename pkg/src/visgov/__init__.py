"""Visibility-constrained reference governing for multirotors.

The package turns camera field-of-view requirements into polynomial
inequalities on the closed-loop flat state, lifts them to linear
inequalities over monomial coordinates, precomputes the maximal
admissible set offline, and filters references online with a bisection
reference governor.
"""

from .lifting import (
    MonomialBasis,
    LiftMatrices,
    LiftedSystem,
    monomial_basis,
    lift_no_rep,
    lift_with_rep,
    build_lift_matrices,
    build_phi_r,
    build_lifted_system,
    eta,
)
from .trig import (
    TrigApprox,
    remez_minimax,
    compute_delta_max,
    trig_approx,
)
from .geometry import (
    CameraModel,
    TightenedFov,
    camera_projection,
    true_constraint_eval,
    virtual_frame,
    approx_virtual_frame,
    phase_and_magnitude_bounds,
    violation_bounds,
    tighten_fov,
    tighten_fov_sound,
)
from .plant import (
    GRAVITY,
    ClosedLoopModel,
    build_closed_loop,
    step,
    commanded_acceleration,
    attitude_from_flat,
)
from .constraints import (
    PolyConstraint,
    PolyConstraintSet,
    build_poly_constraints,
    assemble_constraint_set,
    to_json,
    polys_from_json,
)
from .moas import (
    Moas,
    MoasBuildError,
    MoasConfig,
    SteadyStateMap,
    steady_state_map,
    steady_state_rows,
    construct_moas,
    contains,
    provenance_hash,
    save,
    load,
    load_or_construct,
)
from .governor import (
    InfeasibleError,
    RgConfig,
    GovernorState,
    TrajectoryLog,
    segment_margins,
    margin_at,
    max_admissible_lambda,
    rg_step,
    find_initial_reference,
    to_landmark_frame,
    from_landmark_frame,
    run_closed_loop,
)
from .scenarios import (
    ReferencePlan,
    circle_config,
    waypoint_config,
    load_config,
    gen_reference,
    build_stack,
    build_or_load_moas,
    run_scenario,
)
from .teleop import (
    PROTOCOL_VERSION,
    TeleopService,
    create_app,
    serve,
)
from .estimator import VisibilityGovernor

__version__ = "0.1.0"
