"""Current-aware probabilistic search planning for UAV teams at sea.

The package couples a surrogate sea-surface flow model fitted to drifter
observations with an advected target-presence density and a potential-field
coverage controller, so a small UAV team can keep searching where drifting
targets are likely to be instead of where they were dropped.
"""

from .geometry import (
    GeoProjection,
    Grid,
    ScalarField,
    VectorField,
    divergence,
    make_grid,
    sample_bilinear,
)
from .errors import (
    ConfigurationError,
    FitError,
    OutOfDomainError,
    SolverError,
    StabilityError,
)
from .flow import (
    BoundaryProfile,
    BoundarySegment,
    BoundarySpec,
    OptimizationVector,
    SurrogateFlow,
    SurrogateModel,
    VectorLayout,
    boundary_profile,
    fuse,
    solve_bounded_flow,
    solve_open_flow,
)
from .lagrangian import (
    DrifterObservation,
    Trajectory,
    adaptive_diffusion,
    advect,
    advect_piecewise,
    position_error,
)
from .fitting import (
    FitProblem,
    FitResult,
    pso_fit,
    schedule_fit_windows,
    velocity_rms_error,
)
from .belief import (
    ProbabilityField,
    SensingRecord,
    advance,
    apply_sensing,
    cover_counts,
    init_uniform_disc,
    stable_step,
    step_advect_diffuse,
)
from .hedac import (
    DEFAULT_ALPHA,
    PotentialField,
    UavState,
    guidance_direction,
    solve_potential,
    uav_step,
)
from .sensing import (
    DetectionEvent,
    DetectionStreams,
    SensorModel,
    Target,
    camera_footprint,
    capture,
)
from .drifters import (
    SyntheticDrifters,
    deploy_positions,
    synthesize_drifters,
)
from .io import (
    OutputLock,
    fmt,
    read_drifter_csv,
    read_snapshot,
    snapshot_to_csv,
    write_drifter_csv,
    write_snapshot,
)
from .config import (
    MissionConfig,
    load_config,
    parse_config,
    replica_config_text,
)
from .mission import (
    MissionLog,
    WindowRecord,
    metrics,
    plus_pattern,
    predict_targets,
    run_mission,
    write_mission_log,
)

__version__ = "0.1.0"
