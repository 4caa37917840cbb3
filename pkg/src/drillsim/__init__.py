"""Deterministic closed-loop simulator of autonomous circular drilling."""

from .control import (
    CLASSIFICATIONS,
    ControlConfig,
    RunOutcome,
    Trace,
    TrialConfig,
    advance_plan,
    classify_outcome,
    completion_criterion,
    damped_velocities,
    run_trial,
)
from .fusion import (
    AccuracyModel,
    accuracy_weights,
    criterion_count,
    fuse,
    update_progress,
    upsample_image,
)
from .harness import (
    ARMS,
    PROFILES,
    ConfigError,
    ExperimentConfig,
    load_config,
    run_batch,
    run_experiment,
)
from .plane import PlaneFit, fit_plane, plane_offsets
from .sensors import (
    ForceSensor,
    ForceSensorConfig,
    ImageSensor,
    ImageSensorConfig,
    Recognizer,
    WorldView,
    perfect_force_config,
    perfect_image_config,
)
from .shell import (
    ShellState,
    ShellSurface,
    SurfaceConfig,
    apply_drill,
    generate_surface,
    ground_truth_completion,
    make_shell_state,
)
from .spline import (
    SplineCurve,
    SplineSegment,
    TrajectoryPoint,
    TrajectoryState,
    build_spline,
    eval_spline,
    fit_segment,
    node_derivatives,
    to_cylindrical,
)

__version__ = "0.1.0"

__all__ = [
    "ARMS",
    "CLASSIFICATIONS",
    "PROFILES",
    "AccuracyModel",
    "ConfigError",
    "ControlConfig",
    "ExperimentConfig",
    "ForceSensor",
    "ForceSensorConfig",
    "ImageSensor",
    "ImageSensorConfig",
    "PlaneFit",
    "Recognizer",
    "RunOutcome",
    "ShellState",
    "ShellSurface",
    "SplineCurve",
    "SplineSegment",
    "SurfaceConfig",
    "Trace",
    "TrajectoryPoint",
    "TrajectoryState",
    "TrialConfig",
    "WorldView",
    "accuracy_weights",
    "advance_plan",
    "apply_drill",
    "build_spline",
    "classify_outcome",
    "completion_criterion",
    "criterion_count",
    "damped_velocities",
    "eval_spline",
    "fit_plane",
    "fit_segment",
    "fuse",
    "generate_surface",
    "ground_truth_completion",
    "load_config",
    "make_shell_state",
    "node_derivatives",
    "perfect_force_config",
    "perfect_image_config",
    "plane_offsets",
    "run_batch",
    "run_experiment",
    "run_trial",
    "to_cylindrical",
    "update_progress",
    "upsample_image",
    "__version__",
]
