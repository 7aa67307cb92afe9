"""Joint communication/radar beamforming via generalized power iteration."""

from .arraygeom import (
    AngularGrid,
    BeamMask,
    RadarScene,
    UlaArray,
    rect_mask,
    steering_vector,
    target_matrices,
    uniform_grid,
)
from .blockdiag import BlockDiagHermitian, SingularBlockError, blockdiag_solve
from .channel import (
    ChannelCovariance,
    ChannelSet,
    PathProfile,
    apply_csit_error,
    covariance_from_paths,
    draw_channel,
    generate_channel_set,
)
from .harness import ExperimentSpec, TrialRecord, run_sweep
from .metrics import StackedBeamformer, SystemConfig
from .solver import (
    SolveReport,
    SolverConfig,
    solve_comm,
    solve_isac_mse,
    solve_isac_scnr,
    solve_radar_mse,
    solve_radar_scnr,
)

__version__ = "0.1.0"

__all__ = [
    "AngularGrid",
    "BeamMask",
    "BlockDiagHermitian",
    "ChannelCovariance",
    "ChannelSet",
    "ExperimentSpec",
    "PathProfile",
    "RadarScene",
    "SingularBlockError",
    "SolveReport",
    "SolverConfig",
    "StackedBeamformer",
    "SystemConfig",
    "TrialRecord",
    "UlaArray",
    "apply_csit_error",
    "blockdiag_solve",
    "covariance_from_paths",
    "draw_channel",
    "generate_channel_set",
    "rect_mask",
    "run_sweep",
    "solve_comm",
    "solve_isac_mse",
    "solve_isac_scnr",
    "solve_radar_mse",
    "solve_radar_scnr",
    "steering_vector",
    "target_matrices",
    "uniform_grid",
]
