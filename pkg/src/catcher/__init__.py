"""Moving-mirror particle catcher: classical maps, ensemble transport, and
a 1-D quantum wave-packet solver for a wall sweeping as sqrt(t)."""

from ._kernels import backend
from .classical_map import (
    MapResult,
    dnu_f_dchi_s,
    dnu_f_dnu_s,
    eta,
    forward_map,
    forward_map_batch,
    has_collision,
    inverse_map,
    lambda_inv,
    trajectory_oracle,
    trajectory_oracle_batch,
)
from .ensemble import (
    DensityGrid,
    EnsembleSpec,
    final_density,
    final_density_grid,
    histogram,
    initial_density,
    initial_density_grid,
    marginals,
    push_forward,
    sample_ensemble,
    stopped_fraction,
)
from .errors import (
    ConfigError,
    InfeasibleDesignError,
    LeakageError,
    UncertaintyViolationError,
)
from .protocol import (
    PhaseSpacePoint,
    StoppingProtocol,
    design_protocol,
    from_dimensionless,
    mirror_position,
    mirror_velocity,
    to_dimensionless,
)
from .quantum import (
    GridState,
    WallSpec,
    WavepacketSpec,
    build_grid,
    build_initial_wavefunction,
    default_time_step,
    observables,
    potential,
    propagate,
    velocity_density,
)

__version__ = "0.1.0"

__all__ = [
    "backend",
    "ConfigError",
    "DensityGrid",
    "EnsembleSpec",
    "GridState",
    "InfeasibleDesignError",
    "LeakageError",
    "MapResult",
    "PhaseSpacePoint",
    "StoppingProtocol",
    "UncertaintyViolationError",
    "WallSpec",
    "WavepacketSpec",
    "build_grid",
    "build_initial_wavefunction",
    "default_time_step",
    "design_protocol",
    "dnu_f_dchi_s",
    "dnu_f_dnu_s",
    "eta",
    "final_density",
    "final_density_grid",
    "forward_map",
    "forward_map_batch",
    "from_dimensionless",
    "has_collision",
    "histogram",
    "initial_density",
    "initial_density_grid",
    "inverse_map",
    "lambda_inv",
    "marginals",
    "mirror_position",
    "mirror_velocity",
    "observables",
    "potential",
    "propagate",
    "push_forward",
    "sample_ensemble",
    "stopped_fraction",
    "to_dimensionless",
    "trajectory_oracle",
    "trajectory_oracle_batch",
    "velocity_density",
]
