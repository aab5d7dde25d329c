"""Shared-memory DSMC of unsteady gas flows with two-level parallel execution."""

from .errors import ConfigError, IndexingFault, MergeError, ParameterError
from .gas import (
    CollisionParams,
    FlowProblem,
    GasState,
    Inflow,
    RunResult,
    SimulationClock,
    run_unsteady,
)
from .grid import Body, CellGrid, Geometry
from .kernels import get_backend
from .parallel import (
    StrategyConfig,
    dp_execute,
    execute,
    merge_ensemble,
    psir_execute,
    sequential_execute,
    tlp_execute,
    tlpdpr_execute,
)
from .rng import RngStream, stream_for_run, substream

__version__ = "0.1.0"
