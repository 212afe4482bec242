"""Joint relay-time and offloading optimization for a cellular link shared with an IoT MEC network."""

from .baseline import solve_equal_allocation
from .dual import DualPoint, SwitchValues, solve_dual
from .errors import (
    ConfigError,
    DegenerateDirectLink,
    DimensionMismatch,
    HeterogeneousCycles,
    InfeasibleInstance,
    MaxIterationsExceeded,
    MecRelayError,
    RelayPathDegenerate,
    SolutionValidationError,
)
from .lp import LinearProgram, LpSolution, solve_lp
from .model import (
    ChannelGains,
    Geometry,
    Instance,
    NodeParams,
    PrimalSolution,
    SystemParams,
    check_constraints,
)
from .recovery import SolverSettings, SolveReport, solve_instance

__version__ = "0.1.0"
