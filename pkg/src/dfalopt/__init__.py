"""Decentralized composite convex optimization toolkit.

Distributed first-order augmented Lagrangian solver with synchronous and
asynchronous randomized-block inner oracles, consensus ADMM baselines, a
deterministic message-passing simulator, and a sparse-group regression
benchmark protocol.
"""

from .graph import (
    Graph,
    GraphError,
    build_topology,
    laplacian_apply,
    laplacian_dense,
    laplacian_quadratic,
    load_edge_file,
    spectral_bounds,
)
from .funcs import (
    GroupPartition,
    HuberLoss,
    NodeProblem,
    SparseGroupReg,
    huber_scalar,
    sgn,
)
from .solvers import (
    BlockObjective,
    SolveResult,
    apg,
    arbcd_run,
    ms_apg,
    rbcd_run,
)
from .netsim import AsyncNetwork, CommLedger, SyncNetwork, async_schedule
from .trace import RunTrace, TraceRow, TRACE_COLUMNS
from .dfal import (
    DfalParams,
    DfalState,
    ProtocolError,
    async_dfal_solve,
    consensus_violation,
    coupling_constants,
    default_bx,
    default_params,
    dfal_solve,
    feasibility_diagnostics,
    inner_cap,
    local_gradient,
    objective_sum,
)
from .baselines import SadmmState, admm_solve, sadmm_solve
from .bench import (
    BenchReport,
    ProblemInstance,
    Reference,
    evaluate,
    generate_instance,
    reference_solve,
    run_benchmark,
)

__version__ = "0.1.0"
