"""Simulator for partially asynchronous block coordinate descent with
locally chosen, uncoordinated stepsizes."""

from .asynchrony import DelaySpec, Schedule, build_schedule, staleness, validate_partial_asynchrony
from .blockvec import BlockPartition, BlockVector, block_norms, block_view
from .engine import (MonitorReport, NetworkState, RunTrace, StopCriteria, initial_state, monitor_lemma3,
                     monitor_run, monitor_theorem1, residual, run, step, write_monitor_report, write_trace_csv)
from .errors import (AsyncBCDError, ConfigError, DegenerateAgentError, DivergenceError, FeasibilityError,
                     PartitionError)
from .kernels import DEFAULT_BACKEND, available_backends
from .objective import (BlockLipschitzMatrix, BoxConstraint, Problem, QuadraticObjective, block_lipschitz,
                        generate_problem, gradient_block, load_problem, project_block, save_problem)
from .stepsize import (StepsizePlan, descent_constants, global_stepsize, local_stepsize, local_stepsizes,
                       manual_plan)

__version__ = "0.1.0"
