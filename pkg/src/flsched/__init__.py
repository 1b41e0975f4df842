"""Online client selection and bandwidth allocation for wireless federated learning."""

from .bandwidth import (Allocation, AllocationInstance, BarrierParams, barrier_solve,
                        grid_oracle, lse_error_bound, smoothed_objective)
from .lyapunov import DriftBound, QueueState, drift_bound, lyapunov_value, update_queue
from .model import (ClientProfile, Decision, Population, RoundObservation,
                    SystemConfig)
from .scheduler import (PedpcParams, PolicySpec, RoundRecord, RunTrace, pedpc_run,
                        run_policy, solve_round)
from .selection import SelectionInstance, brute_force_selection, itmcs
from .simenv import Scenario, ScenarioSpec, generate_population, sample_round

__all__ = [
    "Allocation", "AllocationInstance", "BarrierParams", "barrier_solve",
    "grid_oracle", "lse_error_bound", "smoothed_objective",
    "DriftBound", "QueueState", "drift_bound", "lyapunov_value", "update_queue",
    "ClientProfile", "Decision", "Population", "RoundObservation", "SystemConfig",
    "PedpcParams", "PolicySpec", "RoundRecord", "RunTrace", "pedpc_run",
    "run_policy", "solve_round",
    "SelectionInstance", "brute_force_selection", "itmcs",
    "Scenario", "ScenarioSpec", "generate_population", "sample_round",
]

__version__ = "0.1.0"
