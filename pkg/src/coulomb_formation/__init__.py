"""CLF-based charge and thrust allocation for hybrid Coulomb spacecraft formations."""

from .allocator import (
    AllocationResult,
    AllocatorConfig,
    Branch,
    CLFViolationError,
    KKTReport,
    allocate,
    allocate_from_derivatives,
    charge_decrease_check,
    kkt_consistency,
    min_norm_thrust,
)
from .clf import CLFCheck, CLFDerivatives, QuadraticCLF, evaluate, square_clf, verify_clf
from .formation import (
    AbsoluteState,
    DesiredConfiguration,
    ErrorState,
    FormationModel,
    Inputs,
    SingularityError,
    error_dynamics_matrices,
    full_dynamics,
    gc_matrix,
    gt_matrix,
    relative_from_absolute,
)
from .mathkit import SymEig, hermitian_reshape, sym_eig, vec
from .scenario import Scenario, ScenarioError, load_scenario, validate_scenario
from .simulator import EtaSchedule, SimConfig, SimulationAborted, SimulationRecord, impulse, run, step, sweep

__version__ = "0.1.0"
