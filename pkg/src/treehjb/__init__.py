"""Dynamic programming on trees of controlled dynamics for finite-horizon optimal control."""

from .core import (ControlGrid, Node, NumericalError, OCProblem, ResourceLimitError, TimeGrid, Trajectory,
                   Tree, TreeStructureError, ValueTable, full_tree_cardinality, validate_tree)
from .dp import LipschitzData, check_dp_consistency, lipschitz_bound, solve_value, solve_value_autonomous
from .feedback import evaluate_cost, synthesize_trajectory
from .metrics import convergence_order, err_22, err_inf2, relative_l2_error
from .stepper import (ExplicitEuler, ImplicitEuler, ImplicitEulerSolver, LinearAffineDynamics,
                      explicit_euler_step, implicit_euler_step)
from .tree_builder import PruneConfig, build_tree

__version__ = "0.1.0"
