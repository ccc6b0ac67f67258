"""Cutting-plane consensus: distributed optimization by exchanging bases of cuts."""
from ._jit import USE_NUMBA
from .geometry import (CutCollection, CutOrigin, DimensionError, HalfSpace, Tolerances,
                       DEFAULT_TOL, box_basis, contains, violation)
from .minnorm import (ApproxLpSolution, Basis, PerturbedObjective, SolverError, Status,
                      eval_perturbed, extract_basis, solve_min_norm)
from .netsim import (CommGraph, FaultPlan, RunLog, Schedule, StopRule, check_joint_connectivity,
                     diameter, run)
from .node import BasisMessage, NodeState, has_converged, init_node, step
from .oracles import (AffineMax, ColGenConstraint, Column, CompositeOracle, Ellipsoid,
                      InequalityConstraint, MaxOfConstraints, OracleError, OracleReply, Polytope,
                      QuadraticConstraint, SemidefiniteConstraint, UncertainConstraint, colgen_cut,
                      disk_constraint, pessimize, robust_cut, robust_linear_row, sdp_cut,
                      subgradient_cut)
from .recovery import ColumnLog, InsufficientColumns, RecoveredPrimal, cost_gap, recover

__version__ = "0.1.0"
