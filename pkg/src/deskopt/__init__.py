"""Desk-scale integer programming: a bounded simplex, branch-and-bound with
lazy constraints, TSP formulations, heuristics and benchmark tooling."""

from .bnb import SolverConfig, solve_milp
from .lp import DenseLinearProgram, solve_lp
from .model import ModelDef, VariableDef, constraint

__version__ = "0.1.0"

__all__ = ["SolverConfig", "solve_milp", "DenseLinearProgram", "solve_lp", "ModelDef",
           "VariableDef", "constraint", "__version__"]
