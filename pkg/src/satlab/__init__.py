"""Random 3-SAT laboratory: datasets, graph classifiers, and a relaxation solver.

The package splits into exact machinery (cnf, oracle, dataset), the graph
route to satisfiability prediction (graph, gnn, training), and the
continuous route (circuit), with experiments/cli gluing them into
reproducible runs.
"""

from .circuit import AnnealConfig, anneal_solve, approx_sat, encode_w, sat_step
from .cnf import CnfFormula, generate_random_3sat, parse_dimacs, write_dimacs
from .dataset import BalancedDataset, build_balanced_dataset, load_dataset, write_dataset
from .gnn import LINEAR, NONLINEAR, GnnModel, GraphBatch, forward_fixed_point
from .graph import VarVarGraph, encode_var_var
from .oracle import SAT, UNSAT, brute_force_sat, dpll_sat
from .training import TrainConfig, evaluate_accuracy, train

__version__ = "0.1.0"

__all__ = [
    "AnnealConfig",
    "BalancedDataset",
    "CnfFormula",
    "GnnModel",
    "GraphBatch",
    "LINEAR",
    "NONLINEAR",
    "SAT",
    "TrainConfig",
    "UNSAT",
    "VarVarGraph",
    "anneal_solve",
    "approx_sat",
    "brute_force_sat",
    "build_balanced_dataset",
    "dpll_sat",
    "encode_var_var",
    "encode_w",
    "evaluate_accuracy",
    "forward_fixed_point",
    "generate_random_3sat",
    "load_dataset",
    "parse_dimacs",
    "sat_step",
    "train",
    "write_dataset",
    "write_dimacs",
]
