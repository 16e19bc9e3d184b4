"""Semi-constraint optimal transport as a 0/1 program: LP, branch-and-cut, baselines."""
from .baselines import Matching, blocking_pairs, brute_force_oracle, daa_match, greedy_match, injective_completion
from .bnc import MipNode, MipResult, branch_and_cut, run_branch_and_cut, solve_mip
from .instance import AssignmentSolution, SotInstance, assignment_objective, build_instance, partition_violations
from .lp import LpProblem, LpResult, read_mps, simplex_solve, write_mps

__all__ = [
    "AssignmentSolution", "LpProblem", "LpResult", "Matching", "MipNode", "MipResult", "SotInstance",
    "assignment_objective", "blocking_pairs", "branch_and_cut", "brute_force_oracle", "build_instance",
    "daa_match", "greedy_match", "injective_completion", "partition_violations", "read_mps",
    "run_branch_and_cut", "simplex_solve", "solve_mip", "write_mps",
]
