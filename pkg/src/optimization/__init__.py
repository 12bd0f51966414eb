"""
Optimization module.

Centralized WMMSE, the low-complexity per-satellite solver and the
reference oracles used to check them.
"""

__version__ = "0.1.0"
# Explicitly expose module contents
from src.optimization.centralized import CentralizedOptions, CentralizedSolver, run_centralized
from src.optimization.local_solver import solve_ball_constrained, solve_local
