"""
Simulation module.

Drop pipeline, solver registry, output writers and the validation suites.
"""

__version__ = "0.1.0"
# Explicitly expose module contents
from src.simulation.simulator import Simulator, build_solver, run_simulate, run_sweep
