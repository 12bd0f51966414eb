"""
Decentralized module.

Consensus-ADMM engine running the WMMSE solve across satellites.
"""

__version__ = "0.1.0"
# Explicitly expose module contents
from src.decentralized.engine import DecentralizedOptions, DecentralizedSolver, run_decentralized
