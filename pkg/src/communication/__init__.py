"""
Communication layer module.

ISL topologies, synchronous consensus messaging and overhead accounting.
"""

__version__ = "0.1.0"
# Explicitly expose module contents
from src.communication.network import IslNetwork, IslTopology, OverheadLedger, build_topology, overhead_report
