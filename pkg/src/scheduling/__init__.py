"""
Scheduling and baselines module.

CS/RS schedulers, the SSS assignment and MRT/ZF beamformers.
"""

__version__ = "0.1.0"
# Explicitly expose module contents
from src.scheduling.baselines import (
    mrt_beamformers, schedule_cs, schedule_rs, sss_assign, zf_beamformers
)
