"""
Constellation geometry module.

Walker-Delta constellations, UT drops, serving-satellite selection and
angle-of-departure computation.
"""

__version__ = "0.1.0"
# Explicitly expose module contents
from src.geometry.constellation import (
    build_scene, build_walker_delta, compute_aods, drop_uts, select_serving_sats
)
