"""
Channel model module.

Rician statistical CSI, UPA steering vectors and channel samplers.
"""

__version__ = "0.1.0"
# Explicitly expose module contents
from src.channel.channel_model import (
    build_statistical_csi, build_T, noise_power, sample_instant_channel, steering_vector
)
