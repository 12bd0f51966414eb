"""
Rate metrics module.

Beam-domain gains, hardening-bound rates and the WMMSE surrogate.
"""

__version__ = "0.1.0"
# Explicitly expose module contents
from src.metrics.rates import (
    compute_beam_gains, rate_lower_bound, sum_rate, update_mu, update_nu, wmmse_objective
)
