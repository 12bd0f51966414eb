"""
Common utilities and interfaces module.

Shared data structures, configuration, exceptions and helpers used by
every other package of the cooperative beamforming library.
"""

__version__ = "0.1.0"
