"""Cooperative downlink beamforming for networked LEO satellites."""
