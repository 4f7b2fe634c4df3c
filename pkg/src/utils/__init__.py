"""
Simulation and solver utilities for the Rayleigh gas experiments.
"""
