"""Residential smart-grid cost minimisation with renewables and two-way grid trade.

Submodules:
    renewgen  PV/wind generation states and the supply process
    market    tariffs, appliances, aggregate demand
    lyapunov  online drift-plus-penalty controller (BTS-LO)
    dp_oracle perfect-information dynamic programming baseline (BTS-DP)
    simkit    scenarios, simulation loop, POS baseline, metrics
    config    YAML scenario schema
    cli       command-line entry point
"""

__version__ = "0.1.0"
