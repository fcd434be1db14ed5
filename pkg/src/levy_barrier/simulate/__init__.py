"""Monte Carlo simulation of reflected surplus paths."""
from .engine import (ControlledPath, DominationRecord, McEstimate, OccupationDensity, SimConfig,
                     domination_probe, dt_allowance, estimate_ruin_laplace,
                     estimate_value_exponential, estimate_value_quasi, occupation_density,
                     resolvent_density, simulate_controlled, worker_count)

__all__ = ["ControlledPath", "DominationRecord", "McEstimate", "OccupationDensity", "SimConfig",
           "domination_probe", "dt_allowance", "estimate_ruin_laplace",
           "estimate_value_exponential", "estimate_value_quasi", "occupation_density",
           "resolvent_density", "simulate_controlled", "worker_count"]
