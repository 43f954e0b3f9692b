"""Secrecy-rate regions for multicast plus confidential MIMO broadcast with artificial noise."""
from .ao import LambdaSweepConfig, ao_solve, trace_region_ao
from .dc import QomsSweepConfig, compute_tau_max, dc_solve, trace_region_dc
from .harness import (ExperimentConfig, complexity_estimate, generate_channels, run_experiment,
                      run_no_an, run_tdma)
from .model import ChannelSet, CovarianceTriple, DomainError, RatePoint
from .region import BoundaryPoint, RegionBoundary

__version__ = "0.1.0"

__all__ = [
    "ChannelSet", "CovarianceTriple", "DomainError", "RatePoint", "BoundaryPoint", "RegionBoundary",
    "QomsSweepConfig", "compute_tau_max", "dc_solve", "trace_region_dc",
    "LambdaSweepConfig", "ao_solve", "trace_region_ao",
    "ExperimentConfig", "complexity_estimate", "generate_channels", "run_experiment", "run_no_an", "run_tdma",
]
