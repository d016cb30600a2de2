"""Voltage support of grid-forming inverters under asymmetric faults.

Sequence-network analysis of current-limiting virtual impedances, VI
sizing and angle sweeps, and a closed-loop average-model simulator.
"""
from .network import FaultKind, FaultNetworkModel, FaultScenario, FaultSpec, GridThevenin
from .phasor import Impedance, SequenceSet, ThreePhaseSet, from_sequence, phasor, to_sequence
from .vi import AdaptiveViParams, InfeasibleSizingError, angle_sweep, size_vi

__version__ = "0.1.0"

__all__ = [
    "FaultKind", "FaultNetworkModel", "FaultScenario", "FaultSpec", "GridThevenin",
    "Impedance", "SequenceSet", "ThreePhaseSet", "from_sequence", "phasor", "to_sequence",
    "AdaptiveViParams", "InfeasibleSizingError", "angle_sweep", "size_vi",
]
