"""Exact numerics for an expanding-tree model of a quantum measurement apparatus.

A register of qubits grows by applying a one-to-two isometry v(theta) to
every qubit at every time step, starting from one half of a Bell pair.
Coarse-grained weak monitoring of the total magnetization yields outcome
histories whose statistics distinguish a functioning apparatus
(theta < pi/4) from a scrambler (theta > pi/4).  The tree structure reduces
all monitored dynamics to recursions on 2x2 matrices; a brute-force
statevector oracle at small depth validates every fast path.
"""

from .algebra import ModelParams, ScalingData, build_isometry, kraus_twist, pair_expectation, scaling_data, v_super
from .histories import DistributionTable, GridSpec, delta_probe, fine_grained_probe, marginal_distribution, single_time_distribution
from .moments import FractionSpec, classify_phase, eta, eta_squared, fraction_moments, mu

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "ScalingData",
    "build_isometry",
    "kraus_twist",
    "pair_expectation",
    "scaling_data",
    "v_super",
    "FractionSpec",
    "classify_phase",
    "eta",
    "eta_squared",
    "fraction_moments",
    "mu",
    "GridSpec",
    "DistributionTable",
    "single_time_distribution",
    "marginal_distribution",
    "delta_probe",
    "fine_grained_probe",
    "__version__",
]
