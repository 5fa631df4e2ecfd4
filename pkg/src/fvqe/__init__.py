"""Filtering variational quantum eigensolver (F-VQE) for weighted MaxCut.

Dense state-vector simulation, the six spectral filters, the F-VQE / QVF /
VQE / QAOA / HE-ITE optimizers and an ensemble benchmark runner.
"""
from .filters import FilterSpec, filter_value, filtered_distribution
from .optimize import OptimizerConfig, OptimizerTrace, run
from .problem import MaxCutProblem, WeightedGraph, build_hamiltonian, generate_instance, hardware_instance_graph

__all__ = ["FilterSpec", "filter_value", "filtered_distribution", "OptimizerConfig",
           "OptimizerTrace", "run", "MaxCutProblem", "WeightedGraph", "build_hamiltonian",
           "generate_instance", "hardware_instance_graph"]
__version__ = "0.1.0"
