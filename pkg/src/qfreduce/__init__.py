"""Exact reduction of continuously monitored quantum filters."""
from .linops import DensityState, OperatorSubspace, QuantumModel, fidelity, hs_inner
from .observability import LinearFilter, build_linear_filter, observable_space
from .algebra import StarAlgebra, WedderburnData, commutant, generate_algebra, wedderburn_decompose
from .condexp import CondExpFactors, build_factors, cptp_check
from .reduction import ReducedModel, invariance_check, kraus_reduce, reduce_model
from .sde import SimConfig, generate_truth, run_filter, run_linear_filter, run_reduced_filter, run_zakai
from .experiments import reduce_pipeline, run_compare_experiment, run_stability_experiment

__version__ = "0.1.0"
