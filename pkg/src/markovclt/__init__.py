"""Diagnostics for the central limit theorem of stationary finite Markov chains."""

from .chain import ChainModel, build_chain, classify, load_chain_spec, parse_chain_spec
from .config import DEFAULT_CAPS, DEFAULT_TOLERANCES, ResourceCaps, Tolerances
from .diagnostics import condition_report, conditional_norms
from .operators import build_table
from .simulate import clt_test, simulate
from .variance import dyadic_recursion, exact_variance, sigma2_closed_form, variance_profile

__version__ = "0.1.0"

__all__ = [
    "ChainModel",
    "DEFAULT_CAPS",
    "DEFAULT_TOLERANCES",
    "ResourceCaps",
    "Tolerances",
    "build_chain",
    "build_table",
    "classify",
    "clt_test",
    "condition_report",
    "conditional_norms",
    "dyadic_recursion",
    "exact_variance",
    "load_chain_spec",
    "parse_chain_spec",
    "sigma2_closed_form",
    "simulate",
    "variance_profile",
]
