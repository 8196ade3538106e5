"""Hybrid (stochastic/continuous) simulation of sCCP models."""
from .lang import SccpProgram, SccpSyntaxError, SemanticError, load_program, parse_program
from .rts import ExtendedProgram, build_rts, prepare
from .tdsha import (KappaVector, Tdsha, bottom_family, compile_program, kappa_leq, quotient,
                    top_family)
from .dynamic import DynamicSetup, PartitionPolicy, population_size_policy, rate_policy
from .engine import SimConfig, Trajectory, simulate, simulate_ensemble

__all__ = [
    "SccpProgram", "SccpSyntaxError", "SemanticError", "load_program", "parse_program",
    "ExtendedProgram", "build_rts", "prepare",
    "KappaVector", "Tdsha", "bottom_family", "compile_program", "kappa_leq", "quotient", "top_family",
    "DynamicSetup", "PartitionPolicy", "population_size_policy", "rate_policy",
    "SimConfig", "Trajectory", "simulate", "simulate_ensemble",
]
__version__ = "0.1.0"
