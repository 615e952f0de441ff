"""Identification of concentric layered cylinders from multifrequency
boundary data: series forward solver, best-fit objective, derivative-free
local search with layer reduction, and multilevel single-linkage search."""

from .forward import BoundaryField, LayerConfig, field_on_S, sanitize, solve_modes
from .globalmin import MslmParams, critical_distance, mslm_run, reduced_random_search, stopping
from .localmin import LocalMinResult, SearchSpace, basic_local_min, lmm, reduce
from .objective import (AdmissibleSet, ObjectiveSpec, ProbeSet, ScatterDataset, epsilon_err,
                        phi, synthesize)
from .specfun import bessel_jy, hankel1

__version__ = "0.1.0"

__all__ = [
    "AdmissibleSet", "BoundaryField", "LayerConfig", "LocalMinResult", "MslmParams",
    "ObjectiveSpec", "ProbeSet", "ScatterDataset", "SearchSpace", "basic_local_min",
    "bessel_jy", "critical_distance", "epsilon_err", "field_on_S", "hankel1", "lmm",
    "mslm_run", "phi", "reduce", "reduced_random_search", "sanitize", "solve_modes",
    "stopping", "synthesize",
]
