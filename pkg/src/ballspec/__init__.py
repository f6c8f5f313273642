"""Spectral eigenbases of grad div and curl in a ball, Helmholtz decomposition and BVP solver."""

from .bvp import BvpSolution, Resonance, apply_forward, operator_power, solve, stability_report
from .decomposition import (
    SpectralCoeffs,
    analyze,
    build_tables,
    neumann_potential,
    parseval_report,
    synthesize,
    synthesize_potential,
    synthesize_solenoidal,
)
from .eigenbasis import (
    EigenEntry,
    EigenTable,
    MultiIndex,
    build_eigentable,
    curl_eigenfunction,
    grad_div_eigenfunction,
    neumann_scalar_eigenfunction,
)
from .fieldgrid import BallGrid, ScalarField, VectorField, inner_product
from .sobolev import SobolevReport, efs_norms, membership_test, weighted_norm
from .specialfn import ZeroTable, find_zeros, psi, sph_harm, sph_harm_H

__version__ = "0.1.0"

__all__ = [
    "BallGrid",
    "BvpSolution",
    "EigenEntry",
    "EigenTable",
    "MultiIndex",
    "Resonance",
    "ScalarField",
    "SobolevReport",
    "SpectralCoeffs",
    "VectorField",
    "ZeroTable",
    "analyze",
    "apply_forward",
    "build_eigentable",
    "build_tables",
    "curl_eigenfunction",
    "efs_norms",
    "find_zeros",
    "grad_div_eigenfunction",
    "inner_product",
    "membership_test",
    "neumann_potential",
    "neumann_scalar_eigenfunction",
    "operator_power",
    "parseval_report",
    "psi",
    "solve",
    "sph_harm",
    "sph_harm_H",
    "stability_report",
    "synthesize",
    "synthesize_potential",
    "synthesize_solenoidal",
    "weighted_norm",
]
