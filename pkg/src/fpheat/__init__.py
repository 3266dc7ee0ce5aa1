"""Desk-scale laboratory for the parabolic fractional p-Laplace equation."""

from .core import (
    AnalyticTail,
    ConstantExtension,
    FracParams,
    GridField,
    ParabolicCylinder,
    ParameterError,
    SpaceTimeField,
    TailError,
    UniformGrid,
    ChordAudit,
    chord_integral,
    chord_sandwich_audit,
    ZeroExtension,
    gagliardo_seminorm,
    j_p,
    make_params,
    tail_norm,
)
from .operator import NodeOperator, QuadConfig, energy_form, frac_p_laplacian_grid, frac_p_laplacian_point, pv_local_bound
from .quadrature import Estimate

__version__ = "0.1.0"
