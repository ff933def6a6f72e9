"""Repair of infeasible, unbounded or pathological parametrized cone programs."""

from __future__ import annotations

from .cones import ConeProjector, cone_violation, in_cone, project_cone, project_dual_cone, project_soc
from .embedding import EmbeddingWitness, build_embedding, data_gradients, eval_tstar, grad_tstar, solve_embedding
from .errors import (
    ConeRepairError,
    DegenerateGradientError,
    EpsilonInfeasibleError,
    InvalidArgumentError,
    NumericalError,
    ParseError,
    UnsupportedCompositionError,
    UnsupportedProblemError,
)
from .fileformat import dumps, loads, parse_problem, serialize
from .problem import ConeBlock, ConeDescriptor, ConeKind, ParamConeProgram, ParamIncrement, make_program, materialize
from .regularizers import Box, ScaledL1, ScaledL2Sq, Sum, evaluate, prox, relative_l1
from .repair import (
    RepairResult,
    RepairSettings,
    RepairStatus,
    exact_repair_affine,
    interior_schedule,
    repair,
    replay,
)
from .solver import Solution, SolverSettings, Status, check_solution, residuals, solve
from .sparse import SparseMatrix

__version__ = "0.1.0"

__all__ = [
    "Box",
    "ConeBlock",
    "ConeDescriptor",
    "ConeKind",
    "ConeProjector",
    "ConeRepairError",
    "DegenerateGradientError",
    "EmbeddingWitness",
    "EpsilonInfeasibleError",
    "InvalidArgumentError",
    "NumericalError",
    "ParamConeProgram",
    "ParamIncrement",
    "ParseError",
    "RepairResult",
    "RepairSettings",
    "RepairStatus",
    "ScaledL1",
    "ScaledL2Sq",
    "Solution",
    "SolverSettings",
    "SparseMatrix",
    "Status",
    "Sum",
    "UnsupportedCompositionError",
    "UnsupportedProblemError",
    "build_embedding",
    "check_solution",
    "cone_violation",
    "data_gradients",
    "dumps",
    "eval_tstar",
    "evaluate",
    "exact_repair_affine",
    "grad_tstar",
    "in_cone",
    "interior_schedule",
    "loads",
    "make_program",
    "materialize",
    "parse_problem",
    "project_cone",
    "project_dual_cone",
    "project_soc",
    "prox",
    "relative_l1",
    "repair",
    "replay",
    "residuals",
    "serialize",
    "solve",
    "solve_embedding",
]
