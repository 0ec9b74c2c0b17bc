from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from gpopf.acopf.inputs import apply_input
from gpopf.acopf.opf import solve_opf
from gpopf.acopf.solution import OpfSolution
from gpopf.caseio.model import NetworkCase
from gpopf.domain.errors import GpopfError, OracleError
from gpopf.domain.models import OracleConfig
from gpopf.orchestrator.parallel import ordered_map
from gpopf.popf.uncertainty import UncertaintySpec

logger = logging.getLogger(__name__)


def _solve_one(
    case: NetworkCase,
    x: np.ndarray,
    renewable_buses: tuple[int, ...],
    load_buses: tuple[int, ...],
    oracle: OracleConfig,
) -> OpfSolution | str:
    # errors travel back as text; custom exception signatures do not survive pickling
    try:
        return solve_opf(apply_input(case, x, renewable_buses, load_buses), oracle)
    except (GpopfError, np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
        return f"{type(exc).__name__}: {exc}"


def solve_inputs(
    case: NetworkCase,
    spec: UncertaintySpec,
    X: np.ndarray,
    oracle: OracleConfig,
    jobs: int = 1,
    offset: int = 0,
) -> list[OpfSolution]:
    """One OPF per row of X, in row order. Solver failures raise OracleError with the row index."""
    rb, lb = spec.renewable_buses, spec.load_buses
    results = ordered_map(_solve_one, ((case, x, rb, lb, oracle) for x in X), jobs=jobs)
    for i, res in enumerate(results):
        if isinstance(res, str):
            raise OracleError(res, offset + i)
    return results  # type: ignore[return-value]


def output_matrix(solutions: Sequence[OpfSolution]) -> tuple[np.ndarray, np.ndarray]:
    """(Y, converged) with NaN rows for non-converged solves."""
    ok = np.array([s.converged for s in solutions], dtype=bool)
    Y = np.vstack([s.outputs() for s in solutions])
    Y[~ok] = np.nan
    return Y, ok
