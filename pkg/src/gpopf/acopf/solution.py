from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

SolveStatus = Literal["converged", "max_iter", "numerically_failed", "diverged", "infeasible", "power_flow"]


@dataclass(frozen=True, eq=False)
class OpfSolution:
    cost: float  # $/h
    pg: np.ndarray  # MW, case generator order; 0 for out-of-service units
    qg: np.ndarray  # MVAr
    vm: np.ndarray  # pu, case bus order
    va: np.ndarray  # rad
    converged: bool
    iterations: int
    status: SolveStatus = "converged"
    mode: Literal["ac", "dc"] = "ac"
    mismatch: float = math.nan  # max |power balance residual|, pu
    feascond: float = math.nan
    gradcond: float = math.nan
    compcond: float = math.nan
    costcond: float = math.nan
    lam_p: np.ndarray = field(default_factory=lambda: np.zeros(0))  # $/MWh per bus

    def outputs(self) -> np.ndarray:
        """Learned output row: [cost, pg..., qg..., vm...]."""
        return np.concatenate([[self.cost], self.pg, self.qg, self.vm])
