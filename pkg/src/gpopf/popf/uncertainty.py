from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gpopf.acopf.inputs import InputVector
from gpopf.caseio.model import NetworkCase
from gpopf.domain.errors import InputDimensionError


@dataclass(frozen=True, eq=False)
class UncertaintySpec:
    """Box [x_lower, x_upper] over x = [p_r, p_d, q_d] (MW / MVAr) around the base case."""

    renewable_buses: tuple[int, ...]
    load_buses: tuple[int, ...]
    x_base: np.ndarray
    x_lower: np.ndarray
    x_upper: np.ndarray
    load_fraction: float
    renewable_fraction: float

    def __post_init__(self) -> None:
        n = len(self.renewable_buses) + 2 * len(self.load_buses)
        for name in ("x_base", "x_lower", "x_upper"):
            if np.asarray(getattr(self, name)).shape != (n,):
                raise InputDimensionError(f"{name} must have {n} entries")
        if np.any(self.x_lower > self.x_upper):
            raise InputDimensionError("x_lower must not exceed x_upper")

    @property
    def n(self) -> int:
        return self.x_base.shape[0]

    @property
    def n_renewable(self) -> int:
        return len(self.renewable_buses)

    @property
    def n_load(self) -> int:
        return len(self.load_buses)

    @property
    def renewable_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[: self.n_renewable] = True
        return mask

    def labels(self) -> list[str]:
        return (
            [f"pr@{b}" for b in self.renewable_buses]
            + [f"pd@{b}" for b in self.load_buses]
            + [f"qd@{b}" for b in self.load_buses]
        )

    def contains(self, X: np.ndarray, atol: float = 1e-9) -> bool:
        X = np.atleast_2d(X)
        span = np.maximum(np.abs(self.x_lower), np.abs(self.x_upper))
        tol = atol * np.maximum(span, 1.0)
        return bool(np.all(X >= self.x_lower - tol) and np.all(X <= self.x_upper + tol))


def _around(base: np.ndarray, fraction: float) -> tuple[np.ndarray, np.ndarray]:
    a = base * (1.0 - fraction)
    b = base * (1.0 + fraction)
    return np.minimum(a, b), np.maximum(a, b)


def build_uncertainty(
    case: NetworkCase,
    renewable_buses: Sequence[int],
    load_fraction: float,
    renewable_fraction: float,
    load_buses: Sequence[int] | None = None,
) -> UncertaintySpec:
    """Box bounds from the base case: loads at base*(1 +- f_load), renewables in [cap*(1 - f_ren), cap]."""
    if not 0.0 <= load_fraction <= 1.0 or not 0.0 <= renewable_fraction <= 1.0:
        raise InputDimensionError("uncertainty fractions must lie in [0, 1]")
    renewable_buses = tuple(renewable_buses)
    load_buses = tuple(case.load_bus_ids() if load_buses is None else load_buses)
    base = InputVector.from_case(case, renewable_buses, load_buses)

    r_lo = base.p_r * (1.0 - renewable_fraction)
    r_hi = base.p_r.copy()
    pd_lo, pd_hi = _around(base.p_d, load_fraction)
    qd_lo, qd_hi = _around(base.q_d, load_fraction)

    return UncertaintySpec(
        renewable_buses=renewable_buses,
        load_buses=load_buses,
        x_base=base.as_array(),
        x_lower=np.concatenate([r_lo, pd_lo, qd_lo]),
        x_upper=np.concatenate([r_hi, pd_hi, qd_hi]),
        load_fraction=float(load_fraction),
        renewable_fraction=float(renewable_fraction),
    )
