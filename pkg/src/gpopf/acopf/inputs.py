from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from gpopf.caseio.model import NetworkCase
from gpopf.domain.errors import InputDimensionError


@dataclass(frozen=True, eq=False)
class InputVector:
    """Uncertain inputs, laid out as [p_r, p_d, q_d] when flattened."""

    p_r: np.ndarray  # MW per renewable bus
    p_d: np.ndarray  # MW per load bus
    q_d: np.ndarray  # MVAr per load bus

    @property
    def n(self) -> int:
        return len(self.p_r) + len(self.p_d) + len(self.q_d)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.p_r, self.p_d, self.q_d]).astype(float)

    @classmethod
    def from_array(cls, x: Sequence[float] | np.ndarray, n_renewable: int, n_load: int) -> InputVector:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != n_renewable + 2 * n_load:
            raise InputDimensionError(
                f"input vector has {x.shape[0]} entries, expected {n_renewable} + 2*{n_load}"
            )
        return cls(
            p_r=x[:n_renewable].copy(),
            p_d=x[n_renewable : n_renewable + n_load].copy(),
            q_d=x[n_renewable + n_load :].copy(),
        )

    @classmethod
    def from_case(
        cls, case: NetworkCase, renewable_buses: Sequence[int], load_buses: Sequence[int]
    ) -> InputVector:
        """The base-case realization: renewable capacities and nominal demands."""
        caps = [_renewable_generator(case, b)[1].pmax for b in renewable_buses]
        buses = [case.buses[case.bus_index(b)] for b in load_buses]
        return cls(
            p_r=np.asarray(caps, dtype=float),
            p_d=np.asarray([b.pd for b in buses], dtype=float),
            q_d=np.asarray([b.qd for b in buses], dtype=float),
        )


def _renewable_generator(case: NetworkCase, bus_id: int):
    for k, g in enumerate(case.generators):
        if g.bus == bus_id and g.is_renewable:
            return k, g
    raise InputDimensionError(f"no renewable generator attached at bus {bus_id}")


def apply_input(
    case: NetworkCase,
    x: InputVector | Sequence[float] | np.ndarray,
    renewable_buses: Sequence[int],
    load_buses: Sequence[int] | None = None,
) -> NetworkCase:
    """Overwrite load-bus demands and renewable availability with one realization of x.

    Renewable units get pmax = pg0 = p_r and pmin = 0; conventional units are left as they are.
    """
    if load_buses is None:
        load_buses = case.load_bus_ids()
    if not isinstance(x, InputVector):
        x = InputVector.from_array(x, len(renewable_buses), len(load_buses))
    if len(x.p_r) != len(renewable_buses):
        raise InputDimensionError(f"{len(x.p_r)} renewable values for {len(renewable_buses)} renewable buses")
    if len(x.p_d) != len(load_buses) or len(x.q_d) != len(load_buses):
        raise InputDimensionError(
            f"{len(x.p_d)}/{len(x.q_d)} demand values for {len(load_buses)} load buses"
        )
    if np.any(x.p_r < 0):
        raise InputDimensionError("renewable injections must be nonnegative")

    buses = list(case.buses)
    for bus_id, pd, qd in zip(load_buses, x.p_d, x.q_d, strict=True):
        i = case.bus_index(bus_id)
        buses[i] = replace(buses[i], pd=float(pd), qd=float(qd))

    gens = list(case.generators)
    for bus_id, pr in zip(renewable_buses, x.p_r, strict=True):
        k, g = _renewable_generator(case, bus_id)
        gens[k] = replace(g, pmax=float(pr), pmin=0.0, pg0=float(pr))

    return replace(case, buses=tuple(buses), generators=tuple(gens))
