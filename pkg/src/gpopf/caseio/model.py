from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

from gpopf.domain.errors import CaseValidationError

BusType = Literal["slack", "PV", "PQ"]


@dataclass(frozen=True)
class Bus:
    id: int
    bus_type: BusType
    pd: float  # MW
    qd: float  # MVAr
    gs: float = 0.0  # MW at 1 pu
    bs: float = 0.0  # MVAr at 1 pu
    vmax: float = 1.1
    vmin: float = 0.9
    v0: float = 1.0
    theta0: float = 0.0  # rad
    base_kv: float = 0.0


@dataclass(frozen=True)
class Generator:
    bus: int
    pmax: float  # MW
    pmin: float
    qmax: float  # MVAr
    qmin: float
    status: bool = True
    is_renewable: bool = False
    pg0: float = 0.0
    qg0: float = 0.0
    vg: float = 1.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float  # pu
    x: float
    b: float
    rate_a: float = 0.0  # MVA, 0 = unlimited
    tap: float = 1.0
    shift: float = 0.0  # rad
    status: bool = True


@dataclass(frozen=True)
class GenCost:
    """Polynomial cost c2*p^2 + c1*p + c0 with p in MW, result in $/h."""

    c2: float
    c1: float
    c0: float
    startup: float = 0.0
    shutdown: float = 0.0

    def __call__(self, p_mw: float) -> float:
        return self.c2 * p_mw * p_mw + self.c1 * p_mw + self.c0


ZERO_COST = GenCost(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class NetworkCase:
    base_mva: float
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    branches: tuple[Branch, ...]
    costs: tuple[GenCost, ...]
    name: str = "case"
    _index: dict[int, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_index", {b.id: i for i, b in enumerate(self.buses)})
        validate_case(self)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    def bus_index(self, bus_id: int) -> int:
        try:
            return self._index[bus_id]
        except KeyError:
            raise CaseValidationError(f"unknown bus {bus_id}") from None

    def slack_index(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.bus_type == "slack")

    def load_bus_ids(self) -> tuple[int, ...]:
        """Buses with a nonzero active or reactive demand, in case order."""
        return tuple(b.id for b in self.buses if b.pd != 0.0 or b.qd != 0.0)

    def total_load(self) -> float:
        return sum(b.pd for b in self.buses)

    def with_buses(self, buses: tuple[Bus, ...]) -> NetworkCase:
        return replace(self, buses=buses)

    def with_generators(
        self, generators: tuple[Generator, ...], costs: tuple[GenCost, ...] | None = None
    ) -> NetworkCase:
        return replace(self, generators=generators, costs=self.costs if costs is None else costs)


def validate_case(case: NetworkCase) -> None:
    if not case.base_mva > 0:
        raise CaseValidationError(f"baseMVA must be positive, got {case.base_mva}")

    seen: set[int] = set()
    for i, b in enumerate(case.buses, start=1):
        if b.id in seen:
            raise CaseValidationError(f"duplicate bus id {b.id}", "bus", i)
        seen.add(b.id)
        if not b.vmin > 0:
            raise CaseValidationError(f"vmin must be positive at bus {b.id}", "bus", i)
        if not b.vmin <= b.v0 <= b.vmax:
            raise CaseValidationError(
                f"initial voltage {b.v0} outside [{b.vmin}, {b.vmax}] at bus {b.id}", "bus", i
            )

    slacks = [b.id for b in case.buses if b.bus_type == "slack"]
    if len(slacks) != 1:
        raise CaseValidationError(f"expected exactly one slack bus, found {len(slacks)}")

    for i, g in enumerate(case.generators, start=1):
        if g.bus not in seen:
            raise CaseValidationError(f"generator references undefined bus {g.bus}", "gen", i)
        if g.pmin > g.pmax:
            raise CaseValidationError(f"pmin > pmax at generator on bus {g.bus}", "gen", i)
        if g.qmin > g.qmax:
            raise CaseValidationError(f"qmin > qmax at generator on bus {g.bus}", "gen", i)

    for i, br in enumerate(case.branches, start=1):
        for end in (br.from_bus, br.to_bus):
            if end not in seen:
                raise CaseValidationError(f"branch references undefined bus {end}", "branch", i)
        if br.r == 0.0 and br.x == 0.0:
            raise CaseValidationError("branch has zero impedance", "branch", i)
        if not br.tap > 0:
            raise CaseValidationError(f"tap ratio must be positive, got {br.tap}", "branch", i)

    if len(case.costs) != len(case.generators):
        raise CaseValidationError(
            f"{len(case.costs)} cost rows for {len(case.generators)} generators"
        )
    for i, c in enumerate(case.costs, start=1):
        if c.c2 < 0:
            raise CaseValidationError("negative quadratic cost coefficient", "gencost", i)


def add_renewables(
    case: NetworkCase, buses: list[int] | tuple[int, ...], capacities: list[float] | tuple[float, ...]
) -> NetworkCase:
    """Attach one zero-cost renewable unit per bus (pmin = 0, no reactive capability)."""
    if len(buses) != len(capacities):
        raise CaseValidationError(f"{len(buses)} renewable buses but {len(capacities)} capacities")
    gens = list(case.generators)
    costs = list(case.costs)
    for bus_id, cap in zip(buses, capacities, strict=True):
        case.bus_index(bus_id)
        if cap < 0:
            raise CaseValidationError(f"negative renewable capacity at bus {bus_id}")
        gens.append(
            Generator(
                bus=bus_id, pmax=float(cap), pmin=0.0, qmax=0.0, qmin=0.0,
                status=True, is_renewable=True, pg0=float(cap), qg0=0.0, vg=1.0,
            )
        )
        costs.append(ZERO_COST)
    return case.with_generators(tuple(gens), tuple(costs))


def renewable_capacities(case: NetworkCase, n_units: int, penetration_pct: float) -> list[float]:
    """Equal split of penetration% of the total base-case load over n_units."""
    if n_units == 0:
        return []
    total = penetration_pct / 100.0 * case.total_load()
    return [total / n_units] * n_units


def penetration(case: NetworkCase) -> float:
    """Installed renewable capacity as a percentage of the base-case load."""
    cap = sum(g.pmax for g in case.generators if g.is_renewable and g.status)
    load = case.total_load()
    return 100.0 * cap / load if load else 0.0
