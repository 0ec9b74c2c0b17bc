from __future__ import annotations

import math

from gpopf.caseio.model import NetworkCase

_TYPE_CODES = {"PQ": 1, "PV": 2, "slack": 3}


def _num(x: float) -> str:
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _degrees_exact(rad: float) -> float:
    """Degree value that math.radians maps back onto `rad` bit for bit."""
    deg = math.degrees(rad)
    candidate = deg
    for _ in range(8):
        if math.radians(candidate) == rad:
            return candidate
        candidate = math.nextafter(candidate, math.inf if math.radians(candidate) < rad else -math.inf)
    return deg


def _table(name: str, header: str, rows: list[list[float]]) -> list[str]:
    out = [f"%% {header}", f"mpc.{name} = ["]
    out.extend("\t" + "\t".join(_num(v) for v in row) + ";" for row in rows)
    out.append("];")
    out.append("")
    return out


def format_case(case: NetworkCase) -> str:
    """Serialize a NetworkCase as MATPOWER version 2 case text."""
    lines = [
        f"function mpc = {case.name}",
        "mpc.version = '2';",
        "",
        f"mpc.baseMVA = {_num(case.base_mva)};",
        "",
    ]
    lines += _table(
        "bus",
        "bus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
        [
            [b.id, _TYPE_CODES[b.bus_type], b.pd, b.qd, b.gs, b.bs, 1, b.v0,
             _degrees_exact(b.theta0), b.base_kv, 1, b.vmax, b.vmin]
            for b in case.buses
        ],
    )
    lines += _table(
        "gen",
        "bus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin",
        [
            [g.bus, g.pg0, g.qg0, g.qmax, g.qmin, g.vg, case.base_mva, int(g.status), g.pmax, g.pmin]
            for g in case.generators
        ],
    )
    lines += _table(
        "branch",
        "fbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
        [
            [br.from_bus, br.to_bus, br.r, br.x, br.b, br.rate_a, br.rate_a, br.rate_a,
             br.tap, _degrees_exact(br.shift), int(br.status), -360, 360]
            for br in case.branches
        ],
    )
    lines += _table(
        "gencost",
        "2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0",
        [[2, c.startup, c.shutdown, 3, c.c2, c.c1, c.c0] for c in case.costs],
    )
    return "\n".join(lines)
