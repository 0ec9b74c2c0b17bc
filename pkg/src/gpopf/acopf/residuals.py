from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from gpopf.acopf.solution import OpfSolution
from gpopf.caseio.model import NetworkCase


@dataclass(frozen=True)
class SolutionCheck:
    max_mismatch: float  # pu
    max_bound_violation: float  # fraction of the variable's range (absolute pu for fixed variables)
    max_flow_violation: float  # pu of apparent power above rate_a
    complementarity: float
    ok: bool


def _branch_flows(case: NetworkCase, vm: np.ndarray, va: np.ndarray) -> list[tuple[int, int, complex, complex]]:
    """From/to-end complex flows of each in-service branch, evaluated element by element."""
    out = []
    for br in case.branches:
        if not br.status:
            continue
        i, j = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
        vi = cmath.rect(vm[i], va[i])
        vj = cmath.rect(vm[j], va[j])
        ys = 1.0 / complex(br.r, br.x)
        a = cmath.rect(br.tap, br.shift)
        i_from = (ys + 0.5j * br.b) / (abs(a) ** 2) * vi - ys / a.conjugate() * vj
        i_to = -ys / a * vi + (ys + 0.5j * br.b) * vj
        out.append((i, j, vi * i_from.conjugate(), vj * i_to.conjugate()))
    return out


def _dc_injections(case: NetworkCase, va: np.ndarray) -> np.ndarray:
    p = np.zeros(case.n_bus)
    for br in case.branches:
        if not br.status:
            continue
        i, j = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
        flow = (va[i] - va[j] - br.shift) / (br.x * br.tap)
        p[i] += flow
        p[j] -= flow
    return p


def check_solution(
    case: NetworkCase, sol: OpfSolution, tol: float = 1e-8, opt_tol: float = 1e-6
) -> SolutionCheck:
    """Re-evaluate power balance, bounds and branch limits of a solution from branch flows.

    Flows come from per-branch pi-model currents, not from the admittance matrix.
    """
    base = case.base_mva
    net = np.zeros(case.n_bus, dtype=complex)
    for k, g in enumerate(case.generators):
        if g.status:
            net[case.bus_index(g.bus)] += complex(sol.pg[k], sol.qg[k]) / base
    for i, b in enumerate(case.buses):
        net[i] -= complex(b.pd, b.qd) / base

    flow_violation = 0.0
    if sol.mode == "dc":
        mismatch = np.abs(net.real - _dc_injections(case, sol.va) - np.asarray([b.gs for b in case.buses]) / base)
    else:
        injected = np.zeros(case.n_bus, dtype=complex)
        live = [br for br in case.branches if br.status]
        for br, (i, j, sf, st) in zip(live, _branch_flows(case, sol.vm, sol.va), strict=True):
            injected[i] += sf
            injected[j] += st
            if br.rate_a > 0:
                limit = br.rate_a / base
                flow_violation = max(flow_violation, abs(sf) - limit, abs(st) - limit)
        for i, b in enumerate(case.buses):
            injected[i] += complex(b.gs, -b.bs) / base * sol.vm[i] ** 2
        mismatch = np.abs(np.r_[(net - injected).real, (net - injected).imag])

    bound = 0.0

    def _bound(value: float, lo: float, hi: float) -> None:
        nonlocal bound
        width = hi - lo
        over = max(lo - value, value - hi, 0.0)
        bound = max(bound, over / width if width > 0 else over)

    for k, g in enumerate(case.generators):
        if not g.status:
            continue
        _bound(sol.pg[k] / base, g.pmin / base, g.pmax / base)
        if sol.mode == "ac":
            _bound(sol.qg[k] / base, g.qmin / base, g.qmax / base)
    if sol.mode == "ac":
        for i, b in enumerate(case.buses):
            _bound(sol.vm[i], b.vmin, b.vmax)

    max_mismatch = float(np.max(mismatch)) if mismatch.size else 0.0
    comp = sol.compcond if math.isfinite(sol.compcond) else 0.0
    ok = (
        max_mismatch <= tol
        and bound <= opt_tol
        and flow_violation <= opt_tol
        and comp <= opt_tol
    )
    return SolutionCheck(
        max_mismatch=max_mismatch,
        max_bound_violation=bound,
        max_flow_violation=max(flow_violation, 0.0),
        complementarity=comp,
        ok=ok,
    )
