from __future__ import annotations

import logging

import numpy as np

from gpopf.acopf.derivatives import dsbus_dv
from gpopf.acopf.solution import OpfSolution
from gpopf.caseio.admittance import admittance_matrix
from gpopf.caseio.model import NetworkCase
from gpopf.domain.errors import PowerFlowError
from gpopf.domain.models import OracleConfig

logger = logging.getLogger(__name__)


def _bus_roles(case: NetworkCase) -> tuple[int, np.ndarray, np.ndarray, dict[int, float]]:
    """(ref, pv, pq) bus indices and voltage setpoints of generator buses."""
    ref = case.slack_index()
    setpoint: dict[int, float] = {}
    for g in case.generators:
        if g.status and not g.is_renewable:
            setpoint.setdefault(case.bus_index(g.bus), g.vg)
    pv = [i for i, b in enumerate(case.buses) if b.bus_type == "PV" and i in setpoint]
    pq = [i for i in range(case.n_bus) if i != ref and i not in pv]
    return ref, np.asarray(pv, dtype=int), np.asarray(pq, dtype=int), setpoint


def _mismatch(V, Y, sbus, pv, pq) -> np.ndarray:
    mis = V * np.conj(Y @ V) - sbus
    return np.r_[mis[pv].real, mis[pq].real, mis[pq].imag]


def solve_power_flow(case: NetworkCase, cfg: OracleConfig | None = None) -> OpfSolution:
    """Newton-Raphson power flow with generator dispatch fixed at pg0; the slack bus absorbs mismatch.

    Raises PowerFlowError on a singular Jacobian or when max_iter is reached with
    the mismatch still above cfg.tol.
    """
    cfg = cfg or OracleConfig()
    base = case.base_mva
    Y = admittance_matrix(case)
    ref, pv, pq, setpoint = _bus_roles(case)

    sg = np.zeros(case.n_bus, dtype=complex)
    for g in case.generators:
        if g.status:
            sg[case.bus_index(g.bus)] += g.pg0 + 1j * g.qg0
    sd = np.asarray([b.pd + 1j * b.qd for b in case.buses])
    sbus = (sg - sd) / base

    if cfg.flat_start:
        vm = np.ones(case.n_bus)
        va = np.zeros(case.n_bus)
    else:
        vm = np.asarray([b.v0 for b in case.buses], dtype=float)
        va = np.asarray([b.theta0 for b in case.buses], dtype=float)
    for i in [ref, *pv]:
        vm[i] = setpoint.get(i, vm[i])
    V = vm * np.exp(1j * va)

    pvpq = np.r_[pv, pq]
    npv, npq = len(pv), len(pq)

    F = _mismatch(V, Y, sbus, pv, pq)
    error = float(np.max(np.abs(F))) if F.size else 0.0
    it = 0
    while error > cfg.tol and it < cfg.max_iter:
        it += 1
        ds_dva, ds_dvm = dsbus_dv(Y, V)
        J = np.block(
            [
                [ds_dva[np.ix_(pvpq, pvpq)].real, ds_dvm[np.ix_(pvpq, pq)].real],
                [ds_dva[np.ix_(pq, pvpq)].imag, ds_dvm[np.ix_(pq, pq)].imag],
            ]
        )
        try:
            dx = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            raise PowerFlowError("singular Jacobian", error, it) from None

        va[pvpq] -= dx[: npv + npq]
        vm[pq] -= dx[npv + npq :]
        V = vm * np.exp(1j * va)
        vm, va = np.abs(V), np.angle(V)

        F = _mismatch(V, Y, sbus, pv, pq)
        error = float(np.max(np.abs(F)))
        if not np.isfinite(error):
            raise PowerFlowError("Newton iteration diverged", error, it)
        logger.debug("power flow iter %d: max mismatch %.3e", it, error)

    if error > cfg.tol:
        raise PowerFlowError("power flow did not converge", error, it)

    pg, qg = _dispatch_from_injections(case, V, Y, ref, pv)
    cost = sum(c(p) for g, c, p in zip(case.generators, case.costs, pg, strict=True) if g.status)
    return OpfSolution(
        cost=float(cost),
        pg=pg,
        qg=qg,
        vm=np.abs(V),
        va=np.angle(V),
        converged=True,
        iterations=it,
        status="power_flow",
        mismatch=error,
    )


def _dispatch_from_injections(case, V, Y, ref, pv) -> tuple[np.ndarray, np.ndarray]:
    """Generator outputs implied by the solved voltages: slack takes the P balance, PV/slack units share Q."""
    base = case.base_mva
    s = V * np.conj(Y @ V) * base
    pg = np.asarray([g.pg0 if g.status else 0.0 for g in case.generators], dtype=float)
    qg = np.asarray([g.qg0 if g.status else 0.0 for g in case.generators], dtype=float)

    def units_at(i: int) -> list[int]:
        return [
            k for k, g in enumerate(case.generators)
            if g.status and not g.is_renewable and case.bus_index(g.bus) == i
        ]

    bus = case.buses[ref]
    slack_units = units_at(ref)
    if slack_units:
        others = sum(
            pg[k] for k, g in enumerate(case.generators)
            if g.status and case.bus_index(g.bus) == ref and k != slack_units[0]
        )
        pg[slack_units[0]] = s[ref].real + bus.pd - others

    for i in [ref, *pv]:
        units = units_at(i)
        if not units:
            continue
        fixed = sum(
            qg[k] for k, g in enumerate(case.generators)
            if g.status and case.bus_index(g.bus) == i and k not in units
        )
        share = (s[i].imag + case.buses[i].qd - fixed) / len(units)
        for k in units:
            qg[k] = share
    return pg, qg
