from __future__ import annotations

import logging
import threading

import numpy as np

from gpopf.acopf.derivatives import (
    d2abr_dv2,
    d2sbus_dv2,
    dabr_dv,
    dsbr_dv,
    dsbus_dv,
)
from gpopf.acopf.ipm import IpmOptions, IpmProblem, IpmResult, interior_point
from gpopf.acopf.powerflow import solve_power_flow
from gpopf.acopf.solution import OpfSolution
from gpopf.caseio.admittance import admittance_matrix, branch_admittances, connection_matrices
from gpopf.caseio.model import NetworkCase
from gpopf.domain.errors import PowerFlowError
from gpopf.domain.models import OracleConfig

logger = logging.getLogger(__name__)

AC_COST_MULT = 1e-4


class _CallCounter:
    """Process-wide count of OPF oracle invocations."""

    def __init__(self) -> None:
        self._n = 0
        self._lock = threading.Lock()

    def increment(self) -> None:
        with self._lock:
            self._n += 1

    @property
    def value(self) -> int:
        return self._n

    def reset(self) -> None:
        with self._lock:
            self._n = 0


ORACLE_CALLS = _CallCounter()


class _Layout:
    """Variable layout and constant data shared by the AC and DC formulations."""

    def __init__(self, case: NetworkCase) -> None:
        self.case = case
        self.base = case.base_mva
        self.nb = case.n_bus
        self.ref = case.slack_index()
        self.on = np.asarray([k for k, g in enumerate(case.generators) if g.status], dtype=int)
        self.ng = len(self.on)
        gbus = [case.bus_index(case.generators[k].bus) for k in self.on]
        self.cg = np.zeros((self.nb, self.ng))
        self.cg[gbus, np.arange(self.ng)] = 1.0

        gens = [case.generators[k] for k in self.on]
        costs = [case.costs[k] for k in self.on]
        self.c2 = np.asarray([c.c2 for c in costs], dtype=float)
        self.c1 = np.asarray([c.c1 for c in costs], dtype=float)
        self.c0 = np.asarray([c.c0 for c in costs], dtype=float)
        self.pmin = np.asarray([g.pmin for g in gens], dtype=float) / self.base
        self.pmax = np.asarray([g.pmax for g in gens], dtype=float) / self.base
        self.qmin = np.asarray([g.qmin for g in gens], dtype=float) / self.base
        self.qmax = np.asarray([g.qmax for g in gens], dtype=float) / self.base

        self.pd = np.asarray([b.pd for b in case.buses], dtype=float) / self.base
        self.qd = np.asarray([b.qd for b in case.buses], dtype=float) / self.base
        self.gs = np.asarray([b.gs for b in case.buses], dtype=float) / self.base
        self.vmin = np.asarray([b.vmin for b in case.buses], dtype=float)
        self.vmax = np.asarray([b.vmax for b in case.buses], dtype=float)
        self.theta_ref = case.buses[self.ref].theta0

    def cost(self, pg_pu: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        p = pg_pu * self.base
        f = float(np.sum(self.c2 * p * p + self.c1 * p + self.c0))
        df = (2.0 * self.c2 * p + self.c1) * self.base
        d2f = np.diag(2.0 * self.c2 * self.base * self.base)
        return f, df, d2f

    def scatter(self, values: np.ndarray) -> np.ndarray:
        """Expand in-service generator values to case generator order (MW/MVAr)."""
        out = np.zeros(self.case.n_gen)
        out[self.on] = values * self.base
        return out


def solve_opf(case: NetworkCase, cfg: OracleConfig | None = None) -> OpfSolution:
    """Minimum-cost dispatch of `case` in the configured mode (ac_ipm or dc_qp).

    Non-convergence is reported through OpfSolution.converged / status, not raised.
    """
    cfg = cfg or OracleConfig()
    ORACLE_CALLS.increment()
    if cfg.mode == "dc_qp":
        sol = _solve_dc(case, cfg)
    else:
        sol = _solve_ac(case, cfg)
    if not sol.converged:
        logger.debug("OPF %s not converged: status=%s after %d iterations", case.name, sol.status, sol.iterations)
    return sol


def _ipm_options(cfg: OracleConfig, cost_mult: float) -> IpmOptions:
    return IpmOptions(
        feastol=cfg.opt_tol,
        gradtol=cfg.opt_tol,
        comptol=cfg.opt_tol,
        costtol=cfg.opt_tol,
        eqtol=cfg.tol,
        max_iter=cfg.max_iter,
        cost_mult=cost_mult,
    )


def _solve_ac(case: NetworkCase, cfg: OracleConfig) -> OpfSolution:
    lay = _Layout(case)
    nb, ng = lay.nb, lay.ng
    Y = admittance_matrix(case)
    br = branch_admittances(case)
    cf, ct = connection_matrices(case, br)
    lim = np.flatnonzero(br.rate > 0)
    yf, yt, cfl, ctl = br.yf[lim], br.yt[lim], cf[lim], ct[lim]
    rate2 = br.rate[lim] ** 2
    nl = len(lim)
    sd = lay.pd + 1j * lay.qd

    iva = slice(0, nb)
    ivm = slice(nb, 2 * nb)
    ipg = slice(2 * nb, 2 * nb + ng)
    iqg = slice(2 * nb + ng, 2 * nb + 2 * ng)
    nx = 2 * nb + 2 * ng

    def voltage(x: np.ndarray) -> np.ndarray:
        return x[ivm] * np.exp(1j * x[iva])

    def f(x: np.ndarray):
        c, dc, d2c = lay.cost(x[ipg])
        df = np.zeros(nx)
        df[ipg] = dc
        d2f = np.zeros((nx, nx))
        d2f[ipg, ipg] = d2c
        return c, df, d2f

    def gh(x: np.ndarray):
        V = voltage(x)
        mis = V * np.conj(Y @ V) + sd - lay.cg @ (x[ipg] + 1j * x[iqg])
        g = np.r_[mis.real, mis.imag]
        ds_dva, ds_dvm = dsbus_dv(Y, V)
        dg = np.zeros((2 * nb, nx))
        dg[:nb, iva], dg[:nb, ivm], dg[:nb, ipg] = ds_dva.real, ds_dvm.real, -lay.cg
        dg[nb:, iva], dg[nb:, ivm], dg[nb:, iqg] = ds_dva.imag, ds_dvm.imag, -lay.cg

        dh = np.zeros((2 * nl, nx))
        if nl:
            dfa, dfm, sf = dsbr_dv(yf, cfl, V)
            dta, dtm, st = dsbr_dv(yt, ctl, V)
            h = np.r_[np.abs(sf) ** 2 - rate2, np.abs(st) ** 2 - rate2]
            dh[:nl, iva], dh[:nl, ivm] = dabr_dv(dfa, dfm, sf)
            dh[nl:, iva], dh[nl:, ivm] = dabr_dv(dta, dtm, st)
        else:
            h = np.zeros(0)
        return h, g, dh, dg

    def hess(x: np.ndarray, lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
        V = voltage(x)
        paa, pav, pva, pvv = d2sbus_dv2(Y, V, lam[:nb].astype(complex))
        qaa, qav, qva, qvv = d2sbus_dv2(Y, V, lam[nb:].astype(complex))
        hv = np.real(np.block([[paa, pav], [pva, pvv]])) + np.imag(np.block([[qaa, qav], [qva, qvv]]))
        if nl:
            dfa, dfm, sf = dsbr_dv(yf, cfl, V)
            dta, dtm, st = dsbr_dv(yt, ctl, V)
            hv = hv + d2abr_dv2(dfa, dfm, sf, cfl, yf, V, mu[:nl].astype(complex))
            hv = hv + d2abr_dv2(dta, dtm, st, ctl, yt, V, mu[nl:].astype(complex))
        H = np.zeros((nx, nx))
        H[: 2 * nb, : 2 * nb] = hv
        return H

    xmin = np.r_[np.full(nb, -np.inf), lay.vmin, lay.pmin, lay.qmin]
    xmax = np.r_[np.full(nb, np.inf), lay.vmax, lay.pmax, lay.qmax]
    xmin[lay.ref] = xmax[lay.ref] = lay.theta_ref

    x0 = _ac_start(case, cfg, lay, xmin, xmax)
    res = interior_point(
        IpmProblem(f=f, x0=x0, xmin=xmin, xmax=xmax, gh=gh, hess=hess),
        _ipm_options(cfg, AC_COST_MULT),
    )

    x = res.x
    V = voltage(x)
    mis = V * np.conj(Y @ V) + sd - lay.cg @ (x[ipg] + 1j * x[iqg])
    return _solution(res, lay, pg=x[ipg], qg=x[iqg], vm=x[ivm], va=x[iva], mismatch=_max_abs(mis), mode="ac")


def _ac_start(case: NetworkCase, cfg: OracleConfig, lay: _Layout, xmin: np.ndarray, xmax: np.ndarray) -> np.ndarray:
    """Warm start from a power flow; fall back to the bound midpoints with the reference angle."""
    nb = lay.nb
    try:
        pf = solve_power_flow(case, cfg)
        x0 = np.r_[pf.va, pf.vm, pf.pg[lay.on] / lay.base, pf.qg[lay.on] / lay.base]
    except PowerFlowError as exc:
        logger.debug("warm-start power flow failed (%s); starting from bound midpoints", exc)
        lo = np.where(np.isfinite(xmin), xmin, -1e10)
        hi = np.where(np.isfinite(xmax), xmax, 1e10)
        x0 = (lo + hi) / 2.0
        x0[:nb] = lay.theta_ref
    x0[lay.ref] = lay.theta_ref
    fin = np.isfinite(xmin) & np.isfinite(xmax)
    x0[fin] = np.clip(x0[fin], xmin[fin], xmax[fin])
    return x0


def _solve_dc(case: NetworkCase, cfg: OracleConfig) -> OpfSolution:
    lay = _Layout(case)
    nb, ng = lay.nb, lay.ng
    br = branch_admittances(case)
    cf, ct = connection_matrices(case, br)
    rows = [case.branches[i] for i in br.rows]
    b = np.asarray([1.0 / (r.x * r.tap) for r in rows], dtype=float)
    shift = np.asarray([r.shift for r in rows], dtype=float)
    cft = cf - ct
    bf = b[:, None] * cft
    pfinj = -b * shift
    bbus = cft.T @ bf
    pbusinj = cft.T @ pfinj

    nx = nb + ng
    ipg = slice(nb, nx)

    def f(x: np.ndarray):
        c, dc, d2c = lay.cost(x[ipg])
        df = np.zeros(nx)
        df[ipg] = dc
        d2f = np.zeros((nx, nx))
        d2f[ipg, ipg] = d2c
        return c, df, d2f

    # power balance: Bbus va - Cg pg = -(Pbusinj + Pd + Gs)
    balance = np.hstack([bbus, -lay.cg])
    rhs = -(pbusinj + lay.pd + lay.gs)
    A, lo, hi = [balance], [rhs], [rhs]
    lim = np.flatnonzero(br.rate > 0)
    if lim.size:
        A.append(np.hstack([bf[lim], np.zeros((lim.size, ng))]))
        lo.append(-br.rate[lim] - pfinj[lim])
        hi.append(br.rate[lim] - pfinj[lim])

    xmin = np.r_[np.full(nb, -np.inf), lay.pmin]
    xmax = np.r_[np.full(nb, np.inf), lay.pmax]
    xmin[lay.ref] = xmax[lay.ref] = lay.theta_ref
    x0 = np.r_[np.full(nb, lay.theta_ref), (lay.pmin + lay.pmax) / 2.0]

    res = interior_point(
        IpmProblem(f=f, x0=x0, xmin=xmin, xmax=xmax, A=np.vstack(A), l=np.concatenate(lo), u=np.concatenate(hi)),
        _ipm_options(cfg, 1.0),
    )
    x = res.x
    mis = balance @ x - rhs
    return _solution(
        res, lay, pg=x[ipg], qg=np.zeros(ng), vm=np.ones(nb), va=x[:nb], mismatch=_max_abs(mis), mode="dc"
    )


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def _solution(res: IpmResult, lay: _Layout, *, pg, qg, vm, va, mismatch: float, mode: str) -> OpfSolution:
    lam_p = res.lam[: lay.nb] / lay.base if res.lam.size >= lay.nb else np.zeros(lay.nb)
    return OpfSolution(
        cost=float(lay.cost(pg)[0]),
        pg=lay.scatter(pg),
        qg=lay.scatter(qg),
        vm=np.asarray(vm, dtype=float).copy(),
        va=np.asarray(va, dtype=float).copy(),
        converged=res.converged,
        iterations=res.iterations,
        status=res.status,  # type: ignore[arg-type]
        mode=mode,  # type: ignore[arg-type]
        mismatch=mismatch,
        feascond=res.conds.get("feascond", float("nan")),
        gradcond=res.conds.get("gradcond", float("nan")),
        compcond=res.conds.get("compcond", float("nan")),
        costcond=res.conds.get("costcond", float("nan")),
        lam_p=lam_p,
    )
