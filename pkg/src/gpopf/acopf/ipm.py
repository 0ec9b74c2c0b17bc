"""Primal-dual interior-point method for

    min f(x)  s.t.  g(x) = 0,  h(x) <= 0,  l <= A x <= u,  xmin <= x <= xmax

Equal-bounded rows (linear or variable bounds) become equality constraints, finite one-sided
and two-sided rows become linear inequalities. Multipliers are returned on the cost scale.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

_BIG = 1e10
_EPS = np.finfo(float).eps

ObjectiveFn = Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]]
ConstraintFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]
HessianFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class IpmOptions:
    feastol: float = 1e-6
    gradtol: float = 1e-6
    comptol: float = 1e-6
    costtol: float = 1e-6
    eqtol: float = 1e-8  # absolute bound on max |g| at convergence
    max_iter: int = 150
    xi: float = 0.99995
    sigma: float = 0.1
    z0: float = 1.0
    cost_mult: float = 1.0
    alpha_min: float = 1e-10
    # smallest centering target, as a fraction of comptol spread over the inequalities
    gamma_floor: float = 1e-2


@dataclass(eq=False)
class IpmProblem:
    f: ObjectiveFn  # value, gradient, Hessian
    x0: np.ndarray
    xmin: np.ndarray
    xmax: np.ndarray
    gh: Optional[ConstraintFn] = None  # (h, g, dh, dg), Jacobians row-wise
    hess: Optional[HessianFn] = None  # Hessian of lam'g + mu'h
    A: Optional[np.ndarray] = None
    l: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None


@dataclass(eq=False)
class IpmResult:
    x: np.ndarray
    f: float
    converged: bool
    iterations: int
    status: str
    lam: np.ndarray  # nonlinear equality multipliers
    mu: np.ndarray  # nonlinear inequality multipliers
    conds: dict[str, float] = field(default_factory=dict)


def _norm(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def _split_linear(problem: IpmProblem, nx: int):
    rows = [np.eye(nx)]
    lo = [np.asarray(problem.xmin, dtype=float)]
    hi = [np.asarray(problem.xmax, dtype=float)]
    if problem.A is not None and problem.A.size:
        rows.insert(0, np.asarray(problem.A, dtype=float))
        lo.insert(0, np.asarray(problem.l, dtype=float))
        hi.insert(0, np.asarray(problem.u, dtype=float))
    AA, ll, uu = np.vstack(rows), np.concatenate(lo), np.concatenate(hi)

    ieq = np.abs(uu - ll) <= _EPS
    igt = (uu >= _BIG) & (ll > -_BIG)
    ilt = (ll <= -_BIG) & (uu < _BIG)
    ibx = (np.abs(uu - ll) > _EPS) & (uu < _BIG) & (ll > -_BIG)

    Ae, be = AA[ieq], uu[ieq]
    Ai = np.vstack([AA[ilt], -AA[igt], AA[ibx], -AA[ibx]])
    bi = np.concatenate([uu[ilt], -ll[igt], uu[ibx], -ll[ibx]])
    return Ae, be, Ai, bi


def interior_point(problem: IpmProblem, opts: IpmOptions | None = None) -> IpmResult:
    opts = opts or IpmOptions()
    x = np.asarray(problem.x0, dtype=float).copy()
    nx = x.shape[0]
    Ae, be, Ai, bi = _split_linear(problem, nx)

    def evaluate(x: np.ndarray):
        f, df, d2f = problem.f(x)
        if problem.gh is not None:
            hn, gn, dhn, dgn = problem.gh(x)
        else:
            hn, gn = np.zeros(0), np.zeros(0)
            dhn, dgn = np.zeros((0, nx)), np.zeros((0, nx))
        h = np.concatenate([hn, Ai @ x - bi])
        g = np.concatenate([gn, Ae @ x - be])
        dh = np.vstack([dhn, Ai])
        dg = np.vstack([dgn, Ae])
        return f * opts.cost_mult, df * opts.cost_mult, d2f * opts.cost_mult, h, g, dh, dg, len(hn), len(gn)

    f, df, d2f, h, g, dh, dg, nhn, ngn = evaluate(x)
    neq, niq = len(g), len(h)

    gamma = 1.0
    # centering target floor: z'mu settles below comptol with mu/z on active rows bounded
    gamma_min = opts.gamma_floor * opts.comptol / niq if niq else 0.0
    lam = np.zeros(neq)
    z = opts.z0 * np.ones(niq)
    mu = z.copy()
    k = h < -opts.z0
    z[k] = -h[k]
    k = (gamma / z) > opts.z0
    mu[k] = gamma / z[k]
    e = np.ones(niq)

    def conditions(x, z, lam, mu, h, g, Lx, f, f0):
        maxh = float(np.max(h)) if niq else 0.0
        return {
            "feascond": max(_norm(g), maxh) / (1.0 + max(_norm(x), _norm(z))),
            "gradcond": _norm(Lx) / (1.0 + max(_norm(lam), _norm(mu))),
            "compcond": float(z @ mu) / (1.0 + _norm(x)),
            "costcond": abs(f - f0) / (1.0 + abs(f0)),
        }

    def done(c: dict[str, float], g: np.ndarray) -> bool:
        return (
            c["feascond"] < opts.feastol
            and c["gradcond"] < opts.gradtol
            and c["compcond"] < opts.comptol
            and c["costcond"] < opts.costtol
            and _norm(g) <= opts.eqtol
        )

    Lx = df + dg.T @ lam + dh.T @ mu
    conds = conditions(x, z, lam, mu, h, g, Lx, f, f)
    first_feas = conds["feascond"]
    converged = done(conds, g)
    status = "converged" if converged else "max_iter"
    it = 0

    while not converged and it < opts.max_iter:
        it += 1
        Lxx = d2f.copy()
        if problem.hess is not None:
            Lxx = Lxx + problem.hess(x, lam[:ngn], mu[:nhn])

        zinv = 1.0 / z
        dh_zinv = dh.T * zinv[None, :]
        M = Lxx + dh_zinv @ (mu[:, None] * dh)
        N = Lx + dh_zinv @ (mu * h + gamma * e)
        kkt = np.block([[M, dg.T], [dg, np.zeros((neq, neq))]])
        rhs = np.concatenate([-N, -g])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            status = "numerically_failed"
            logger.debug("ipm iter %d: singular KKT system", it)
            break
        if not np.all(np.isfinite(sol)):
            status = "numerically_failed"
            break

        dx, dlam = sol[:nx], sol[nx:]
        dz = -h - z - dh @ dx
        dmu = -mu + zinv * (gamma * e - mu * dz)

        k = dz < 0
        alphap = min(opts.xi * float(np.min(z[k] / -dz[k])), 1.0) if np.any(k) else 1.0
        k = dmu < 0
        alphad = min(opts.xi * float(np.min(mu[k] / -dmu[k])), 1.0) if np.any(k) else 1.0

        x = x + alphap * dx
        z = z + alphap * dz
        lam = lam + alphad * dlam
        mu = mu + alphad * dmu
        if niq:
            gamma = max(opts.sigma * float(z @ mu) / niq, gamma_min)

        f0 = f
        if not np.all(np.isfinite(x)) or _norm(x) > _BIG:
            status = "diverged"
            break
        f, df, d2f, h, g, dh, dg, _, _ = evaluate(x)
        Lx = df + dg.T @ lam + dh.T @ mu
        conds = conditions(x, z, lam, mu, h, g, Lx, f, f0)
        logger.debug(
            "ipm iter %d: f=%.6g feas=%.2e grad=%.2e comp=%.2e cost=%.2e",
            it, f / opts.cost_mult, conds["feascond"], conds["gradcond"], conds["compcond"], conds["costcond"],
        )

        if done(conds, g):
            converged = True
            status = "converged"
            break
        if not np.isfinite(f) or not np.all(np.isfinite(Lx)):
            status = "diverged"
            break
        if alphap < opts.alpha_min or alphad < opts.alpha_min or gamma > 1.0 / _EPS:
            status = "numerically_failed"
            break

    if not converged and status == "max_iter" and conds["feascond"] > max(first_feas, opts.feastol) * 10:
        status = "infeasible"

    return IpmResult(
        x=x,
        f=f / opts.cost_mult,
        converged=converged,
        iterations=it,
        status=status,
        lam=lam[:ngn] / opts.cost_mult,
        mu=mu[:nhn] / opts.cost_mult,
        conds=conds,
    )
