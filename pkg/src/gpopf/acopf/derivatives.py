"""First and second derivatives of bus injections and branch flows in polar coordinates.

Dense arrays throughout; the bundled systems are small enough that sparsity buys nothing.
"""

from __future__ import annotations

import numpy as np


def dsbus_dv(Y: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Partials of S = V * conj(Y V) w.r.t. angle and magnitude."""
    ibus = Y @ V
    vnorm = V / np.abs(V)
    ds_dvm = V[:, None] * np.conj(Y * vnorm[None, :]) + np.diag(np.conj(ibus) * vnorm)
    ds_dva = 1j * (np.diag(V * np.conj(ibus)) - V[:, None] * np.conj(Y * V[None, :]))
    return ds_dva, ds_dvm


def d2sbus_dv2(Y: np.ndarray, V: np.ndarray, lam: np.ndarray):
    """Second partials of lam' * S, returned as (aa, av, va, vv) blocks."""
    ibus = Y @ V
    lv = lam * V
    C = lv[:, None] * np.conj(Y * V[None, :])
    D = np.conj(Y).T * V[None, :]
    E = np.conj(V)[:, None] * (D * lam[None, :] - np.diag(D @ lam))
    F = C - np.diag(lv * np.conj(ibus))
    ginv = 1.0 / np.abs(V)

    gaa = E + F
    gva = 1j * ginv[:, None] * (E - F)
    gav = gva.T
    gvv = ginv[:, None] * (C + C.T) * ginv[None, :]
    return gaa, gav, gva, gvv


def dsbr_dv(yb: np.ndarray, cb: np.ndarray, V: np.ndarray):
    """Partials of branch-end flows S = (cb V) * conj(yb V); returns (dS/dVa, dS/dVm, S)."""
    ib = yb @ V
    vb = cb @ V
    vnorm = V / np.abs(V)
    ds_dva = 1j * (np.conj(ib)[:, None] * cb * V[None, :] - vb[:, None] * np.conj(yb * V[None, :]))
    ds_dvm = vb[:, None] * np.conj(yb * vnorm[None, :]) + np.conj(ib)[:, None] * cb * vnorm[None, :]
    return ds_dva, ds_dvm, vb * np.conj(ib)


def d2sbr_dv2(cb: np.ndarray, yb: np.ndarray, V: np.ndarray, lam: np.ndarray):
    A = yb.T @ (lam[:, None] * cb)
    B = np.conj(V)[:, None] * A * V[None, :]
    D = np.diag((A @ V) * np.conj(V))
    E = np.diag((A.T @ np.conj(V)) * V)
    F = B + B.T
    ginv = 1.0 / np.abs(V)

    haa = F - D - E
    hva = 1j * ginv[:, None] * (B - B.T - D + E)
    hav = hva.T
    hvv = ginv[:, None] * F * ginv[None, :]
    return haa, hav, hva, hvv


def dabr_dv(ds_dva: np.ndarray, ds_dvm: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Partials of |S|^2 from the partials of S."""
    da = 2.0 * (s.real[:, None] * ds_dva.real + s.imag[:, None] * ds_dva.imag)
    dm = 2.0 * (s.real[:, None] * ds_dvm.real + s.imag[:, None] * ds_dvm.imag)
    return da, dm


def d2abr_dv2(ds_dva, ds_dvm, s, cb, yb, V, mu) -> np.ndarray:
    """Hessian of mu' * |S|^2 over [Va, Vm] as one real 2nb x 2nb block."""
    saa, sav, sva, svv = d2sbr_dv2(cb, yb, V, np.conj(s) * mu)
    m = mu[:, None]
    haa = 2.0 * np.real(saa + ds_dva.T @ (m * np.conj(ds_dva)))
    hva = 2.0 * np.real(sva + ds_dvm.T @ (m * np.conj(ds_dva)))
    hav = 2.0 * np.real(sav + ds_dva.T @ (m * np.conj(ds_dvm)))
    hvv = 2.0 * np.real(svv + ds_dvm.T @ (m * np.conj(ds_dvm)))
    return np.block([[haa, hav], [hva, hvv]])
