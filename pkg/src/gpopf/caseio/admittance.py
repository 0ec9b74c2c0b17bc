from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gpopf.caseio.model import NetworkCase


@dataclass(frozen=True, eq=False)
class BranchAdmittances:
    """Pi-model two-port admittances of the in-service branches.

    Row k of `yf` gives the from-end current of branch `rows[k]` as yf[k] @ V,
    likewise `yt` for the to-end.
    """

    rows: np.ndarray  # indices into case.branches
    f: np.ndarray  # from-bus index per row
    t: np.ndarray  # to-bus index per row
    yff: np.ndarray
    yft: np.ndarray
    ytf: np.ndarray
    ytt: np.ndarray
    yf: np.ndarray  # n_row x n_bus
    yt: np.ndarray
    rate: np.ndarray  # MVA / base_mva, 0 = unlimited


def branch_admittances(case: NetworkCase) -> BranchAdmittances:
    nb = case.n_bus
    live = [i for i, br in enumerate(case.branches) if br.status]
    rows = np.asarray(live, dtype=int)
    f = np.asarray([case.bus_index(case.branches[i].from_bus) for i in live], dtype=int)
    t = np.asarray([case.bus_index(case.branches[i].to_bus) for i in live], dtype=int)

    r = np.asarray([case.branches[i].r for i in live], dtype=float)
    x = np.asarray([case.branches[i].x for i in live], dtype=float)
    b = np.asarray([case.branches[i].b for i in live], dtype=float)
    tap = np.asarray([case.branches[i].tap for i in live], dtype=float)
    shift = np.asarray([case.branches[i].shift for i in live], dtype=float)
    rate = np.asarray([case.branches[i].rate_a for i in live], dtype=float) / case.base_mva

    ys = 1.0 / (r + 1j * x)
    ratio = tap * np.exp(1j * shift)
    ytt = ys + 0.5j * b
    yff = ytt / (ratio * np.conj(ratio))
    yft = -ys / np.conj(ratio)
    ytf = -ys / ratio

    n = len(live)
    k = np.arange(n)
    yf = np.zeros((n, nb), dtype=complex)
    yt = np.zeros((n, nb), dtype=complex)
    # parallel rows on the same bus pair stay separate, so plain assignment is safe
    yf[k, f] = yff
    yf[k, t] = yft
    yt[k, f] = ytf
    yt[k, t] = ytt

    return BranchAdmittances(
        rows=rows, f=f, t=t, yff=yff, yft=yft, ytf=ytf, ytt=ytt, yf=yf, yt=yt, rate=rate
    )


def admittance_matrix(case: NetworkCase) -> np.ndarray:
    """Dense complex nodal admittance matrix in per unit (buses in case order)."""
    nb = case.n_bus
    br = branch_admittances(case)
    ysh = np.asarray([b.gs + 1j * b.bs for b in case.buses], dtype=complex) / case.base_mva

    Y = np.zeros((nb, nb), dtype=complex)
    np.add.at(Y, (br.f, br.f), br.yff)
    np.add.at(Y, (br.f, br.t), br.yft)
    np.add.at(Y, (br.t, br.f), br.ytf)
    np.add.at(Y, (br.t, br.t), br.ytt)
    Y[np.diag_indices(nb)] += ysh
    return Y


def connection_matrices(case: NetworkCase, br: BranchAdmittances) -> tuple[np.ndarray, np.ndarray]:
    """Branch-to-bus incidence (from, to) as dense 0/1 matrices."""
    n = len(br.rows)
    cf = np.zeros((n, case.n_bus))
    ct = np.zeros((n, case.n_bus))
    cf[np.arange(n), br.f] = 1.0
    ct[np.arange(n), br.t] = 1.0
    return cf, ct
