from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from gpopf.domain.errors import MetricError, UnpairedSamplesError
from gpopf.popf.report import HistogramBin, L1Summary, PopfReport
from gpopf.popf.samples import SampleSet, summarize

logger = logging.getLogger(__name__)

L1_GROUPS = ("pg", "qg", "vm")


def l1_error(y_hat: np.ndarray, y: np.ndarray) -> float:
    """||y_hat - y||_1 / ||y_hat||_1 * 100, with y_hat the reference (MCS) vector."""
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if y_hat.shape != y.shape:
        raise MetricError(f"vectors differ in length ({y_hat.size} vs {y.size})")
    norm = float(np.sum(np.abs(y_hat)))
    if norm == 0.0:
        raise MetricError("reference vector has zero L1 norm")
    return float(np.sum(np.abs(y_hat - y))) / norm * 100.0


def l1_errors(Y_hat: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise %L1 error between two S x k blocks."""
    if Y_hat.shape != Y.shape:
        raise MetricError(f"blocks differ in shape ({Y_hat.shape} vs {Y.shape})")
    norms = np.sum(np.abs(Y_hat), axis=1)
    if np.any(norms == 0.0):
        raise MetricError(f"{int(np.sum(norms == 0.0))} reference rows have zero L1 norm")
    return np.sum(np.abs(Y_hat - Y), axis=1) / norms * 100.0


def percent_error(a: float, b: float) -> float:
    """|a - b| / |b| * 100 against the reference b."""
    if b == 0.0:
        if a == 0.0:
            return 0.0
        raise MetricError("reference value is zero")
    return abs(a - b) / abs(b) * 100.0


def histogram(errors: np.ndarray, bins: int = 20) -> pd.DataFrame:
    """Fixed-width bins over [0, max(errors)]."""
    errors = np.asarray(errors, dtype=float)
    top = float(errors.max()) if errors.size else 0.0
    counts, edges = np.histogram(errors, bins=bins, range=(0.0, top) if top > 0 else (0.0, 1.0))
    return pd.DataFrame({"lo": edges[:-1], "hi": edges[1:], "count": counts})


def _check_paired(gp: SampleSet, mcs: SampleSet) -> None:
    if gp.X.shape != mcs.X.shape or gp.checksum != mcs.checksum:
        raise UnpairedSamplesError(
            f"input matrices differ (gp {gp.X.shape} {gp.checksum[:12]}, mcs {mcs.X.shape} {mcs.checksum[:12]})"
        )
    if gp.output_names != mcs.output_names:
        raise UnpairedSamplesError("GP and MCS sample sets carry different outputs")


def paired_l1(gp: SampleSet, mcs: SampleSet, group: str) -> np.ndarray:
    """Per-sample %L1 error of one output vector over the rows valid on both sides."""
    _check_paired(gp, mcs)
    rows = gp.valid & mcs.valid
    cols = mcs.columns(f"{group}:")
    return l1_errors(mcs.Y[np.ix_(rows, cols)], gp.Y[np.ix_(rows, cols)])


def compare(gp: SampleSet, mcs: SampleSet, bins: int = 20) -> PopfReport:
    """Cost moment errors and per-vector %L1 errors of the GP samples against the paired MCS."""
    _check_paired(gp, mcs)
    rows = gp.valid & mcs.valid
    n_paired = int(rows.sum())
    if n_paired == 0:
        raise UnpairedSamplesError("no sample converged on both sides")

    paired_gp = SampleSet(X=gp.X, Y=gp.Y, output_names=gp.output_names, source="gp",
                          label=gp.label, variance=gp.variance, valid=rows)
    paired_mcs = SampleSet(X=mcs.X, Y=mcs.Y, output_names=mcs.output_names, source="mcs",
                           label=mcs.label, valid=rows)

    cost_gp = gp.column("cost")[rows]
    cost_mcs = mcs.column("cost")[rows]
    ddof = 1 if n_paired > 1 else 0
    mean_gp, mean_mcs = float(np.mean(cost_gp)), float(np.mean(cost_mcs))
    std_gp, std_mcs = float(np.std(cost_gp, ddof=ddof)), float(np.std(cost_mcs, ddof=ddof))

    l1 = []
    for group in L1_GROUPS:
        if not mcs.columns(f"{group}:"):
            continue
        try:
            errors = paired_l1(gp, mcs, group)
        except MetricError as exc:
            logger.warning("%%L1(%s) skipped: %s", group, exc)
            continue
        table = histogram(errors, bins)
        l1.append(
            L1Summary(
                group=group,
                mean=float(np.mean(errors)),
                median=float(np.median(errors)),
                max=float(np.max(errors)),
                histogram=[HistogramBin(lo=r.lo, hi=r.hi, count=int(r.count)) for r in table.itertuples()],
            )
        )

    return PopfReport(
        n_paired=n_paired,
        n_dropped=int(gp.n_samples - n_paired),
        cost_mean_gp=mean_gp,
        cost_mean_mcs=mean_mcs,
        cost_std_gp=std_gp,
        cost_std_mcs=std_mcs,
        cost_mean_error_pct=percent_error(mean_gp, mean_mcs),
        cost_std_error_pct=percent_error(std_gp, std_mcs),
        l1=l1,
        gp=summarize(paired_gp),
        mcs=summarize(paired_mcs),
    )
