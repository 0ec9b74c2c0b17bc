from __future__ import annotations

import logging

from gpopf.caseio.model import NetworkCase
from gpopf.domain.models import OracleConfig, SampleDistribution
from gpopf.popf.oracle import output_matrix, solve_inputs
from gpopf.popf.samples import SampleSet
from gpopf.popf.sampling import SeedLike, draw
from gpopf.popf.training_set import output_names
from gpopf.popf.uncertainty import UncertaintySpec

logger = logging.getLogger(__name__)


def mcs_reference(
    case: NetworkCase,
    spec: UncertaintySpec,
    dist: SampleDistribution,
    size: int,
    oracle: OracleConfig,
    seed: SeedLike = 0,
    jobs: int = 1,
) -> SampleSet:
    """Direct OPF solves over the same input stream propagate() draws for an equal seed.

    Non-converged samples stay in the set as invalid (NaN) rows.
    """
    X = draw(dist, spec, size, seed)
    Y, ok = output_matrix(solve_inputs(case, spec, X, oracle, jobs=jobs))
    failed = int((~ok).sum())
    if failed:
        logger.warning("MCS: %d of %d samples did not converge and are dropped", failed, size)
    logger.info("MCS: solved %d %s samples", size, dist.label())
    return SampleSet(X=X, Y=Y, output_names=output_names(case), source="mcs", label=dist.label(), valid=ok)
