from __future__ import annotations

import hashlib
import logging

import numpy as np
import pandas as pd
from scipy import stats
from scipy.stats import qmc

from gpopf.domain.errors import UnsupportedDistributionError
from gpopf.domain.models import SampleDistribution
from gpopf.popf.uncertainty import UncertaintySpec

logger = logging.getLogger(__name__)

SeedLike = int | np.random.SeedSequence | None


def child_seeds(seed: SeedLike, n: int) -> list[np.random.SeedSequence]:
    """The first n children of `seed`, without advancing its spawn counter."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.SeedSequence(ss.entropy, spawn_key=(*ss.spawn_key, i)) for i in range(n)]


def _rng(dist: SampleDistribution, seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(dist.seed if dist.seed is not None else seed)


def _scale(u: np.ndarray, spec: UncertaintySpec) -> np.ndarray:
    return spec.x_lower + u * (spec.x_upper - spec.x_lower)


def draw(dist: SampleDistribution, spec: UncertaintySpec, size: int, seed: SeedLike = None) -> np.ndarray:
    """`size` input vectors from `dist`, every row inside the uncertainty box."""
    if size < 1:
        raise UnsupportedDistributionError(f"sample size must be positive, got {size}")
    rng = _rng(dist, seed)
    n = spec.n
    width = spec.x_upper - spec.x_lower

    if dist.kind == "uniform_box":
        if dist.sampler == "lhs":
            u = qmc.LatinHypercube(d=n, seed=rng).random(size)
        else:
            u = rng.uniform(size=(size, n))
        X = _scale(u, spec)

    elif dist.kind == "truncated_normal":
        mid = (spec.x_lower + spec.x_upper) / 2.0
        sd = dist.std_fraction * width
        X = np.tile(mid, (size, 1))
        live = sd > 0
        if np.any(live):
            a = (spec.x_lower[live] - mid[live]) / sd[live]
            b = (spec.x_upper[live] - mid[live]) / sd[live]
            X[:, live] = stats.truncnorm.rvs(
                a, b, loc=mid[live], scale=sd[live], size=(size, int(live.sum())), random_state=rng
            )

    elif dist.kind == "beta":
        mask = spec.renewable_mask if dist.beta_on == "renewable" else np.ones(n, dtype=bool)
        u = rng.uniform(size=(size, n))
        if np.any(mask):
            u[:, mask] = stats.beta.rvs(dist.alpha, dist.beta, size=(size, int(mask.sum())), random_state=rng)
        X = _scale(u, spec)

    elif dist.kind == "empirical_file":
        X = _empirical(dist, spec, size, rng)

    elif dist.kind == "point":
        point = spec.x_base if dist.point is None else np.asarray(dist.point, dtype=float)
        if point.shape != (n,):
            raise UnsupportedDistributionError(f"point has {point.shape[0]} entries, expected {n}")
        if not spec.contains(point):
            raise UnsupportedDistributionError("point lies outside the uncertainty box")
        X = np.tile(point, (size, 1))

    else:
        raise UnsupportedDistributionError(f"unsupported distribution kind {dist.kind!r}")

    return np.clip(X, spec.x_lower, spec.x_upper)


def _empirical(dist: SampleDistribution, spec: UncertaintySpec, size: int, rng: np.random.Generator) -> np.ndarray:
    if dist.path is None or not dist.path.is_file():
        raise UnsupportedDistributionError(f"empirical sample file not found: {dist.path}")
    frame = pd.read_csv(dist.path)
    if frame.shape[1] != spec.n:
        raise UnsupportedDistributionError(
            f"{dist.path.name} has {frame.shape[1]} columns, expected {spec.n} ({', '.join(spec.labels())})"
        )
    rows = frame.to_numpy(dtype=float)
    inside = np.array([spec.contains(r) for r in rows], dtype=bool)
    if not np.any(inside):
        raise UnsupportedDistributionError(f"no row of {dist.path.name} lies inside the uncertainty box")
    if not np.all(inside):
        logger.warning("%s: dropped %d rows outside the uncertainty box", dist.path.name, int((~inside).sum()))
    rows = rows[inside]
    return rows[rng.integers(0, rows.shape[0], size=size)]


def redraw_uniform(spec: UncertaintySpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. uniform replacements for rejected training points."""
    return _scale(rng.uniform(size=(size, spec.n)), spec)


def checksum(X: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(X, dtype=np.float64).tobytes()).hexdigest()
