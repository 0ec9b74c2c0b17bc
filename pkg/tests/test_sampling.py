import logging
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from gpopf.domain.errors import UnsupportedDistributionError
from gpopf.domain.models import SampleDistribution
from gpopf.popf.sampling import checksum, child_seeds, draw

KINDS = [
    SampleDistribution(kind="uniform_box", sampler="lhs"),
    SampleDistribution(kind="uniform_box", sampler="iid"),
    SampleDistribution(kind="truncated_normal", std_fraction=0.5),
    SampleDistribution(kind="beta", alpha=2.0, beta=5.0),
    SampleDistribution(kind="beta", beta_on="all"),
    SampleDistribution(kind="point"),
]


@pytest.mark.parametrize("dist", KINDS, ids=lambda d: d.label())
def test_draws_stay_inside_the_box(dist, spec14):
    X = draw(dist, spec14, 200, seed=1)
    assert X.shape == (200, spec14.n)
    assert np.all(X >= spec14.x_lower)
    assert np.all(X <= spec14.x_upper)


@pytest.mark.parametrize("dist", KINDS, ids=lambda d: d.label())
def test_same_seed_same_draw(dist, spec14):
    assert np.array_equal(draw(dist, spec14, 50, seed=11), draw(dist, spec14, 50, seed=11))


def test_different_seeds_differ(spec14):
    dist = SampleDistribution()
    assert not np.array_equal(draw(dist, spec14, 20, seed=1), draw(dist, spec14, 20, seed=2))


def test_distribution_seed_overrides_caller(spec14):
    dist = SampleDistribution(kind="uniform_box", sampler="iid", seed=5)
    assert np.array_equal(draw(dist, spec14, 10, seed=1), draw(dist, spec14, 10, seed=2))


def test_lhs_fills_every_stratum(spec14):
    n = 40
    X = draw(SampleDistribution(sampler="lhs"), spec14, n, seed=3)
    width = spec14.x_upper - spec14.x_lower
    for j in np.flatnonzero(width > 0):
        u = (X[:, j] - spec14.x_lower[j]) / width[j]
        strata = np.minimum(np.floor(u * n).astype(int), n - 1)
        assert sorted(strata) == list(range(n))


def test_truncated_normal_centred_on_midpoint(spec14):
    X = draw(SampleDistribution(kind="truncated_normal", std_fraction=0.1), spec14, 4000, seed=0)
    mid = (spec14.x_lower + spec14.x_upper) / 2
    width = spec14.x_upper - spec14.x_lower
    assert np.all(np.abs(X.mean(axis=0) - mid) <= 0.01 * np.maximum(width, 1e-12))


def test_beta_skews_renewables_low(spec14):
    X = draw(SampleDistribution(kind="beta", alpha=2.0, beta=5.0), spec14, 4000, seed=0)
    u = (X[:, :3] - spec14.x_lower[:3]) / (spec14.x_upper[:3] - spec14.x_lower[:3])
    # Beta(2, 5) has mean 2/7
    assert np.allclose(u.mean(axis=0), 2 / 7, atol=0.02)


def test_point_defaults_to_base_case(spec14):
    X = draw(SampleDistribution(kind="point"), spec14, 3)
    assert np.array_equal(X, np.tile(spec14.x_base, (3, 1)))


def test_point_must_match_dimension_and_box(spec14):
    with pytest.raises(UnsupportedDistributionError):
        draw(SampleDistribution(kind="point", point=[1.0, 2.0]), spec14, 1)
    outside = (spec14.x_upper + 10.0).tolist()
    with pytest.raises(UnsupportedDistributionError):
        draw(SampleDistribution(kind="point", point=outside), spec14, 1)


def test_empirical_rows_filtered_and_resampled(spec14, tmp_path: Path, caplog):
    caplog.set_level(logging.WARNING)
    rows = np.vstack([spec14.x_lower, spec14.x_upper, spec14.x_upper + 100.0])
    p = tmp_path / "observed.csv"
    pd.DataFrame(rows, columns=spec14.labels()).to_csv(p, index=False)

    X = draw(SampleDistribution(kind="empirical_file", path=p), spec14, 30, seed=0)
    assert X.shape == (30, spec14.n)
    for row in X:
        assert np.array_equal(row, spec14.x_lower) or np.array_equal(row, spec14.x_upper)
    assert any("dropped 1 rows" in r.getMessage() for r in caplog.records)


def test_empirical_column_count_checked(spec14, tmp_path: Path):
    p = tmp_path / "narrow.csv"
    pd.DataFrame({"a": [1.0], "b": [2.0]}).to_csv(p, index=False)
    with pytest.raises(UnsupportedDistributionError, match="columns"):
        draw(SampleDistribution(kind="empirical_file", path=p), spec14, 5)


def test_empirical_missing_file(spec14, tmp_path: Path):
    dist = SampleDistribution(kind="empirical_file", path=tmp_path / "none.csv")
    with pytest.raises(UnsupportedDistributionError):
        draw(dist, spec14, 5)


def test_empirical_needs_path():
    with pytest.raises(ValueError):
        SampleDistribution(kind="empirical_file")


def test_nonpositive_size_rejected(spec14):
    with pytest.raises(UnsupportedDistributionError):
        draw(SampleDistribution(), spec14, 0)


def test_child_seeds_do_not_advance_parent():
    parent = np.random.SeedSequence(42)
    a = child_seeds(parent, 3)
    b = child_seeds(parent, 3)
    assert [s.generate_state(2).tolist() for s in a] == [s.generate_state(2).tolist() for s in b]
    assert parent.n_children_spawned == 0
    assert a[0].generate_state(1)[0] != a[1].generate_state(1)[0]
    assert child_seeds(42, 2)[1].generate_state(2).tolist() == b[1].generate_state(2).tolist()


def test_checksum_is_content_hash():
    X = np.arange(6.0).reshape(3, 2)
    assert checksum(X) == checksum(X.copy())
    assert checksum(X) != checksum(X + np.eye(3, 2) * 1e-12)
    assert len(checksum(X)) == 64
