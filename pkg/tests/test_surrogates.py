import numpy as np
import pytest

from gpopf.domain.models import FitOptions, OracleConfig, SampleDistribution
from gpopf.popf.mcs import mcs_reference
from gpopf.popf.metrics import paired_l1
from gpopf.popf.surrogates import propagate, train_surrogates
from gpopf.popf.training_set import TrainingSet, build_training_set

DC = OracleConfig(mode="dc_qp")


@pytest.fixture(scope="module")
def dc_models(case14_renewable, spec14):
    ts = build_training_set(case14_renewable, spec14, 40, SampleDistribution(), DC, seed=3)
    return ts, train_surrogates(ts, FitOptions(restarts=2), seed=3)


def test_cost_moments_agree_across_test_seeds(dc_models, spec14):
    _, models = dc_models
    size = 10_000
    a = propagate(models, spec14, SampleDistribution(), size, seed=1).column("cost")
    b = propagate(models, spec14, SampleDistribution(), size, seed=2).column("cost")
    stderr = np.sqrt(a.var(ddof=1) / size + b.var(ddof=1) / size)
    assert abs(a.mean() - b.mean()) <= 3 * stderr
    assert b.std(ddof=1) == pytest.approx(a.std(ddof=1), rel=0.05)


def test_propagation_leaves_models_untouched(dc_models, spec14):
    _, models = dc_models
    before = [m.fingerprint() for m in models]
    propagate(models, spec14, SampleDistribution(), 500, seed=0)
    propagate(models, spec14, SampleDistribution(kind="truncated_normal"), 500, seed=1)
    assert [m.fingerprint() for m in models] == before


def test_training_row_order_does_not_change_predictions(dc_models, spec14):
    ts, _ = dc_models
    perm = np.random.default_rng(0).permutation(ts.n_samples)
    shuffled = TrainingSet(
        X=ts.X[perm], Y=ts.Y[perm], output_names=ts.output_names, input_labels=ts.input_labels
    )
    opts = FitOptions(restarts=1)
    a = propagate(train_surrogates(ts, opts, seed=0), spec14, SampleDistribution(), 200, seed=4)
    b = propagate(train_surrogates(shuffled, opts, seed=0), spec14, SampleDistribution(), 200, seed=4)
    spread = np.ptp(ts.Y, axis=0)
    assert np.all(np.abs(a.Y - b.Y) <= 1e-3 * spread + 1e-9)


def test_subset_keeps_rows_and_selects_columns(dc_models):
    ts, _ = dc_models
    names = [ts.output_names[3], ts.output_names[1]]
    sub = ts.subset(names)
    assert sub.output_names == names
    assert np.array_equal(sub.X, ts.X)
    assert np.array_equal(sub.Y[:, 0], ts.column(names[0]))
    assert np.array_equal(sub.Y[:, 1], ts.column(names[1]))


@pytest.mark.slow
def test_more_training_points_lower_voltage_error(case14_renewable, spec14):
    ac = OracleConfig(mode="ac_ipm")
    opts = FitOptions(restarts=2, mean="linear")
    errors = {50: [], 300: []}
    for seed in range(3):
        mcs = mcs_reference(case14_renewable, spec14, SampleDistribution(), 200, ac, seed=100 + seed, jobs=-1)
        for n in errors:
            ts = build_training_set(case14_renewable, spec14, n, SampleDistribution(), ac, seed=seed, jobs=-1)
            models = train_surrogates(ts, opts, seed=seed, jobs=-1)
            gp = propagate(models, spec14, SampleDistribution(), 200, seed=100 + seed)
            errors[n].append(float(np.mean(paired_l1(gp, mcs, "vm"))))
    assert np.mean(errors[300]) < np.mean(errors[50])
