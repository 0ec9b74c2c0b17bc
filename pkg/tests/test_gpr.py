import logging
import math

import numpy as np
import pytest

from gpopf.domain.errors import GpFitError, GpNumericalError, InputDimensionError
from gpopf.domain.models import FitOptions
from gpopf.gpr.kernel import Hyperparameters, kernel, kernel_matrix
from gpopf.gpr.likelihood import log_marginal_likelihood
from gpopf.gpr.linalg import FACTORIZATIONS, jittered_cholesky
from gpopf.gpr.model import Scaler, bound_hits, build_model, fit, predict, predict_batch

IDENTITY = Scaler(mean=np.array([0.0]), scale=np.array([1.0]))


def _smooth_data(n: int = 25, d: int = 2, seed: int = 0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, d))
    y = np.sin(2.0 * x[:, 0]) + 0.5 * x[:, 1] ** 2
    return x, y


def test_kernel_matches_matrix():
    hp = Hyperparameters(l=0.7, sigma_f=1.3, sigma_n=0.1)
    a = np.array([[0.0, 1.0], [2.0, -1.0]])
    K = kernel_matrix(a, a, hp)
    assert K[0, 1] == pytest.approx(kernel(a[0], a[1], hp), rel=1e-14)
    assert K[0, 0] == pytest.approx(1.3**2)


def test_hyperparameters_must_be_positive():
    with pytest.raises(ValueError):
        Hyperparameters(l=0.0, sigma_f=1.0, sigma_n=0.1)
    with pytest.raises(ValueError):
        Hyperparameters(l=1.0, sigma_f=-1.0, sigma_n=0.1)


@pytest.mark.parametrize("seed", range(50))
def test_lml_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    n, d = 8, 2
    x = rng.normal(size=(n, d))
    y = rng.normal(size=n)
    theta = np.log([rng.uniform(0.3, 3.0), rng.uniform(0.5, 2.0), rng.uniform(0.05, 0.5)])

    def value(t):
        return log_marginal_likelihood(x, y, Hyperparameters.from_log(t))[0]

    _, grad = log_marginal_likelihood(x, y, Hyperparameters.from_log(theta))
    h = 1e-5
    fd = np.array([(value(theta + h * e) - value(theta - h * e)) / (2 * h) for e in np.eye(3)])
    scale = np.maximum(np.abs(fd), 1e-3)
    assert np.max(np.abs(grad - fd) / scale) <= 1e-5


def test_single_point_lml():
    value, _ = log_marginal_likelihood(np.zeros((1, 1)), np.zeros(1), Hyperparameters(1.0, 1.0, 1e-3))
    assert value == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-5)
    assert value == pytest.approx(-0.9189, abs=1e-4)


def test_two_point_closed_form():
    hp = Hyperparameters(l=0.7, sigma_f=1.3, sigma_n=0.2)
    x = np.array([[0.0], [1.0]])
    y = np.array([1.0, -0.5])
    jitter = 1e-10 * hp.sigma_f**2

    a = hp.sigma_f**2 + hp.sigma_n**2 + jitter
    b = hp.sigma_f**2 * math.exp(-1.0 / (2 * hp.l**2))
    det = a * a - b * b
    quad = (a * (y[0] ** 2 + y[1] ** 2) - 2 * b * y[0] * y[1]) / det
    expected = -0.5 * quad - 0.5 * math.log(det) - math.log(2 * math.pi)

    value, _ = log_marginal_likelihood(x, y, hp)
    assert value == pytest.approx(expected, abs=1e-10)

    model = build_model(hp, x, y, IDENTITY, IDENTITY)
    ks = hp.sigma_f**2 * math.exp(-0.25 / (2 * hp.l**2))
    w = np.array([a - b, a - b]) / det  # K^-1 @ [1, 1]
    mean = ks * float(w @ y)
    var = hp.sigma_f**2 - ks * ks * float(w.sum())
    pred = predict(model, np.array([0.5]))
    assert pred.mean == pytest.approx(mean, abs=1e-10)
    assert pred.variance == pytest.approx(var, abs=1e-10)


def test_noiseless_interpolation_at_fixed_hyperparameters():
    x = np.linspace(0.0, 1.0, 8)[:, None]
    y = np.sin(6.0 * x[:, 0])
    hp = Hyperparameters(l=0.1, sigma_f=1.0, sigma_n=1e-6)
    model = build_model(hp, x, y, IDENTITY, IDENTITY)
    pred = predict_batch(model, x)
    assert np.max(np.abs(pred.mean - y)) <= 1e-6 * np.ptp(y)


def test_fitted_model_interpolates_training_data():
    x, y = _smooth_data()
    model = fit(x, y, seed=1, output_name="smooth")
    pred = predict_batch(model, x)
    assert np.max(np.abs(pred.mean - y)) <= 1e-3 * np.ptp(y)
    assert np.all(pred.variance >= 0)
    assert model.output_name == "smooth"


def test_fit_is_deterministic_for_a_seed():
    x, y = _smooth_data()
    a = fit(x, y, seed=7)
    b = fit(x, y, seed=7)
    assert a.fingerprint() == b.fingerprint()


def test_predict_matches_predict_batch_bitwise():
    x, y = _smooth_data()
    model = fit(x, y, seed=0)
    stars = np.random.default_rng(5).uniform(-1.5, 1.5, size=(7, 2))
    batch = predict_batch(model, stars)
    for i, row in enumerate(stars):
        single = predict(model, row)
        assert single.mean == batch.mean[i]
        assert single.variance == batch.variance[i]


def test_prediction_does_not_refactor():
    x, y = _smooth_data()
    model = fit(x, y, seed=0)
    before = FACTORIZATIONS.value
    predict_batch(model, np.zeros((100, 2)))
    predict(model, np.ones(2))
    assert FACTORIZATIONS.value == before


def test_variance_is_nonnegative_and_reverts_far_away():
    x, y = _smooth_data()
    model = fit(x, y, seed=0)
    pred = predict_batch(model, np.random.default_rng(2).uniform(-3, 3, size=(500, 2)))
    assert np.all(pred.variance >= 0.0)
    far = predict(model, np.array([1e3, 1e3]))
    prior = model.hp.sigma_f**2 * model.y_scaler.scale[0] ** 2
    assert far.variance == pytest.approx(prior, rel=1e-9)
    assert far.mean == pytest.approx(model.y_scaler.mean[0], abs=1e-9)


def test_constant_target_gives_constant_model(caplog):
    caplog.set_level(logging.WARNING)
    x, _ = _smooth_data(n=10)
    model = fit(x, np.full(10, 3.0), output_name="flat")
    assert model.constant
    pred = predict_batch(model, x)
    assert np.all(pred.mean == 3.0)
    assert np.all(pred.variance == 0.0)
    assert bound_hits(model) == []
    assert any("constant" in r.getMessage() for r in caplog.records)


def test_predictions_invariant_under_input_translation():
    x, y = _smooth_data()
    stars = np.random.default_rng(4).uniform(-1, 1, size=(20, 2))
    a = predict_batch(fit(x, y, seed=3), stars)
    b = predict_batch(fit(x + 100.0, y, seed=3), stars + 100.0)
    assert np.allclose(a.mean, b.mean, atol=1e-4 * np.ptp(y))


def test_predictions_invariant_under_row_permutation():
    x, y = _smooth_data()
    perm = np.random.default_rng(9).permutation(len(y))
    hp = Hyperparameters(l=0.8, sigma_f=1.2, sigma_n=1e-3)
    stars = np.random.default_rng(4).uniform(-1, 1, size=(20, 2))

    def model_for(xr, yr):
        xs, ys = Scaler.fit(xr), Scaler.fit(yr)
        return build_model(hp, xs.transform(xr), ys.transform(yr), xs, ys)

    a = predict_batch(model_for(x, y), stars)
    b = predict_batch(model_for(x[perm], y[perm]), stars)
    assert np.allclose(a.mean, b.mean, atol=1e-8)
    assert np.allclose(a.variance, b.variance, atol=1e-8)


def test_jitter_escalates_until_positive_definite():
    K = np.diag([1.0, -5e-9])
    L, jitter = jittered_cholesky(K, jitter_start=1e-10, jitter_max=1e-6)
    assert jitter == pytest.approx(1e-8)
    assert np.allclose(L @ L.T, K + jitter * np.eye(2))


def test_indefinite_covariance_raises():
    with pytest.raises(GpNumericalError):
        jittered_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_fit_rejects_bad_data():
    x, y = _smooth_data(n=5)
    with pytest.raises(GpFitError):
        fit(x, y[:4])
    y_bad = y.copy()
    y_bad[0] = np.nan
    with pytest.raises(GpFitError):
        fit(x, y_bad)


def test_predict_shape_checks():
    x, y = _smooth_data(n=6)
    model = fit(x, y, FitOptions(restarts=1), seed=0)
    with pytest.raises(InputDimensionError):
        predict(model, np.zeros((1, 2)))
    with pytest.raises(InputDimensionError):
        predict_batch(model, np.zeros((3, 5)))
    with pytest.raises(InputDimensionError):
        predict_batch(model, np.zeros(2))


def test_length_scale_recovered_from_gp_draws():
    rng = np.random.default_rng(11)
    x = rng.uniform(-3.0, 3.0, size=(200, 1))
    truth = Hyperparameters(l=0.5, sigma_f=1.0, sigma_n=0.01)
    K = kernel_matrix(x, x, truth) + truth.sigma_n**2 * np.eye(200)
    y = np.linalg.cholesky(K) @ rng.standard_normal(200)
    model = fit(x, y, FitOptions(restarts=3), seed=0)
    # back to input units
    assert 0.25 <= model.hp.l * model.x_scaler.scale[0] <= 1.0


def test_conflicting_duplicates_keep_noise_up():
    rng = np.random.default_rng(2)
    base = rng.uniform(-1.0, 1.0, size=(20, 1))
    x = np.vstack([base, base])
    y = np.sin(3.0 * x[:, 0]) + rng.normal(0.0, 0.3, size=40)
    model = fit(x, y, FitOptions(restarts=2), seed=0)
    assert model.hp.sigma_n > 1e-2


def test_near_constant_target_is_constant():
    x, _ = _smooth_data(n=10)
    model = fit(x, 3.0 + 1e-9 * x[:, 0], output_name="pinned")
    assert model.constant
    assert model.trend is None


def test_affine_target_is_fit_by_the_trend_alone(caplog):
    caplog.set_level(logging.INFO)
    x, _ = _smooth_data(n=15)
    y = 2.0 + 3.0 * x[:, 0] - x[:, 1]
    model = fit(x, y, FitOptions(mean="linear"), output_name="affine")
    assert model.constant
    assert model.trend is not None
    stars = np.random.default_rng(3).uniform(-2.0, 2.0, size=(9, 2))
    pred = predict_batch(model, stars)
    assert np.allclose(pred.mean, 2.0 + 3.0 * stars[:, 0] - stars[:, 1], atol=1e-9)
    assert np.all(pred.variance == 0.0)
    assert any("affine" in r.getMessage() for r in caplog.records)


def test_linear_mean_interpolates_and_reverts_to_the_trend():
    x, y = _smooth_data()
    model = fit(x, y, FitOptions(mean="linear"), seed=1)
    assert model.trend is not None and model.trend.shape == (3,)
    pred = predict_batch(model, x)
    assert np.max(np.abs(pred.mean - y)) <= 1e-3 * np.ptp(y)

    far_x = np.array([1e3, -1e3])
    far = predict(model, far_x)
    trend = model.prior_mean(model.x_scaler.transform(far_x[None, :]))[0]
    assert far.mean == pytest.approx(model.y_scaler.mean[0] + model.y_scaler.scale[0] * trend, rel=1e-9)


def test_linear_mean_needs_more_rows_than_inputs():
    x, y = _smooth_data(n=3)
    model = fit(x, y, FitOptions(mean="linear", restarts=1), seed=0)
    assert model.trend is None
