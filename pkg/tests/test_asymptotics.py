import math

import numpy as np
import pytest

from esdmix.asymptotics import (
    ContaminatedGaussian,
    GaussianLaw,
    ShiftedMixtureSpec,
    UniformBall,
    UniformCube,
    central_set_containment,
    law_moments,
    match_components,
    mc_population_loglik,
    run_consistency_experiment,
    run_separation_experiment,
    sample_mixture,
)
from esdmix.em import FitConfig
from esdmix.exceptions import ConfigurationError, InputDomainError, LevelRangeError
from esdmix.generators import DensityGenerator
from esdmix.mixture import MixtureParams

G = DensityGenerator.gaussian()


def ball_spec(gaps=(0.0, 6.0), xi=(0.3, 0.7)):
    return ShiftedMixtureSpec.collinear([UniformBall(1.0, 2)] * 2, xi, gaps, epsilon=0.995, eta=0.01)


def test_label_frequencies():
    _, labels = sample_mixture(ball_spec(), 1, 100_000, 4)
    assert abs(np.mean(labels == 1) - 0.3) < 0.01
    assert set(np.unique(labels)) == {1, 2}


def test_ball_support_and_reproducibility():
    spec = ball_spec()
    x, _ = sample_mixture(spec, 0, 5000, 1)
    assert np.all(np.linalg.norm(x, axis=1) <= 1.0)
    y, _ = sample_mixture(spec, 0, 5000, 1)
    assert x.tobytes() == y.tobytes()
    with pytest.raises(LevelRangeError):
        sample_mixture(spec, 2, 10, 1)


@pytest.mark.parametrize("law,cov", [
    (UniformBall(1.0, 2), 0.25 * np.eye(2)),
    (UniformBall(2.0, 3), 0.8 * np.eye(3)),
    (UniformCube(1.5, 2), 0.75 * np.eye(2)),
    (ContaminatedGaussian(np.diag([1.0, 2.0]), 0.1, 3.0), 1.2 * np.diag([1.0, 2.0])),
])
def test_closed_form_moments_match_monte_carlo(law, cov):
    mean, closed = law_moments(law)
    np.testing.assert_allclose(closed, cov, rtol=1e-12)
    x = law.sample(np.random.default_rng(8), 1_000_000)
    np.testing.assert_allclose(np.cov(x, rowvar=False), closed, atol=0.02 * np.abs(cov).max())
    np.testing.assert_allclose(x.mean(axis=0), mean, atol=0.01 * math.sqrt(np.abs(cov).max()))


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        ShiftedMixtureSpec.collinear([GaussianLaw(np.eye(2))] * 2, [0.5, 0.5], [1.0], epsilon=1.0, eta=0.01)
    with pytest.raises(ConfigurationError):
        ball_spec(gaps=(6.0, 3.0))
    with pytest.raises(ConfigurationError):
        ball_spec(xi=(0.0, 1.0))
    spec = ball_spec()
    assert np.all(spec.central_mass >= 0.98)


def test_entropy_of_standard_normal():
    spec = ShiftedMixtureSpec.collinear([GaussianLaw(np.eye(1))], [1.0], [0.0], epsilon=3.0, eta=0.01)
    theta = MixtureParams.from_arrays([1.0], [[0.0]], [np.eye(1)], G)
    est, se = mc_population_loglik(theta, spec, 0, 100_000, 3)
    assert abs(est + 0.5 * (1 + math.log(2 * math.pi))) < 3 * se
    with pytest.raises(InputDomainError):
        mc_population_loglik(theta, spec, 0, 99, 3)


def gauss_spec():
    return ShiftedMixtureSpec([GaussianLaw(np.eye(2))] * 2, [0.5, 0.5],
                              np.array([[[-3.0, 0.0], [3.0, 0.0]]]), epsilon=4.0, eta=0.01)


def test_truth_beats_shifted_mean():
    spec = gauss_spec()
    truth = MixtureParams.from_arrays([0.5, 0.5], [[-3.0, 0.0], [3.0, 0.0]], [np.eye(2)] * 2, G)
    off = MixtureParams.from_arrays([0.5, 0.5], [[-2.0, 0.0], [3.0, 0.0]], [np.eye(2)] * 2, G)
    assert mc_population_loglik(truth, spec, 0, 100_000, 5)[0] > mc_population_loglik(off, spec, 0, 100_000, 5)[0]


def test_standard_error_rate():
    spec = gauss_spec()
    theta = MixtureParams.from_arrays([0.5, 0.5], [[-3.0, 0.0], [3.0, 0.0]], [np.eye(2)] * 2, G)
    _, se1 = mc_population_loglik(theta, spec, 0, 20_000, 6)
    _, se2 = mc_population_loglik(theta, spec, 0, 40_000, 6)
    assert se2 / se1 == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_consistency_self_comparison():
    spec = gauss_spec()
    cfg = FitConfig(K=2, n_starts=3)
    rep = run_consistency_experiment(spec, 0, [100, 2000], cfg, reference_M=2000, seed=4, check_validity=False)
    assert rep.rows[-1].param_distance == 0.0
    assert rep.rows[0].param_distance > 0.0
    with pytest.raises(InputDomainError):
        run_consistency_experiment(spec, 0, [100, 500], cfg, reference_M=2000, seed=4)


def test_consistency_flags_concentrated_law():
    spec = ShiftedMixtureSpec([GaussianLaw(np.zeros((2, 2)))] * 2, [0.5, 0.5],
                              np.array([[[-3.0, 0.0], [3.0, 0.0]]]), epsilon=1.0, eta=0.01)
    rep = run_consistency_experiment(spec, 0, [50, 100], FitConfig(K=2, n_starts=2), 1000, seed=0)
    assert not rep.validity["ok"] and not rep.validity["not_concentrated"]
    assert all(r.param_distance is None and r.error for r in rep.rows)


def test_match_components_degenerate():
    theta = MixtureParams.from_arrays([0.5, 0.5], [[0.0, 0.0], [0.0, 0.0]], [np.eye(2)] * 2, G)
    order, degenerate = match_components(theta, np.array([[0.0, 0.0], [10.0, 0.0]]))
    assert degenerate
    assert sorted(order.tolist()) == [0, 1]


def test_containment_single_component():
    spec = ShiftedMixtureSpec.collinear([UniformBall(1.0, 2)], [1.0], [0.0], epsilon=0.995, eta=0.01)
    theta = MixtureParams.from_arrays([1.0], [[5.0, 5.0]], [np.eye(2)], G)
    np.testing.assert_array_equal(central_set_containment(theta, spec, 0, 500, 1).fractions, [1.0])


def test_containment_at_extreme_separation():
    spec = ShiftedMixtureSpec.collinear([GaussianLaw(np.eye(2))] * 2, [0.5, 0.5], [50.0], epsilon=3.0, eta=0.01)
    rep = run_separation_experiment(spec, [0], FitConfig(K=2, n_starts=3), 2000, seed=2)
    np.testing.assert_array_equal(rep.rows[0].containment, [1.0, 1.0])
    assert not rep.rows[0].matching_degenerate


def test_well_specified_errors_are_small():
    spec = ShiftedMixtureSpec.collinear([GaussianLaw(np.eye(2))] * 2, [0.4, 0.6], [40.0], epsilon=3.0, eta=0.01)
    n = 5000
    row = run_separation_experiment(spec, [0], FitConfig(K=2, n_starts=3), n, seed=3).rows[0]
    # standard errors of weight, mean and covariance estimates in a component of size xi n
    nk = 0.4 * n
    assert np.all(row.weight_error < 3 * math.sqrt(0.24 / n))
    assert np.all(row.mean_error < 3 * math.sqrt(2 / nk))
    assert np.all(row.cov_error < 3 * math.sqrt(4 / nk))


def test_separation_schedule_shadows():
    # start from overlapping components so the schedule actually has something to show
    spec = ball_spec(gaps=(1.0, 2.0, 4.0, 8.0))
    cfg = FitConfig(K=2, n_starts=3)
    for seed in range(3):
        rows = run_separation_experiment(spec, range(4), cfg, 2000, seed=seed, n_test=1000).rows
        cont = np.array([r.containment.min() for r in rows])
        drops = np.diff(cont)
        assert np.sum(drops < 0) <= 1 and np.all(drops > -0.02)
        assert rows[-1].weight_error.max() < rows[0].weight_error.max()


def test_separation_is_reproducible_across_workers():
    spec = ball_spec(gaps=(2.0, 6.0))
    cfg = FitConfig(K=2, n_starts=2)
    a = run_separation_experiment(spec, [0, 1], cfg, 800, seed=1, n_test=300)
    b = run_separation_experiment(spec, [0, 1], cfg, 800, seed=1, n_test=300, n_jobs=2)
    for ra, rb in zip(a.rows, b.rows):
        assert ra.cov_error.tobytes() == rb.cov_error.tobytes()
        assert ra.containment.tobytes() == rb.containment.tobytes()
