import logging
import math

import numpy as np
import pytest

from calibration import (
    PredictionSet,
    ScoredSplit,
    ScoreMatrix,
    calibrate_empirical_copula_diagonal,
    calibrate_independent,
    calibrate_scalar,
    calibrate_scalar_split,
    calibrate_semiparametric,
    calibrate_split,
    compute_scores,
    conformal_quantile,
    evaluate,
    form_prediction_set,
    residual_norms,
    run_scheme,
    target_coverage,
)
from config import VALID_SCHEMES, RunConfig


def classical_quantile(scores, alpha):
    n = len(scores)
    k = math.ceil((1 - alpha) * (n + 1))
    return np.inf if k > n else np.sort(scores)[k - 1]


def test_compute_scores():
    scores = compute_scores([[3.0, 1.0]], [[5.0, 1.0]])
    assert scores.values.tolist() == [[2.0, 0.0]]
    assert np.array_equal(compute_scores([[1.0, 7.0]], [[4.0, 2.0]]).values,
                          compute_scores([[4.0, 2.0]], [[1.0, 7.0]]).values)
    with pytest.raises(ValueError, match="NaN"):
        compute_scores([[np.nan, 1.0]], [[1.0, 1.0]])
    with pytest.raises(ValueError):
        compute_scores(np.zeros((3, 2)), np.zeros((3, 3)))


def test_score_matrix_rejects_negative_entries():
    with pytest.raises(ValueError):
        ScoreMatrix(np.array([[1.0, -0.5]]))


def test_prediction_set_volumes():
    rect = PredictionSet("hyperrectangle", [0.0, 0.0], [1.0, 2.0])
    assert rect.log_volume() == pytest.approx(math.log(2) + math.log(4))
    ball = PredictionSet("ball", [0.0, 0.0], [1.0])
    assert ball.log_volume() == pytest.approx(math.log(math.pi))
    diamond = PredictionSet("cross-polytope", [0.0, 0.0], [1.0])
    assert diamond.log_volume() == pytest.approx(math.log(2))
    scaled = PredictionSet("ball", [0.0, 0.0], [1.0], scale=[2.0, 3.0])
    assert scaled.log_volume() == pytest.approx(math.log(math.pi) + math.log(6))
    assert PredictionSet("hyperrectangle", [0.0, 0.0], [1.0, np.inf]).log_volume() == np.inf


def test_prediction_set_membership():
    ball = PredictionSet("ball", [0.0, 0.0], [5.0])
    assert ball.contains([3.0, 4.0])
    assert not ball.contains([3.0, 4.1])
    diamond = PredictionSet("cross-polytope", [0.0, 0.0], [1.0])
    assert diamond.contains([0.5, 0.5]) and not diamond.contains([0.6, 0.5])
    scaled = PredictionSet("cross-polytope", [0.0, 0.0], [1.0], scale=[10.0, 1.0])
    assert scaled.contains([5.0, 0.5])


def test_form_prediction_set():
    degenerate = form_prediction_set([1.0, 2.0], [0.0, 0.0])
    assert degenerate.contains([1.0, 2.0])
    assert not degenerate.contains([1.0, 2.1])
    assert form_prediction_set([0.0], [np.inf]).log_volume() == np.inf


def test_evaluate_counts_coverage_and_volume():
    everything = [form_prediction_set([0.0, 0.0], [np.inf, np.inf]) for _ in range(4)]
    assert evaluate(everything, np.ones((4, 2))) == (1.0, np.inf)

    zero = [form_prediction_set([0.0], [0.0]) for _ in range(3)]
    coverage, _ = evaluate(zero, np.ones((3, 1)))
    assert coverage == 0.0

    residuals = np.concatenate([np.full(90, 0.5), np.full(10, 2.0)])
    sets = [form_prediction_set([0.0], [1.0]) for _ in range(100)]
    coverage, efficiency = evaluate(sets, residuals[:, None])
    assert coverage == pytest.approx(0.9)
    assert efficiency == pytest.approx(math.log(2.0))


def test_target_coverage():
    sets = [form_prediction_set([0.0, 0.0], [1.0, 1.0]) for _ in range(2)]
    assert target_coverage(sets, [[0.5, 2.0], [2.0, 0.5]]) == [0.5, 0.5]
    assert target_coverage([PredictionSet("ball", [0.0], [1.0])], [[0.0]]) is None


def test_conformal_quantile_matches_the_order_statistic():
    rng = np.random.default_rng(11)
    for n in (9, 19, 99):
        scores = rng.exponential(size=n)
        assert conformal_quantile(scores, 0.9) == classical_quantile(scores, 0.1)
    assert conformal_quantile(np.arange(5.0), 0.95) == np.inf


def test_independent_quantile_levels():
    scores = ScoreMatrix(np.column_stack([np.arange(1.0, 10.0), np.arange(11.0, 20.0)]))
    assert calibrate_independent(scores, 0.19).tolist() == [9.0, 19.0]

    rng = np.random.default_rng(0)
    assert np.all(np.isinf(calibrate_independent(ScoreMatrix(rng.exponential(size=(50, 6))), 0.1)))
    assert np.all(np.isfinite(calibrate_independent(ScoreMatrix(rng.exponential(size=(63, 6))), 0.1)))


def test_scalar_scores_and_radius():
    assert residual_norms([[0.0, 0.0]], [[3.0, 4.0]], "l2").tolist() == [5.0]
    assert residual_norms([[0.0, 0.0]], [[3.0, -4.0]], "l1").tolist() == [7.0]
    assert residual_norms([[0.0, 0.0]], [[3.0, -4.0]], "linf").tolist() == [4.0]

    rng = np.random.default_rng(1)
    residual = rng.normal(size=(40, 1))
    for norm in ("l1", "l2", "linf"):
        radius = calibrate_scalar(np.zeros((40, 1)), residual, 0.1, norm)
        assert radius == classical_quantile(np.abs(residual[:, 0]), 0.1)


def test_scalar_split_rescales_targets():
    rng = np.random.default_rng(2)
    labels = rng.normal(size=(200, 2)) * [1.0, 100.0]
    radius, scale = calibrate_scalar_split(np.zeros((200, 2)), labels, 0.1, "linf", 0.5, seed=0)
    assert scale[1] / scale[0] == pytest.approx(100.0, rel=0.4)
    assert 1.0 < radius < 5.0


def test_one_dimensional_semiparametric_collapse():
    rng = np.random.default_rng(2024)
    for trial in range(100):
        n = 10 if trial % 2 else 100
        scores = ScoreMatrix(rng.gamma(2.0, size=(n, 1)))
        result = calibrate_semiparametric(scores, 0.1, correction=False)
        expected = classical_quantile(scores.values[:, 0], 0.1)
        assert result.q_scores[0] == expected
        assert calibrate_independent(scores, 0.1)[0] == expected
        assert result.u_one_step is None


def test_independent_scores_give_symmetric_level_curve():
    rng = np.random.default_rng(5)
    scores = ScoreMatrix(rng.uniform(size=(2000, 2)))
    result = calibrate_semiparametric(scores, 0.1, correction=False, seed=0)
    assert np.max(np.abs(result.u_star - np.sqrt(0.9))) <= 0.02
    # Uniform scores: the score quantile tracks the copula-scale level
    assert np.allclose(result.q_scores, np.sqrt(0.9), atol=0.03)


def test_correction_reports_both_quantiles():
    rng = np.random.default_rng(6)
    scores = ScoreMatrix(rng.exponential(size=(300, 2)))
    result = calibrate_semiparametric(scores, 0.1, correction=True, copula_kind="independence")
    assert result.u_one_step is not None
    assert result.q_plugin is not None
    assert np.all(result.u_one_step <= 300 / 301)


def test_empirical_diagonal_on_comonotone_scores():
    rng = np.random.default_rng(3)
    column = rng.exponential(size=19)
    scores = ScoreMatrix(np.column_stack([column, 2 * column]))
    q = calibrate_empirical_copula_diagonal(scores, 0.1)
    expected = classical_quantile(column, 0.1)
    assert q[0] == expected and q[1] == 2 * expected


def test_empirical_diagonal_on_independent_scores():
    rng = np.random.default_rng(8)
    scores = ScoreMatrix(rng.uniform(size=(4000, 2)))
    q = calibrate_empirical_copula_diagonal(scores, 0.1)
    assert np.allclose(q, np.sqrt(0.9), atol=0.02)


def test_quantiles_shrink_as_alpha_grows():
    rng = np.random.default_rng(9)
    scores = ScoreMatrix(rng.exponential(size=(200, 3)))
    for calibrate in (calibrate_independent, calibrate_empirical_copula_diagonal):
        assert np.all(calibrate(scores, 0.05) >= calibrate(scores, 0.2))


def test_split_adjusted_level_saturates(caplog):
    scores = ScoreMatrix(np.random.default_rng(0).exponential(size=(20, 2)))
    with caplog.at_level(logging.WARNING):
        result = calibrate_split(scores, 0.05, 0.5)
    assert np.all(np.isinf(result.q_scores))
    assert "saturates" in caplog.text


def test_split_needs_ten_points_per_half():
    with pytest.raises(ValueError):
        calibrate_split(ScoreMatrix(np.ones((15, 2))), 0.1, 0.5)


def test_split_variant_is_valid_on_exchangeable_data():
    rng = np.random.default_rng(77)
    cov = np.array([[1.0, 0.6], [0.6, 1.0]])
    covered = []
    for trial in range(200):
        draws = np.abs(rng.multivariate_normal(np.zeros(2), cov, size=140))
        result = calibrate_split(ScoreMatrix(draws[:120]), 0.1, 0.5, seed=trial)
        covered.append(np.mean(np.all(draws[120:] <= result.q_scores, axis=1)))
    assert np.mean(covered) >= 0.9 - 2 * math.sqrt(0.9 * 0.1 / 200)


def test_corrected_split_caps_at_observed_scores():
    rng = np.random.default_rng(10)
    scores = ScoreMatrix(rng.exponential(size=(120, 2)))
    result = calibrate_split(scores, 0.1, 0.5, correction=True, seed=1)
    assert np.all(np.isfinite(result.q_scores))
    assert result.u_one_step is not None


def _scored(n_cal=200, n_test=100, d=2, seed=0):
    rng = np.random.default_rng(seed)
    cal_labels = rng.normal(size=(n_cal, d))
    test_labels = rng.normal(size=(n_test, d))
    return ScoredSplit(np.zeros((n_cal, d)), cal_labels, np.zeros((n_test, d)), test_labels)


def test_every_scheme_produces_a_report():
    config = RunConfig(simulate={"d": 2, "n": 100}, mc_samples=2000)
    scored = _scored()
    for scheme in VALID_SCHEMES:
        report = run_scheme(scheme, scored, config, seed=0, config_hash="abc")
        assert report.error is None, (scheme, report.error)
        assert 0.0 <= report.coverage <= 1.0
        assert len(report.quantile) == 2
        assert report.config_hash == "abc"


def test_scheme_failure_is_recorded(caplog):
    config = RunConfig(simulate={"d": 2, "n": 100})
    with caplog.at_level(logging.WARNING):
        report = run_scheme("plugin", _scored(n_cal=12), config, seed=0)
    assert report.error is not None
    assert math.isnan(report.coverage)
    assert "plugin failed" in caplog.text


def test_unknown_scheme_is_recorded_not_raised():
    report = run_scheme("jackknife", _scored(), RunConfig(simulate={"d": 2, "n": 100}), seed=0)
    assert "unknown scheme" in report.error
