import logging

import numpy as np
import pytest

from copulas import CopulaModel, IndependenceCopula, PairCopulaModel
from marginals import fit_ecdf, order_statistic_index
from pair_copulas import GaussianPair
from quantile import (
    LevelCurveError,
    QuantileResult,
    eif,
    grad_cdf,
    one_step,
    one_step_with_flag,
    optimize_level_curve,
    to_score_space,
)


class ComonotoneCopula(CopulaModel):
    kind = "comonotone"

    def _cdf(self, points):
        return points.min(axis=1)


def test_independence_level_curve_is_symmetric():
    u_star = optimize_level_curve(IndependenceCopula(2), 0.1, seed=0)
    assert np.allclose(u_star, np.sqrt(0.9), atol=0.01)
    assert np.prod(u_star) >= 0.9


def test_one_dimensional_level_curve_is_exact():
    assert optimize_level_curve(IndependenceCopula(1), 0.1).tolist() == [0.9]


def test_comonotone_level_curve():
    u_star = optimize_level_curve(ComonotoneCopula(2), 0.1, seed=1)
    assert np.allclose(u_star, [0.9, 0.9], atol=0.01)


def test_linf_norm_objective():
    u_star = optimize_level_curve(IndependenceCopula(2), 0.1, norm="linf", seed=2)
    assert np.max(u_star) == pytest.approx(np.sqrt(0.9), abs=0.01)


def test_optimizer_never_beats_the_symmetric_point_under_dependence():
    copula = PairCopulaModel(GaussianPair(0.6))
    u_star = optimize_level_curve(copula, 0.1, seed=3)
    assert copula.cdf(u_star) >= 0.9
    assert u_star.sum() <= 2 * np.sqrt(0.9) + 1e-2


def test_optimizer_validates_alpha():
    with pytest.raises(ValueError):
        optimize_level_curve(IndependenceCopula(2), 1.0)


def test_unreachable_level_curve():
    class CappedCopula(CopulaModel):
        kind = "capped"

        def _cdf(self, points):
            return 0.5 * points.prod(axis=1)

    with pytest.raises(LevelCurveError, match="level curve unreachable"):
        optimize_level_curve(CappedCopula(2), 0.1)


def test_gradient_of_product_copula():
    assert np.allclose(grad_cdf(IndependenceCopula(2), [0.5, 0.5]), [0.5, 0.5], atol=1e-9)
    assert np.allclose(grad_cdf(IndependenceCopula(3), [0.9, 0.9, 0.9]), 0.81, atol=1e-9)


def test_gradient_is_one_sided_at_the_border():
    assert np.allclose(grad_cdf(IndependenceCopula(2), [0.995, 0.5]), [0.5, 0.995], atol=1e-9)


@pytest.mark.parametrize("point", [(0.5, 0.5), (0.3, 0.7), (0.8, 0.2), (0.9, 0.9), (0.15, 0.4)])
def test_gradient_matches_gaussian_h_functions(point):
    pair = GaussianPair(0.5)
    u, v = point
    analytic = [pair.hfunc(v, u), pair.hfunc(u, v)]
    assert np.allclose(grad_cdf(PairCopulaModel(pair), point), analytic, atol=1e-2)


def test_eif_coefficients():
    grad = np.array([0.6, 0.8])
    u_star = np.array([0.9, 0.9])
    inside = eif([0.5, 0.5], u_star, grad, 0.1)
    outside = eif([0.95, 0.5], u_star, grad, 0.1)
    assert np.allclose(inside, -0.1 * grad)
    assert np.allclose(outside, 0.9 * grad)


def test_eif_in_one_dimension_is_the_quantile_influence():
    f_q = 2.0
    assert eif([0.3], [0.9], [f_q], 0.1) == pytest.approx([(0.9 - 1.0) / f_q])
    assert eif([0.95], [0.9], [f_q], 0.1) == pytest.approx([0.9 / f_q])


def test_eif_rejects_flat_gradient():
    with pytest.raises(LevelCurveError, match="degenerate level curve"):
        eif([0.5, 0.5], [0.9, 0.9], [0.0, 0.0], 0.1)


def test_eif_has_mean_zero_under_the_model():
    rng = np.random.default_rng(12)
    sample = rng.uniform(size=(10_000, 2))
    u_star = np.full(2, np.sqrt(0.9))
    values = eif(sample, u_star, u_star[::-1], 0.1)
    se = values.std(axis=0, ddof=1) / np.sqrt(len(values))
    assert np.all(np.abs(values.mean(axis=0)) <= 3 * se)


def test_one_step_fixed_point():
    u_star = np.array([0.8, 0.8])
    pseudo = np.vstack([np.full((9, 2), 0.5), [[0.85, 0.85]]])
    assert np.allclose(one_step(u_star, pseudo, [0.7, 0.7], 0.1), u_star)


def test_one_step_moves_outward_when_undercovered():
    u_star = np.array([0.5, 0.5])
    pseudo = np.vstack([np.full((5, 2), 0.3), np.full((5, 2), 0.7)])
    point = one_step(u_star, pseudo, [0.5, 0.5], 0.1)
    assert np.all(point > u_star)


def test_one_step_clamps_and_logs(caplog):
    u_star = np.array([0.9, 0.9])
    pseudo = np.full((10, 2), 0.95)
    with caplog.at_level(logging.INFO, logger="quantile"):
        point, clamped = one_step_with_flag(u_star, pseudo, [0.05, 0.05], 0.1)
    assert clamped
    assert np.allclose(point, 10 / 11)
    assert "clamped" in caplog.text


def test_to_score_space_marks_unreachable_levels():
    ecdfs = [fit_ecdf(np.arange(1.0, 10.0)), fit_ecdf(np.arange(1.0, 10.0))]
    q = to_score_space([0.5, 0.95], ecdfs)
    assert q[0] == 5.0 and np.isinf(q[1])


def test_to_score_space_reproduces_split_conformal_order_statistic():
    rng = np.random.default_rng(4)
    scores = rng.exponential(size=37)
    level = order_statistic_index(0.9, 37) / 38
    k = int(np.ceil(0.9 * 38))
    assert to_score_space([level], [fit_ecdf(scores)])[0] == np.sort(scores)[k - 1]


def test_quantile_result_serializes_infinity():
    result = QuantileResult(u_star=np.array([0.9, 0.95]), gradient=np.array([0.5, 0.4]),
                            q_scores=np.array([1.0, np.inf]), alpha=0.1)
    data = result.to_dict()
    assert data["q_scores"] == [1.0, float("inf")]
    assert data["u_one_step"] is None
