import logging

import numpy as np
import pytest

from src.core.errors import ScreeningError
from src.core.rng import make_rng
from src.selection.screening import marginal_scores, sis_screen


class TestSisScreen:
    def test_keep_all(self, rng):
        X = rng.standard_normal((20, 6))
        result = sis_screen(X, rng.standard_normal(20), 6)
        assert result.kept == tuple(range(6))

    def test_keep_more_than_p(self, rng):
        X = rng.standard_normal((20, 4))
        assert len(sis_screen(X, rng.standard_normal(20), 10).kept) == 4

    def test_perfect_correlation_ranked_first(self, rng):
        X = rng.standard_normal((50, 8))
        result = sis_screen(X, X[:, 2].copy(), 1)
        assert result.kept == (2,)
        assert result.scores[2] == pytest.approx(1.0)
        assert result.ranked[0] == 2

    def test_ties_go_to_lower_index(self, rng):
        x = rng.standard_normal(30)
        X = np.column_stack([rng.standard_normal(30), x, x, x])
        assert sis_screen(X, x, 2).kept == (1, 2)

    def test_kept_sorted(self, sparse_dataset):
        dataset, _ = sparse_dataset
        kept = sis_screen(dataset.X, dataset.Y, 5).kept
        assert list(kept) == sorted(kept)
        assert {0, 3, 7} <= set(kept)

    def test_scale_invariance(self, sparse_dataset):
        dataset, _ = sparse_dataset
        X = dataset.X.copy()
        X[:, 5] *= 40.0
        np.testing.assert_allclose(marginal_scores(X, dataset.Y), marginal_scores(dataset.X, dataset.Y))

    def test_permutation_equivariance(self, sparse_dataset):
        dataset, _ = sparse_dataset
        perm = make_rng(2).permutation(dataset.p)
        kept = sis_screen(dataset.X, dataset.Y, 4).kept
        kept_perm = sis_screen(dataset.X[:, perm], dataset.Y, 4).kept
        assert sorted(perm[list(kept_perm)]) == list(kept)

    def test_constant_column_scores_zero(self, rng, caplog):
        X = np.column_stack([np.full(25, 3.0), rng.standard_normal(25)])
        with caplog.at_level(logging.WARNING, logger="src.selection.screening"):
            result = sis_screen(X, rng.standard_normal(25), 1)
        assert result.scores[0] == 0.0
        assert result.kept == (1,)
        assert "constant column" in caplog.text

    def test_constant_response_raises(self, rng):
        with pytest.raises(ScreeningError, match="constant"):
            sis_screen(rng.standard_normal((10, 3)), np.ones(10), 2)

    def test_d_keep_must_be_positive(self, rng):
        with pytest.raises(ValueError):
            sis_screen(rng.standard_normal((10, 3)), rng.standard_normal(10), 0)

    @pytest.mark.slow
    def test_sure_screening_experiment_three_design(self):
        from src.datamodel.generator import TrueModel, draw_sample, make_beta
        from src.datamodel.models import CoefficientSpec

        spec = CoefficientSpec(
            beta_I=(1.0, -1.5, 2.0, 1.1, -3.0, 1.2, 1.8, -2.5, -2.0, 1.0),
            I=tuple(range(1, 11)),
            seed=1,
        )
        beta = make_beta(spec, 500)
        model = TrueModel(beta=beta, rho_corr=0.1, mu=np.zeros(500), sigma_eps=1.0)
        kept_signals = 0
        for rep in range(50):
            X, Y = draw_sample(model, 100, make_rng(99, rep))
            kept_signals += len(set(range(10)) & set(sis_screen(X, Y, 99).kept))
        assert kept_signals / 500 >= 0.85
