#!/usr/bin/env python3
"""
Tests for score-based conditional means, selection weights and score training
"""

import numpy as np
import pytest
import torch

from selate.errors import ConfigError, EstimationError
from selate.model import Dataset
from selate.nnet import as_tensor
from selate.scoring import (
    BETA_MAX, RESIDUAL_BOUND, BetaModel, GridSpec, ScoreTrainConfig, fit_score_model,
    score_conditional_mean, score_matching_loss,
)


class GaussianScore:
    """Exact score of N(x, 1) in y"""

    def __init__(self, grid=None):
        self.grid = grid or GridSpec()

    def score(self, x, y):
        return -(np.asarray(y) - np.asarray(x))


class FlatScore:
    """Zero score: a flat density in y"""

    grid = GridSpec()

    def score(self, x, y):
        return np.zeros(np.size(y))


def gaussian_dataset(n=300, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, n)
    t = np.arange(n) % 2
    y0 = x + rng.normal(0, 1, n)
    y1 = 2.0 + x + rng.normal(0, 1, n)
    return Dataset(x=x, t=t, y0=y0, y1=y1, y=np.where(t == 1, y1, y0),
                   selected=np.ones(n, dtype=bool))


class TestGridSpec:
    """Tests for GridSpec"""

    def test_values_and_step(self):
        """Evenly spaced values"""
        grid = GridSpec(0.0, 1.0, 11)
        assert grid.step == pytest.approx(0.1)
        assert grid.values()[-1] == pytest.approx(1.0)

    def test_widened_keeps_spacing(self):
        """Widening doubles the width and keeps the step"""
        grid = GridSpec()
        wide = grid.widened()
        assert wide.step == pytest.approx(grid.step)
        assert wide.y_min == pytest.approx(-22.5)
        assert wide.y_max == pytest.approx(27.5)

    def test_shifted(self):
        """Shift moves both ends"""
        assert GridSpec(0.0, 1.0, 5).shifted(2.0) == GridSpec(2.0, 3.0, 5)

    def test_invalid(self):
        """Empty range or too few points"""
        with pytest.raises(ConfigError):
            GridSpec(1.0, 0.0, 10).validate()
        with pytest.raises(ConfigError):
            GridSpec(0.0, 1.0, 1).validate()


class TestScoreConditionalMean:
    """Tests for score_conditional_mean"""

    def test_exact_gaussian_score(self):
        """Cumulative right sums shift the mean by half a step"""
        model = GaussianScore()
        x = np.array([-3.0, 0.0, 1.5, 3.0])
        means, flagged = score_conditional_mean(model, x, return_flags=True)
        np.testing.assert_allclose(means, x - model.grid.step / 2.0, atol=1e-6)
        assert flagged == 0

    def test_scalar_input(self):
        """Scalar x gives a float"""
        value = score_conditional_mean(GaussianScore(), 0.5)
        assert isinstance(value, float)
        assert value == pytest.approx(0.5, abs=0.05)

    def test_mass_near_boundary_uses_widened_grid(self):
        """A mean two units inside the grid edge is recomputed on the wider grid"""
        model = GaussianScore()
        means, flagged = score_conditional_mean(model, np.array([13.0]), return_flags=True)
        assert means[0] == pytest.approx(13.0 - model.grid.step / 2.0, abs=1e-6)
        assert flagged == 0

    def test_flat_density_is_flagged(self):
        """A flat density keeps boundary mass even on the wider grid"""
        x = np.array([0.0, 1.0, 2.0])
        means, flagged = score_conditional_mean(FlatScore(), x, return_flags=True)
        assert flagged == 3
        np.testing.assert_allclose(means, 2.5)

    def test_explicit_grid(self):
        """A grid argument overrides the model's"""
        grid = GridSpec(-5.0, 5.0, 1001)
        value = score_conditional_mean(GaussianScore(), 0.0, grid=grid)
        assert value == pytest.approx(-grid.step / 2.0, abs=1e-6)

    def test_chunks_agree(self):
        """Results do not depend on chunking"""
        x = np.linspace(-3, 3, 600)
        means = score_conditional_mean(GaussianScore(), x)
        np.testing.assert_allclose(means, x - GridSpec().step / 2.0, atol=1e-6)


class TestBetaModel:
    """Tests for BetaModel"""

    def test_starts_at_one(self):
        """Zero output weights give beta == 1"""
        beta = BetaModel(hidden=10, init_seed=3)
        values = beta.predict(np.linspace(-2, 2, 5), np.linspace(0, 4, 5), 1)
        np.testing.assert_allclose(values, 1.0)

    def test_clamping(self):
        """Weights outside the range are clipped and counted"""
        beta = BetaModel(hidden=2)
        with torch.no_grad():
            beta.net.linear_layers[-1].bias.fill_(20.0)
        values, clamped = beta.clamped(np.zeros(4), np.zeros(4), 0)
        assert clamped == 4
        np.testing.assert_allclose(values, BETA_MAX)

    def test_no_clamping_at_init(self):
        """Initial weights are in range"""
        _, clamped = BetaModel().clamped(np.zeros(3), np.zeros(3), 1)
        assert clamped == 0


class TestScoreMatching:
    """Tests for the score-matching objective and training"""

    def test_loss_is_differentiable_scalar(self):
        """The objective is a scalar with gradients"""
        models = fit_score_model(gaussian_dataset(60), correction=True,
                                 train_cfg=ScoreTrainConfig(hidden=(4,), steps=0))
        data = {arm: as_tensor(np.array([[0.0, 0.5], [1.0, 1.5]])) for arm in (0, 1)}
        loss = score_matching_loss(models, data, models[0].beta, 0.05, 0.05)
        assert loss.dim() == 0
        assert loss.requires_grad

    def test_beta_shared_between_arms(self):
        """Both arms use one selection-weight network"""
        models = fit_score_model(gaussian_dataset(60), correction=True,
                                 train_cfg=ScoreTrainConfig(hidden=(4,), steps=0))
        assert models[0].beta is models[1].beta
        assert models[0].beta is not None

    def test_plain_has_no_beta(self):
        """Uncorrected models carry no beta"""
        models = fit_score_model(gaussian_dataset(60), correction=False,
                                 train_cfg=ScoreTrainConfig(hidden=(4,), steps=0))
        assert models[0].beta is None

    def test_training_reduces_loss(self):
        """Adam lowers the score-matching objective"""
        cfg = ScoreTrainConfig(hidden=(16, 16), steps=300)
        models = fit_score_model(gaussian_dataset(), correction=False, train_cfg=cfg, seed=1)
        trace = models[0].loss_trace
        assert len(trace) == 300
        assert np.all(np.isfinite(trace))
        assert np.mean(trace[-20:]) < np.mean(trace[:20])

    def test_empty_arm(self):
        """Each arm needs data"""
        ds = gaussian_dataset(20)
        with pytest.raises(EstimationError, match="no units in arm 1"):
            fit_score_model(ds.arm(0), correction=False,
                            train_cfg=ScoreTrainConfig(hidden=(4,), steps=0))




class TestScoreModelTails:
    """Tests for the Gaussian base term of the score model"""

    def test_untrained_model_keeps_mass_on_grid(self):
        """At initialization every conditional density decays inside the grid"""
        models = fit_score_model(gaussian_dataset(60), correction=False,
                                 train_cfg=ScoreTrainConfig(hidden=(4,), steps=0))
        means, flagged = score_conditional_mean(models[0], np.linspace(-3, 3, 7), return_flags=True)
        assert flagged == 0
        assert np.all(np.isfinite(means))
        assert np.all(np.abs(means) < 8.0)

    def test_saturated_residual_shifts_mean_by_bound(self):
        """A saturated residual moves the mean RESIDUAL_BOUND standard deviations"""
        models = fit_score_model(gaussian_dataset(60), correction=False,
                                 train_cfg=ScoreTrainConfig(hidden=(4,), steps=0))
        model = models[0]
        with torch.no_grad():
            model.score_net.linear_layers[-1].weight.zero_()
            model.score_net.linear_layers[-1].bias.fill_(1000.0)
        center = float(model.standardizer.center[1])
        scale = float(model.standardizer.y_scale)
        means, flagged = score_conditional_mean(model, np.array([-1.0, 0.0, 1.0]), return_flags=True)
        expected = center + RESIDUAL_BOUND * scale - model.grid.step / 2.0
        np.testing.assert_allclose(means, expected, atol=1e-6)
        assert flagged == 0

    def test_base_network_is_trained(self):
        """The mean and precision network leaves its zero start"""
        models = fit_score_model(gaussian_dataset(), correction=False,
                                 train_cfg=ScoreTrainConfig(hidden=(4,), base_hidden=4, steps=20))
        assert models[0].base_net in models[0].trainable()
        assert np.any(models[0].base_net.weights[-1] != 0.0)

    @pytest.mark.slow
    def test_recovers_linear_gaussian_mean(self):
        """y | x ~ N(1 + x, 0.25): trained conditional means within 0.15 of 1 + x"""
        rng = np.random.default_rng(7)
        n = 2000
        x = rng.uniform(-2, 2, n)
        t = np.arange(n) % 2
        y = 1.0 + x + rng.normal(0, 0.5, n)
        data = Dataset(x=x, t=t, y0=y, y1=y, y=y, selected=np.ones(n, dtype=bool))
        cfg = ScoreTrainConfig(hidden=(32, 32), steps=1500)
        models = fit_score_model(data, correction=False, train_cfg=cfg, seed=3)
        grid_x = np.linspace(-1.5, 1.5, 31)
        for arm in (0, 1):
            means, flagged = score_conditional_mean(models[arm], grid_x, return_flags=True)
            assert flagged == 0
            assert np.mean(np.abs(means - (1.0 + grid_x))) < 0.15


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
