#!/usr/bin/env python3
"""
Tests for the calibrated propensity model and overlap regions
"""

import numpy as np
import pytest

from selate.datagen import PopulationConfig, generate_population
from selate.errors import ConfigError, EstimationError
from selate.model import Dataset
from selate.propensity import (
    ClassifierKind, PropensityConfig, fit_propensity, overlap_filter, predict, region_predicate,
)

LOGISTIC = PropensityConfig(classifier=ClassifierKind.LOGISTIC)


class IdentityPropensity:
    """Stand-in model whose propensity equals x"""

    def predict(self, x):
        return np.asarray(x, dtype=float)


def dataset_from_x(x):
    n = len(x)
    t = np.arange(n) % 2
    zeros = np.zeros(n)
    return Dataset(x=x, t=t, y0=zeros, y1=zeros, y=zeros, selected=np.ones(n, dtype=bool))


class TestFitPropensity:
    """Tests for fit_propensity"""

    def test_logistic_recovers_linear_propensity(self):
        """Calibrated scores track 0.5 + 0.1 x on the unselected population"""
        pop = generate_population(PopulationConfig(n=5000, seed=1))
        model = fit_propensity(pop, folds=5, train_cfg=LOGISTIC, seed=1)
        grid = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        e_hat = predict(model, grid)
        assert np.max(np.abs(e_hat - (0.5 + 0.1 * grid))) < 0.15

    def test_calibration_is_monotone_in_raw_score(self):
        """Isotonic calibration never reverses the classifier ranking"""
        pop = generate_population(PopulationConfig(n=2000, seed=2))
        model = fit_propensity(pop, train_cfg=LOGISTIC, seed=2)
        x = np.linspace(-3, 3, 101)
        order = np.argsort(model.raw_score(x))
        assert np.all(np.diff(model.predict(x)[order]) >= 0)

    def test_predictions_in_unit_interval(self):
        """Probabilities stay in [0, 1], scalar input gives a float"""
        pop = generate_population(PopulationConfig(n=1000, seed=3))
        model = fit_propensity(pop, train_cfg=LOGISTIC, seed=3)
        e_hat = model.predict(np.linspace(-10, 10, 41))
        assert np.all((e_hat >= 0) & (e_hat <= 1))
        assert isinstance(model.predict(0.0), float)

    def test_mlp_classifier(self):
        """A small MLP classifier trains and predicts"""
        pop = generate_population(PopulationConfig(n=400, seed=4))
        cfg = PropensityConfig(classifier=ClassifierKind.MLP, hidden=(8,), folds=3, iterations=100)
        model = fit_propensity(pop, folds=3, train_cfg=cfg, seed=4)
        e_hat = model.predict(pop.x)
        assert e_hat.shape == (400,)
        assert np.all((e_hat >= 0) & (e_hat <= 1))

    def test_degenerate_treatment(self):
        """One arm only"""
        ds = Dataset(x=np.linspace(0, 1, 20), t=np.zeros(20, dtype=int), y0=np.zeros(20),
                     y1=np.zeros(20), y=np.zeros(20), selected=np.ones(20, dtype=bool))
        with pytest.raises(EstimationError, match="degenerate treatment"):
            fit_propensity(ds, train_cfg=LOGISTIC)

    def test_arm_smaller_than_folds(self):
        """Stratified folds need enough units per arm"""
        t = np.zeros(20, dtype=int)
        t[:3] = 1
        ds = Dataset(x=np.linspace(0, 1, 20), t=t, y0=np.zeros(20), y1=np.zeros(20),
                     y=np.zeros(20), selected=np.ones(20, dtype=bool))
        with pytest.raises(EstimationError, match="fewer than 5"):
            fit_propensity(ds, train_cfg=LOGISTIC)

    def test_unknown_classifier(self):
        """Unknown classifier kind"""
        with pytest.raises(ConfigError, match="unknown propensity classifier"):
            PropensityConfig(classifier="forest").validate()


class TestOverlapFilter:
    """Tests for overlap_filter and region_predicate"""

    def test_regions(self):
        """S1 is e >= c, S0 is e <= 1 - c, B is both"""
        ds = dataset_from_x(np.array([0.1, 0.25, 0.5, 0.75, 0.9]))
        regions = overlap_filter(ds, IdentityPropensity(), c=0.25)
        assert regions.s1_indices.tolist() == [1, 2, 3, 4]
        assert regions.s0_indices.tolist() == [0, 1, 2, 3]
        assert regions.b_indices.tolist() == [1, 2, 3]
        assert regions.indices_for(1).tolist() == [1, 2, 3, 4]
        assert regions.indices_for(0).tolist() == [0, 1, 2, 3]

    def test_b_is_intersection(self):
        """B equals S0 intersected with S1"""
        ds = dataset_from_x(np.linspace(0, 1, 37))
        regions = overlap_filter(ds, IdentityPropensity(), c=0.1)
        np.testing.assert_array_equal(regions.b_indices,
                                      np.intersect1d(regions.s0_indices, regions.s1_indices))

    def test_empty_observed(self):
        """No units, empty regions"""
        regions = overlap_filter(Dataset.empty(), IdentityPropensity(), c=0.1)
        assert regions.b_indices.size == 0

    @pytest.mark.parametrize("c", [0.0, 0.5, -0.1])
    def test_threshold_range(self, c):
        """c must lie in (0, 1/2)"""
        with pytest.raises(ConfigError, match="overlap threshold"):
            overlap_filter(dataset_from_x(np.array([0.5])), IdentityPropensity(), c=c)

    def test_region_predicate_is_strict(self):
        """Points exactly on a threshold are outside the open region"""
        contains = region_predicate(IdentityPropensity(), 0.25)
        assert not bool(contains(0.25))
        assert bool(contains(0.5))
        assert not bool(contains(0.75))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
