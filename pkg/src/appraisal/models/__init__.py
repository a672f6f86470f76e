"""Regression baselines: boosted trees, conformal intervals, Shapley importance."""

from .gbt import GbtParams, GbtRegressor
from .encoding import FeatureEncoder
from .pricing import GbtPriceModel, fit_gbt_price_model
from .conformal import EnbpiModel, LinearLearner, enbpi_fit
from .shapley import ImportanceProfile, importance_profile, shapley_attributions

__all__ = [
    "GbtParams",
    "GbtRegressor",
    "FeatureEncoder",
    "GbtPriceModel",
    "fit_gbt_price_model",
    "EnbpiModel",
    "LinearLearner",
    "enbpi_fit",
    "ImportanceProfile",
    "importance_profile",
    "shapley_attributions",
]
