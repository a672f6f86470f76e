"""Conformal prediction intervals from a bootstrap ensemble with out-of-bag residuals.

B point models are fit on with-replacement resamples; every training row is
scored only by the members whose bootstrap excluded it, producing a residual
set that never saw its own row. Intervals are the aggregated point prediction
plus/minus the empirical (1 - alpha) quantile of absolute residuals
(higher-interpolation convention). Under chronological splits a sliding
window over the most recent residuals keeps the intervals sequential.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np


class BaseLearner(Protocol):
    def fit(self, X: np.ndarray, y: np.ndarray) -> "BaseLearner": ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...


class LinearLearner:
    """Ordinary least squares with an intercept; NaNs imputed at column means."""

    def __init__(self):
        self.coef_: np.ndarray | None = None
        self.col_means_: np.ndarray | None = None

    def _fill(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if np.isnan(X).any():
            X = np.where(np.isnan(X), self.col_means_, X)
        return X

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LinearLearner":
        X = np.asarray(X, dtype=float)
        means = np.nanmean(X, axis=0)
        self.col_means_ = np.where(np.isnan(means), 0.0, means)
        X = self._fill(X)
        design = np.column_stack([X, np.ones(len(X))])
        self.coef_, *_ = np.linalg.lstsq(design, np.asarray(y, dtype=float), rcond=None)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = self._fill(X)
        return np.column_stack([X, np.ones(len(X))]) @ self.coef_


@dataclass
class EnbpiModel:
    members: list
    bootstrap_rows: list[np.ndarray]
    residuals: np.ndarray  # signed, in train-row order
    alpha: float
    aggregator: str
    uncovered_rows: tuple[int, ...]

    def point(self, X: np.ndarray) -> np.ndarray:
        preds = np.stack([m.predict(X) for m in self.members])
        if self.aggregator == "median":
            return np.median(preds, axis=0)
        return preds.mean(axis=0)

    def quantile(self, window: int | None = None) -> float:
        residuals = self.residuals
        if window is not None:
            residuals = residuals[-window:]
        if residuals.size == 0:
            raise ValueError("no residuals available")
        return float(np.quantile(np.abs(residuals), 1.0 - self.alpha, method="higher"))

    def interval(
        self, X: np.ndarray, window: int | None = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(lo, hi, point): symmetric conformal band around the point prediction."""
        point = self.point(X)
        q = self.quantile(window)
        return point - q, point + q, point


def enbpi_fit(
    X: np.ndarray,
    y: np.ndarray,
    learner_factory: Callable[[], BaseLearner],
    *,
    n_members: int = 30,
    alpha: float = 0.1,
    seed: int = 0,
    aggregator: str = "mean",
    max_redraws: int = 10,
) -> EnbpiModel:
    """Fit the bootstrap ensemble and the out-of-bag residual set.

    Resampling is redrawn wholesale (up to ``max_redraws`` times) until every
    row is out-of-bag for at least one member; rows still uncovered after
    that are excluded from the residual set and reported.
    """
    if n_members < 10:
        raise ValueError(f"need at least 10 ensemble members, got {n_members}")
    if aggregator not in ("mean", "median"):
        raise ValueError(f"unknown aggregator {aggregator!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(X)
    rng = np.random.default_rng(seed)

    for _ in range(max_redraws):
        samples = [rng.integers(0, n, size=n) for _ in range(n_members)]
        in_bag = np.zeros((n_members, n), dtype=bool)
        for b, rows in enumerate(samples):
            in_bag[b, rows] = True
        uncovered = np.flatnonzero(in_bag.all(axis=0))
        if uncovered.size == 0:
            break

    members = [learner_factory().fit(X[rows], y[rows]) for rows in samples]
    preds = np.stack([m.predict(X) for m in members])  # (B, n)

    oob = ~in_bag
    covered = oob.any(axis=0)
    if aggregator == "median":
        masked = np.ma.masked_array(preds, mask=in_bag)
        oob_pred = np.ma.median(masked, axis=0).filled(np.nan)
    else:
        counts = oob.sum(axis=0)
        sums = np.where(oob, preds, 0.0).sum(axis=0)
        with np.errstate(invalid="ignore"):
            oob_pred = sums / counts
    residuals = (y - oob_pred)[covered]

    return EnbpiModel(
        members=members,
        bootstrap_rows=[np.asarray(s) for s in samples],
        residuals=residuals,
        alpha=alpha,
        aggregator=aggregator,
        uncovered_rows=tuple(int(i) for i in np.flatnonzero(~covered)),
    )
