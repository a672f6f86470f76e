"""In-context example selection (geographic, hedonic, mixed) and the kNN baseline.

Geographic neighbors rank by great-circle distance, hedonic neighbors by
cosine distance between train-standardized feature vectors. The mixed mode
takes five of each, backfilling duplicates from the geographic ranking.
The kNN baseline reuses the exact same selection so prompt examples and
baseline neighbors are always the same records.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import PropertyRecord, TrainStats
from .geospatial import haversine_to_many

log = logging.getLogger(__name__)

MODES = ("geo", "hedonic", "mixed")
MIXED_COUNT = 10
INDEX_THRESHOLD = 50_000  # pools larger than this use a spatial/metric index


class SelectionError(Exception):
    pass


@dataclass(frozen=True)
class SelectionSpec:
    """How to pick in-context examples: ranking mode and neighbor count."""

    mode: str
    count: int
    exclude_future: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown selection mode {self.mode!r}")
        if self.count <= 0:
            raise ValueError("selection count must be positive")
        if self.mode == "mixed" and self.count != MIXED_COUNT:
            raise ValueError("mixed selection is defined only for count=10")

    @property
    def label(self) -> str:
        return f"{self.count}-{self.mode}"


@dataclass(frozen=True)
class StandardizedVector:
    """Z-scored numeric features with a presence mask (train statistics only)."""

    values: np.ndarray
    mask: np.ndarray
    names: tuple[str, ...]


def standardize(rec: PropertyRecord, stats: TrainStats) -> StandardizedVector:
    """Z-score the record's numeric features against train statistics.

    Missing values are imputed with the train median before scoring;
    features with zero train spread map to 0 regardless of value.
    Coordinates, date, and price never enter the hedonic vector.
    """
    names = tuple(stats.means.keys())
    values = np.zeros(len(names))
    mask = np.zeros(len(names), dtype=bool)
    for i, name in enumerate(names):
        raw = rec.features.get(name)
        mask[i] = raw is not None
        if raw is None:
            raw = stats.medians[name]
        std = stats.stds[name]
        values[i] = (raw - stats.means[name]) / std if std > 0 else 0.0
    return StandardizedVector(values=values, mask=mask, names=names)


def cosine_distance(u: StandardizedVector, v: StandardizedVector) -> float:
    """1 - cos(angle) over the jointly present features; in [0, 2].

    A zero-norm side makes the angle undefined; the distance is then fixed
    at 1 (maximally uninformative) and logged.
    """
    joint = u.mask & v.mask
    uu = u.values * joint
    vv = v.values * joint
    nu = float(np.dot(uu, uu))
    nv = float(np.dot(vv, vv))
    if nu == 0.0 or nv == 0.0:
        log.debug("cosine distance on zero-norm vector; returning 1.0")
        return 1.0
    return float(1.0 - np.dot(uu, vv) / math.sqrt(nu * nv))


class ComparableSelector:
    """Repeated-query neighbor search over a fixed pool.

    Precomputes coordinate and standardized-feature arrays once. Pools above
    ``index_threshold`` complete records are served by a KD-tree over metric
    embeddings; smaller pools (and pools with missing values) use an exact
    exhaustive scan. Both paths apply the same (distance, id) tie rule.
    """

    def __init__(
        self,
        pool: Sequence[PropertyRecord],
        stats: TrainStats,
        index_threshold: int = INDEX_THRESHOLD,
    ):
        self.pool = list(pool)
        self.stats = stats
        n = len(self.pool)
        self.ids = np.array([r.id for r in self.pool])
        self.lats = np.array([r.lat for r in self.pool])
        self.lons = np.array([r.lon for r in self.pool])
        self.prices = np.array([r.price for r in self.pool], dtype=float)
        self.date_ordinals = np.array([r.date.toordinal() for r in self.pool])

        vectors = [standardize(r, stats) for r in self.pool]
        self.z = np.array([v.values for v in vectors]) if n else np.zeros((0, 0))
        self.z_mask = np.array([v.mask for v in vectors]) if n else np.zeros((0, 0), dtype=bool)
        self._complete = bool(self.z_mask.all()) if n else True

        self._geo_tree = None
        self._hedonic_tree = None
        if n > index_threshold and self._complete:
            self._build_indexes()

    def _build_indexes(self):
        from scipy.spatial import cKDTree

        phi = np.radians(self.lats)
        lam = np.radians(self.lons)
        xyz = np.column_stack(
            [np.cos(phi) * np.cos(lam), np.cos(phi) * np.sin(lam), np.sin(phi)]
        )
        self._geo_tree = cKDTree(xyz)
        norms = np.linalg.norm(self.z, axis=1)
        self._unit_rows = np.divide(
            self.z, norms[:, None], out=np.zeros_like(self.z), where=norms[:, None] > 0
        )
        self._zero_norm_rows = norms == 0
        self._hedonic_tree = cKDTree(self._unit_rows)

    # -- distance vectors ------------------------------------------------

    def geo_distances(self, target: PropertyRecord) -> np.ndarray:
        return haversine_to_many(target.lat, target.lon, self.lats, self.lons)

    def hedonic_distances(self, target: PropertyRecord) -> np.ndarray:
        u = standardize(target, self.stats)
        joint = self.z_mask & u.mask
        uu = u.values * joint
        vv = self.z * joint
        dots = np.einsum("ij,ij->i", vv, uu)
        nu = np.einsum("ij,ij->i", uu, uu)
        nv = np.einsum("ij,ij->i", vv, vv)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = dots / np.sqrt(nu * nv)
        dist = 1.0 - cos
        dist[(nu == 0) | (nv == 0)] = 1.0
        return dist

    # -- ranking ----------------------------------------------------------

    def _candidate_mask(self, target: PropertyRecord, spec: SelectionSpec) -> np.ndarray:
        if not spec.exclude_future:
            return np.ones(len(self.pool), dtype=bool)
        return self.date_ordinals <= target.date.toordinal()

    def _rank(self, dist: np.ndarray, candidates: np.ndarray, k: int) -> list[int]:
        """Indices of the k smallest distances among candidates, ties by id."""
        idx = np.flatnonzero(candidates)
        order = np.lexsort((self.ids[idx], dist[idx]))
        return idx[order[:k]].tolist()

    def _rank_indexed(self, target, mode: str, candidates: np.ndarray, k: int) -> list[int]:
        """KD-tree shortlist refined to the exact (distance, id) order."""
        tree = self._geo_tree if mode == "geo" else self._hedonic_tree
        if mode == "geo":
            phi, lam = math.radians(target.lat), math.radians(target.lon)
            q = np.array(
                [math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi)]
            )
        else:
            u = standardize(target, self.stats)
            norm = np.linalg.norm(u.values)
            if norm == 0 or self._zero_norm_rows.any():
                return self._rank(self.hedonic_distances(target), candidates, k)
            q = u.values / norm
        # over-fetch to survive candidate filtering, then include everything
        # at the cut distance so id tie-breaks stay exact
        fetch = min(len(self.pool), max(4 * k, k + 32))
        while True:
            chord, nearest = tree.query(q, k=fetch)
            chord, nearest = np.atleast_1d(chord), np.atleast_1d(nearest)
            keep = np.isfinite(chord)
            chord, nearest = chord[keep], nearest[keep]
            if candidates[nearest].sum() >= k or fetch >= len(self.pool):
                break
            fetch = min(len(self.pool), fetch * 4)
        within = tree.query_ball_point(q, r=float(chord[-1]) * (1 + 1e-12) + 1e-12)
        pool_idx = np.array([i for i in within if candidates[i]], dtype=int)
        dist = self.geo_distances(target) if mode == "geo" else self.hedonic_distances(target)
        order = np.lexsort((self.ids[pool_idx], dist[pool_idx]))
        return pool_idx[order[:k]].tolist()

    def _nearest(self, target, mode: str, candidates: np.ndarray, k: int) -> list[int]:
        available = int(candidates.sum())
        if available < k:
            raise SelectionError(
                f"pool too small after filtering: need {k}, have {available} "
                f"(deficit {k - available})"
            )
        tree = self._geo_tree if mode == "geo" else self._hedonic_tree
        if tree is not None:
            return self._rank_indexed(target, mode, candidates, k)
        dist = self.geo_distances(target) if mode == "geo" else self.hedonic_distances(target)
        return self._rank(dist, candidates, k)

    def select_indices(self, target: PropertyRecord, spec: SelectionSpec) -> list[int]:
        candidates = self._candidate_mask(target, spec)
        if spec.mode in ("geo", "hedonic"):
            return self._nearest(target, spec.mode, candidates, spec.count)

        available = int(candidates.sum())
        if available < spec.count:
            raise SelectionError(
                f"pool too small after filtering: need {spec.count}, have {available} "
                f"(deficit {spec.count - available})"
            )
        half = spec.count // 2
        # fetch a longer geographic ranking up front: duplicates with the
        # hedonic half are backfilled from ranks 6, 7, ...
        geo_ranked = self._nearest(target, "geo", candidates, min(available, spec.count + half))
        hedonic_top = self._nearest(target, "hedonic", candidates, half)

        selected = list(geo_ranked[:half])
        chosen = set(selected)
        backfill = (i for i in geo_ranked[half:] if i not in chosen)
        for idx in hedonic_top:
            if idx in chosen:
                try:
                    idx = next(i for i in backfill if i not in chosen)
                except StopIteration:
                    raise SelectionError(
                        "pool too small to deduplicate mixed selection "
                        f"(need {spec.count} distinct records)"
                    )
            selected.append(idx)
            chosen.add(idx)
        return selected

    def select(self, target: PropertyRecord, spec: SelectionSpec) -> list[PropertyRecord]:
        return [self.pool[i] for i in self.select_indices(target, spec)]

    def knn(self, target: PropertyRecord, spec: SelectionSpec, aggregate: str = "mean") -> float:
        """kNN price estimate over the exact records select() would return."""
        idx = self.select_indices(target, spec)
        prices = self.prices[idx]
        if aggregate == "mean":
            return float(prices.mean())
        if aggregate == "median":
            return float(np.median(prices))
        if aggregate == "idw":
            dist = (
                self.geo_distances(target)[idx]
                if spec.mode != "hedonic"
                else self.hedonic_distances(target)[idx]
            )
            weights = 1.0 / np.maximum(dist, 1e-12)
            return float(np.average(prices, weights=weights))
        raise ValueError(f"unknown aggregate {aggregate!r}")


def select_examples(
    target: PropertyRecord,
    spec: SelectionSpec,
    pool: Sequence[PropertyRecord],
    stats: TrainStats,
) -> list[PropertyRecord]:
    """Pick the spec's in-context examples from the pool, nearest first."""
    return ComparableSelector(pool, stats).select(target, spec)


def knn_predict(
    target: PropertyRecord,
    spec: SelectionSpec,
    pool: Sequence[PropertyRecord],
    stats: TrainStats,
    aggregate: str = "mean",
) -> float:
    """kNN baseline sharing select_examples' neighbor choice (unweighted mean)."""
    return ComparableSelector(pool, stats).knn(target, spec, aggregate=aggregate)
