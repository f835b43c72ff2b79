"""Weighted k-means on augmented points z = [x, f(x)] and the induced Voronoi mesh."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .abstraction import Mesh
from .errors import ClusteringError, ConfigError
from .geometry import voronoi_cells
from .sysmodel import Box, ResolutionSpec, TransitionDataset

log = logging.getLogger(__name__)

WEIGHT_MODES = ("uniform", "inverse_resolution", "custom")
DEDUP_TOL = 1e-6
BOUNDARY_INSET = 1e-6


@dataclass
class ClusteringConfig:
    k: int
    weight_mode: str = "inverse_resolution"
    max_iters: int = 100
    rng_seed: int = 0
    restarts: int = 5
    custom_weight: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("clustering.k must be at least 1")
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"clustering.weight_mode must be one of {WEIGHT_MODES}")
        if self.max_iters < 1 or self.restarts < 1:
            raise ConfigError("clustering.max_iters and clustering.restarts must be positive")
        if self.weight_mode == "custom" and self.custom_weight is None:
            raise ConfigError("custom weight mode needs a weight function")

    def to_dict(self) -> dict:
        return {"k": self.k, "weight_mode": self.weight_mode, "max_iters": self.max_iters,
                "rng_seed": self.rng_seed, "restarts": self.restarts}


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    objective: float
    history: list[float]


def sample_weights(data: TransitionDataset, cfg: ClusteringConfig,
                   spec: Optional[ResolutionSpec] = None) -> np.ndarray:
    """Per-sample weight, evaluated at the source point x_j."""
    if cfg.weight_mode == "uniform":
        w = np.ones(len(data))
    elif cfg.weight_mode == "inverse_resolution":
        if spec is None:
            raise ConfigError("inverse_resolution weights need a resolution spec")
        w = 1.0 / spec.values(data.X)
    else:
        w = np.asarray(cfg.custom_weight(data.X), dtype=float).reshape(-1)
    if w.shape != (len(data),) or not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise ClusteringError("weights must be finite and strictly positive")
    return w


def _plusplus(Z: np.ndarray, w: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    N = Z.shape[0]
    centers = np.empty((k, Z.shape[1]))
    centers[0] = Z[rng.choice(N, p=w / w.sum())]
    d2 = ((Z - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        p = w * d2
        total = p.sum()
        idx = rng.choice(N, p=p / total) if total > 0 else rng.integers(N)
        centers[c] = Z[idx]
        d2 = np.minimum(d2, ((Z - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(Z, w, k, rng, max_iters) -> KMeansResult:
    C = _plusplus(Z, w, k, rng)
    history: list[float] = []
    labels = None
    for _ in range(max_iters):
        d, new_labels = cKDTree(C).query(Z)
        J = float((w * d ** 2).sum())
        if history:
            assert J <= history[-1] * (1 + 1e-12) + 1e-300, "k-means objective increased"
        history.append(J)
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        wsum = np.bincount(labels, weights=w, minlength=k)
        C_new = np.empty_like(C)
        for dim in range(Z.shape[1]):
            C_new[:, dim] = np.bincount(labels, weights=w * Z[:, dim], minlength=k)
        empty = wsum == 0
        C_new[~empty] /= wsum[~empty][:, None]
        if np.any(empty):
            # reseed each empty cluster at the currently worst-served point
            cost = w * ((Z - C_new[labels]) ** 2).sum(axis=1)
            for c in np.flatnonzero(empty):
                j = int(np.argmax(cost))
                C_new[c] = Z[j]
                cost[j] = 0.0
        C = C_new
    d, labels = cKDTree(C).query(Z)
    J = float((w * d ** 2).sum())
    if J > history[-1] * (1 + 1e-12):
        raise AssertionError("k-means objective increased")
    return KMeansResult(C, labels, J, history)


def kmeans_restarts(data: TransitionDataset, cfg: ClusteringConfig,
                    spec: Optional[ResolutionSpec] = None) -> list[KMeansResult]:
    """All ``cfg.restarts`` weighted Lloyd runs, each seeded by k-means++."""
    N = len(data)
    if N < cfg.k:
        raise ClusteringError(f"need at least k={cfg.k} samples, got {N}")
    Z = np.hstack([data.X, data.FX])
    w = sample_weights(data, cfg, spec)
    rng = np.random.default_rng(cfg.rng_seed)
    return [_lloyd(Z, w, cfg.k, rng, cfg.max_iters) for _ in range(cfg.restarts)]


def weighted_kmeans(data: TransitionDataset, cfg: ClusteringConfig,
                    spec: Optional[ResolutionSpec] = None) -> KMeansResult:
    """Best of ``cfg.restarts`` weighted Lloyd runs by objective."""
    return min(kmeans_restarts(data, cfg, spec), key=lambda r: r.objective)


def dedup_anchors(anchors: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    keep: list[int] = []
    tree = cKDTree(anchors)
    dropped = np.zeros(len(anchors), bool)
    for i in range(len(anchors)):
        if dropped[i]:
            continue
        keep.append(i)
        for j in tree.query_ball_point(anchors[i], tol):
            if j > i:
                dropped[j] = True
    return anchors[keep]


def mesh_from_centroids(centroids, domain: Box) -> Mesh:
    """Voronoi mesh of the centroids' first n coordinates, clipped to the domain."""
    C = np.atleast_2d(np.asarray(centroids, dtype=float))
    n = domain.dim
    if C.shape[1] not in (n, 2 * n):
        raise ClusteringError(f"centroids must have {n} or {2 * n} coordinates")
    anchors = C[:, :n]
    if not np.all(domain.contains(anchors)):
        raise ClusteringError("anchor outside the domain")
    # a centroid of boundary points sits on the boundary; anchors must be interior
    inset = BOUNDARY_INSET * domain.widths
    anchors = np.clip(anchors, domain.lo + inset, domain.hi - inset)
    uniq = dedup_anchors(anchors)
    if len(uniq) < len(anchors):
        if len(uniq) == 1 and len(anchors) > 1:
            raise ClusteringError("all anchors coincide")
        log.info("merged %d near-duplicate anchors", len(anchors) - len(uniq))
    return Mesh(uniq, voronoi_cells(uniq, domain), domain)
