"""Seeded perturbation protocols for features and graph structure.

Every generator derives its own named stream from (seed, case label), so
the four cases never share random state and each is bit-reproducible on
its own. Inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .rng import stream

CASES = ("noise_level", "noise_rate", "structure_mistakes", "feature_rate")

# experiment-facing parameter ranges; the raw ops accept their full domains
_RANGES = {
    "noise_level": (0.0, 0.9),
    "noise_rate": (0.0, 1.0),
    "structure_mistakes": (0.0, 0.015),
    "feature_rate": (1e-12, 1.0),
}


@dataclass(frozen=True)
class NoiseSpec:
    case: str
    value: float
    seed: int

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"case must be one of {CASES}")
        lo, hi = _RANGES[self.case]
        if not lo <= self.value <= hi:
            raise ValueError(f"{self.case} value {self.value} outside [{lo}, {hi}]")

    def apply(self, features: np.ndarray, graph: Graph):
        """Dispatch to the matching generator; returns (features, graph)."""
        if self.case == "noise_level":
            return apply_noise_level(features, self.value, self.seed), graph
        if self.case == "noise_rate":
            return apply_noise_rate(features, self.value, self.seed), graph
        if self.case == "structure_mistakes":
            return features, apply_structure_mistakes(graph, self.value, self.seed)
        return apply_feature_rate(features, self.value, self.seed), graph


def apply_noise_level(X, n_l: float, seed: int) -> np.ndarray:
    """Add i.i.d. N(0, n_l^2) noise to every entry."""
    if n_l < 0:
        raise ValueError("noise level must be non-negative")
    X = np.asarray(X, dtype=np.float64)
    gen = stream(seed, "noise_level")
    return X + gen.normal(0.0, n_l, size=X.shape)


def apply_noise_rate(X, n_r: float, seed: int) -> np.ndarray:
    """Perturb a Bernoulli(n_r) subset of rows, each with its own variance.

    Per-row standard deviations are Uniform(0,1); unselected rows have
    deviation 0 and come back bit-identical.
    """
    if not 0.0 <= n_r <= 1.0:
        raise ValueError("noise rate must lie in [0, 1]")
    X = np.asarray(X, dtype=np.float64)
    gen = stream(seed, "noise_rate")
    mask = gen.random(X.shape[0]) < n_r
    v = gen.uniform(0.0, 1.0, size=X.shape[0])
    sigma = np.where(mask, v, 0.0)
    return X + gen.standard_normal(X.shape) * sigma[:, None]


def apply_structure_mistakes(g: Graph, r: float, seed: int) -> Graph:
    """Toggle each unordered node pair independently with probability r.

    Uses binary edge semantics (benchmark graphs are unweighted): a fired
    pair gains a unit edge if absent and loses its edge if present,
    mirrored below the diagonal. Same (graph, r, seed) twice returns to
    the original graph, since the toggle mask is identical.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError("flip ratio must lie in [0, 1]")
    n = g.n
    gen = stream(seed, "structure_mistakes")
    adj = (g.adjacency.toarray() != 0).astype(bool)
    iu, ju = np.triu_indices(n, k=1)
    flips = gen.random(iu.size) < r
    upper = adj[iu, ju] ^ flips
    new_adj = np.zeros((n, n), dtype=bool)
    new_adj[iu, ju] = upper
    keep = np.flatnonzero(upper)
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    return Graph.from_edges(n, edges)


def apply_feature_rate(X, r_f: float, seed: int) -> np.ndarray:
    """Keep a uniformly chosen, order-preserving ceil(r_f * m) columns."""
    if not 0.0 < r_f <= 1.0:
        raise ValueError("feature rate must lie in (0, 1]")
    X = np.asarray(X, dtype=np.float64)
    m = X.shape[1]
    keep = int(np.ceil(r_f * m))
    if keep == 0 or m == 0:
        raise ValueError("feature rate keeps zero columns")
    gen = stream(seed, "feature_rate")
    cols = np.sort(gen.choice(m, size=keep, replace=False))
    return X[:, cols].copy()
