"""bipass: bi-directional low-pass graph filtering and graph learning.

Numpy/scipy implementation of a joint node-and-feature-graph smoother
(ADMM-solved), a graph neural layer built on it, noise-injection
protocols, small-scale training loops, and dataset/checkpoint I/O.
"""

from .bifilter import FilterParams, admm_bifilter, degenerate_filter
from .graphs import Graph, laplacian, normalized_laplacian, smoothness

__all__ = [
    "FilterParams",
    "Graph",
    "admm_bifilter",
    "degenerate_filter",
    "laplacian",
    "normalized_laplacian",
    "smoothness",
]

__version__ = "0.1.0"
