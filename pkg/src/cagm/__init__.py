"""Community-preserving attributed graph model with differentially private fitting."""

from .graph import AttributedGraph, CommunityPartition, GraphFormatError, load_attributed_graph
from .params import CAGMParams, dp_fit, fit
from .sampler import SamplerError, sample_graph

__version__ = "0.1.0"

__all__ = [
    "AttributedGraph",
    "CommunityPartition",
    "GraphFormatError",
    "load_attributed_graph",
    "CAGMParams",
    "fit",
    "dp_fit",
    "sample_graph",
    "SamplerError",
]
