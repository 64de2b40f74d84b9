"""Spectral-clustering filter pruning with soft self-adaption (SCSP).

Clusters each layer's filters with a cosine-similarity spectral embedding,
zeroizes the lowest-effect groups, and lets pruned filters recover during
subsequent training epochs. Ships with FLOPs/sparsity accounting and a
deterministic desk-scale CNN training harness.
"""

from .backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
