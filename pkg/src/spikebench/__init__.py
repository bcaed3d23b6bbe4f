"""Spike-sorting evaluation toolkit.

Synthetic ground-truthed recordings, a detection/alignment/feature/cluster
pipeline with a crossbar-simulated wavelet front end, and scoring against
detection, classification, cluster-compactness and hardware-cost criteria.
"""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
