"""dyport: benchmarking toolkit for link prediction on time-sliced concept graphs.

Builds cumulative yearly snapshots from curated-pair and co-occurrence data,
scores every edge's discovery importance with six combined measures, and
evaluates predictor models with typed negative sampling and stratified
ROC-AUC reports.
"""

from dyport._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
