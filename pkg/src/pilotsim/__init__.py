"""Link-level simulator for uplink pilot precoding/combining in multiuser MIMO.

Subpackages
-----------
linalg       complex-matrix primitives (structured products, Hermitian eigentools)
channel      cluster channel model, steering vectors, second-order statistics
pilot        pilot schemes, MMSE estimation, error covariances, NMSE bounds
rate         data-phase precoding and sum-rate evaluation
experiments  seeded sweep engine, config ingestion, CSV output, CLI
"""

from pilotsim.linalg import NumericalError

__all__ = ["NumericalError"]
__version__ = "0.1.0"
