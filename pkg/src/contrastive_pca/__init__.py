"""Contrastive PCA toolkit.

Batch solvers (weighted-difference and generalized-eigenvalue
formulations), a streaming solver with local update rules, dataset
generators and loaders, an evaluation harness, and a FastAPI service with
a thin CLI client.
"""

__version__ = "0.1.0"
