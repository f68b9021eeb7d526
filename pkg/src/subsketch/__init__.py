"""Randomized subspace (right-sketching) methods for ridge-regularized convex optimization.

The package restricts a high-dimensional optimization variable to the range of a
random embedding, solves the resulting low-dimensional program, and recovers an
approximation of the full solution through convex-duality maps.  It provides
oblivious and data-adaptive embeddings, smooth and non-smooth loss models,
deterministic solvers, kernel-space formulations, and a certification harness
for the recovery-error guarantees on synthetic instances.
"""

from subsketch.numkit import SeededRng, thin_svd, spectral_norm
from subsketch.embeddings import EmbeddingSpec, Sketch, build_sketch, whiten
from subsketch.losses import make_loss

__all__ = [
    "SeededRng",
    "thin_svd",
    "spectral_norm",
    "EmbeddingSpec",
    "Sketch",
    "build_sketch",
    "whiten",
    "make_loss",
]

__version__ = "0.1.0"
