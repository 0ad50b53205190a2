"""Minimal numeric toolkit: seeded RNG streams, a symmetric eigensolver,
a two-layer perceptron with hand-written gradients, and AdamW.

Hot loops run through :mod:`infoshift.numkit.backend`, which picks the
compiled Cython kernels when the extension built and numpy otherwise.
"""

from .backend import BACKEND_NAME
from .linalg import EigResult, eig_sym
from .mlp import Mlp2
from .optim import AdamWState, adamw_step
from .rng import Rng

__all__ = [
    "BACKEND_NAME",
    "EigResult",
    "eig_sym",
    "Mlp2",
    "AdamWState",
    "adamw_step",
    "Rng",
]
