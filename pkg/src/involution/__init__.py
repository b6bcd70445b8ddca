"""Involution operators, RedNet backbones, reverse-mode autodiff and an
analytic cost model, all in double-precision numpy.

The operator at the center of the library generates a K x K kernel per
output position from the pixel at that position and applies it across
channel groups, the mirror image of convolution's spatially shared,
channel-specific filters. Windowed self-attention drops out of the same
multiply-add engine by treating query-key affinities as generated kernels.
"""

from .tensor import Prng, ShapeError, Tensor
from .autodiff import Parameter, Tape, apply, backward, grad_check
from . import ops, naive, rednet

__version__ = "0.1.0"

__all__ = [
    "Prng",
    "ShapeError",
    "Tensor",
    "Parameter",
    "Tape",
    "apply",
    "backward",
    "grad_check",
    "ops",
    "naive",
    "rednet",
    "__version__",
]
