"""Multi-modal image fusion with spatial/frequency-enhanced selective scans.

Library layout:

- ``tensor`` / ``ops`` / ``fft``: float64 autodiff engine and NN primitives
- ``ssm``: zero-order-hold discretization, 1D selective scan, 2D four-direction scan
- ``blocks``: multi-scale scan / channel / spectrum blocks and dynamic fusion
- ``model``: the three-branch fusion network
- ``losses``: intensity + Sobel-gradient fusion and reconstruction losses
- ``metrics`` / ``ranking``: the seven fusion quality metrics and rank aggregation
- ``trainer``: AdamW, warmup/decay schedule, training loop
- ``cli``: fuse / reconstruct / train / eval / rank / synth subcommands
"""

from .tensor import Parameter, ShapeError, Tensor, backward, no_grad

__all__ = ["Tensor", "Parameter", "ShapeError", "backward", "no_grad"]
__version__ = "0.1.0"
