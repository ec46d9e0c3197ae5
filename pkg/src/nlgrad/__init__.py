"""Finite-horizon Riesz-type nonlocal gradients on periodic grids.

Kernels, spectral operators, variational problems and numerical sweeps
for the truncated fractional gradient ``D^s_delta``.
"""
from .grid import DomainMask, GridFunction, PeriodicGrid, build_masks, lp_norm
from .kernel import CutoffProfile, KernelParams, q_hat_radial, q_kernel_eval, q_l1_norm
from .nlops import (
    nl_divergence,
    nl_gradient,
    nl_gradient_direct,
    p_translate,
    q_translate,
    reconstruct_from_gradient,
)

__version__ = "0.1.0"

# registers the variational verdict checks alongside the operator sweeps
from . import variational  # noqa: E402,F401
