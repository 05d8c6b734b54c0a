"""Backend selection for the hot kernels.

Prefers the compiled extension; falls back to the pure-numpy module with
identical signatures.  Set FRACODE_PURE=1 to force the fallback (useful
for benchmarking and debugging).
"""

import os

if os.environ.get("FRACODE_PURE") == "1":
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels

        BACKEND = "python"

block_rhs = kernels.block_rhs
block_integrals = kernels.block_integrals
block_solve = kernels.block_solve
segment_dot = kernels.segment_dot
add_at_heads = kernels.add_at_heads
schur_reduce = kernels.schur_reduce
schur_expand = kernels.schur_expand
newton_rhs = kernels.newton_rhs
scaled_sqnorm3 = kernels.scaled_sqnorm3
accumulate_w = kernels.accumulate_w
error_rhs = kernels.error_rhs
extrapolate_collocation = kernels.extrapolate_collocation
