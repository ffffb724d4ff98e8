"""Hot numeric kernels with two interchangeable backends.

The numba backend JIT-compiles fused row loops (masked softmax, layer norm,
Adam update, BCE); the numpy backend is a pure-vectorized fallback. Selection
happens once at import via LOGFORMER_NUMBA:

    LOGFORMER_NUMBA=0   force the numpy fallback
    LOGFORMER_NUMBA=1   require numba (ImportError if missing)
    unset               numba when importable, numpy otherwise

Matrix products are deliberately not reimplemented here; BLAS already owns
them. Both backends expose the same function set, compared head to head by
benchmarks/bench_kernels.py.
"""

import os

from . import numpy_backend

_flag = os.environ.get("LOGFORMER_NUMBA", "").strip()

if _flag == "0":
    _impl = numpy_backend
    HAS_NUMBA = False
else:
    try:
        from . import numba_backend as _impl

        HAS_NUMBA = True
    except ImportError:
        if _flag == "1":
            raise
        _impl = numpy_backend
        HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"

masked_softmax_fwd = _impl.masked_softmax_fwd
masked_softmax_bwd = _impl.masked_softmax_bwd
layer_norm_fwd = _impl.layer_norm_fwd
layer_norm_bwd = _impl.layer_norm_bwd
adam_update = _impl.adam_update
bce_logits_fwd = _impl.bce_logits_fwd
bce_logits_bwd = _impl.bce_logits_bwd
