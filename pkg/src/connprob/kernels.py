"""Kernel backend selection.

The compiled extension is used when importable; set ``CONNPROB_PURE_PYTHON=1``
to force the pure-Python fallback.
"""
import os

if os.environ.get("CONNPROB_PURE_PYTHON"):
    from . import _fallback as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        from . import _fallback as _impl

BACKEND = _impl.BACKEND
coeff_series = _impl.coeff_series
series_scan = _impl.series_scan
series_mp = _impl.series_mp
neumaier_sum = _impl.neumaier_sum
