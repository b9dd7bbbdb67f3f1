"""Backend selection for the dot-product kernel.

The compiled extension is used when importable. Setting the environment
variable ``SIMFILTER_BACKEND=python`` forces the numpy fallback; both give
bit-identical results.
"""

from __future__ import annotations

import logging
import os

from simfilter import _pykernel

log = logging.getLogger(__name__)

_requested = os.environ.get("SIMFILTER_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _pykernel
    BACKEND = "python"
else:
    try:
        from simfilter import _ckernel as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        log.debug("compiled kernel unavailable, using numpy fallback")
        _impl = _pykernel
        BACKEND = "python"

dot_matrix = _impl.dot_matrix
squared_norms = _impl.squared_norms

_threads = 1


def set_threads(n: int) -> None:
    """Bound the number of worker threads used by the kernel."""
    global _threads
    if n < 1:
        raise ValueError(f"threads must be >= 1, got {n}")
    _threads = int(n)


def get_threads() -> int:
    return _threads
