"""Kernel backend selection.

The compiled extension is used when it was built and ``EPIDMD_PURE_PYTHON`` is
unset; otherwise the numpy fallback.  Both backends produce identical results.
"""

import os

from . import _kernels_py

try:
    if os.environ.get("EPIDMD_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

backend = "compiled" if _compiled is not None else "python"
_impl = BACKENDS[backend]

count_infected_neighbors = _impl.count_infected_neighbors
set_slot_edges = _impl.set_slot_edges
