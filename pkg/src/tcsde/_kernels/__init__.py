"""Integration kernels with compiled/pure-Python backend selection.

The compiled Cython extension is preferred when it was built; the numpy
reference implementation is the fallback and the ground truth for
backend-equivalence tests.  Set ``TCSDE_DISABLE_FAST=1`` to force the
pure-Python backend (used by the benchmark and the test suite).
"""

import os

from . import pyref

ALPHA_FLOOR = pyref.ALPHA_FLOOR
SAFETY_CAP = pyref.SAFETY_CAP

if os.environ.get("TCSDE_DISABLE_FAST", "") not in ("", "0"):
    _backend = pyref
else:
    try:
        from . import _fast as _backend  # type: ignore[attr-defined]
    except ImportError:
        _backend = pyref

BACKEND_NAME = "fast" if _backend is not pyref else "pyref"

rollout_deterministic = _backend.rollout_deterministic
rollout_stochastic = _backend.rollout_stochastic


def available_backends() -> dict:
    """Name -> module for every importable backend (for benchmarks/tests)."""
    backends = {"pyref": pyref}
    try:
        from . import _fast
    except ImportError:
        pass
    else:
        backends["fast"] = _fast
    return backends
