"""Hot-kernel backend selection.

The compiled Cython backend is preferred when its extension module built;
otherwise (or when ROBUSTIDS_PURE_PYTHON is set) the numpy fallback is used.
Both expose the same functions and are cross-checked in the test suite.
"""

import os

from . import _pure

if os.environ.get("ROBUSTIDS_PURE_PYTHON"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _speed as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

DIST_FLOOR = _pure.DIST_FLOOR
LID_CAP = _pure.LID_CAP

forward_trace = _impl.forward_trace
input_gradient = _impl.input_gradient
logit_value_grad = _impl.logit_value_grad
lid_query = _impl.lid_query
lid_mle = _impl.lid_mle


def available_backends():
    """Name → module for every importable backend (for tests and benchmarks)."""
    backends = {"pure": _pure}
    try:
        from . import _speed

        backends["compiled"] = _speed
    except ImportError:
        pass
    return backends
