"""Hot loops of the volatility likelihoods.

The compiled ``_recursions`` extension is used when it was built;
otherwise, or when ``EMGVB_NO_BINARY`` is set, the pure Python versions
are selected at import time.  ``BACKEND`` names the active one.
"""
import os

from . import _recursions_python as python_backend

compiled_backend = None
if not os.environ.get("EMGVB_NO_BINARY"):
    try:
        from . import _recursions as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

gjr_recursion = _active.gjr_recursion
egarch_recursion = _active.egarch_recursion
figarch_weights = _active.figarch_weights
gaussian_loglik_rows = _active.gaussian_loglik_rows

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "gjr_recursion",
    "egarch_recursion",
    "figarch_weights",
    "gaussian_loglik_rows",
]
