"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set ``FASTREACT_PURE=1`` before import to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("FASTREACT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

tridiag_factor = _impl.tridiag_factor
tridiag_solve = _impl.tridiag_solve
reaction_coupled = _impl.reaction_coupled
reaction_reduced = _impl.reaction_reduced
reaction_rate = _impl.reaction_rate
powm = _impl.powm

__all__ = [
    "BACKEND",
    "tridiag_factor",
    "tridiag_solve",
    "reaction_coupled",
    "reaction_reduced",
    "reaction_rate",
    "powm",
]
