"""Backend selection for the hot kernels.

The compiled extension is preferred when importable; the numpy fallback is
semantically identical. Set MBKL_BACKEND=compiled|fallback|auto to override
(auto is the default). Forcing "compiled" raises if the extension is missing
rather than silently degrading.
"""

import os
import warnings

from . import _core_py

_choice = os.environ.get("MBKL_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "compiled", "fallback"):
    warnings.warn(f"unknown MBKL_BACKEND value {_choice!r}; using auto")
    _choice = "auto"

if _choice == "fallback":
    core = _core_py
elif _choice == "compiled":
    from . import _core as core  # noqa: F401
else:
    try:
        from . import _core as core  # noqa: F401
    except ImportError:
        core = _core_py

BACKEND = core.NAME


def backend_name():
    return BACKEND


def words_for(n_bits):
    """Number of 64-bit words needed for n_bits packed bits."""
    return (int(n_bits) + 63) >> 6
