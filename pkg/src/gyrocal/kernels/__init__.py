"""Propagation kernel backends.

The per-sample mechanize-and-predict loop dominates the runtime of a
calibration run, so it exists twice: a compiled Cython kernel (`_fast`)
and the pure-numpy reference (`pure`). The backend is selected at import
time; set ``GYROCAL_BACKEND=pure`` or ``=fast`` to force one (``fast``
raises if the extension is not built). ``benchmarks/bench_kernels.py``
compares the two.
"""

from __future__ import annotations

import os

from . import pure
from .types import BlockHealth, KernelParams

__all__ = ["propagate_block", "BACKEND", "BlockHealth", "KernelParams", "available_backends"]

_choice = os.environ.get("GYROCAL_BACKEND", "auto").lower()

if _choice not in ("auto", "fast", "pure"):
    raise ValueError(f"GYROCAL_BACKEND must be auto, fast or pure, not {_choice!r}")

def _load_fast():
    try:
        from importlib import import_module

        return import_module(__name__ + "._fast")
    except ImportError:
        return None


_fast = _load_fast() if _choice in ("auto", "fast") else None
if _choice == "fast" and _fast is None:
    raise ImportError(
        "GYROCAL_BACKEND=fast but the compiled kernel is unavailable; "
        "build it with 'pip install -e . --no-build-isolation'"
    )

if _fast is not None:
    BACKEND = "fast"
    propagate_block = _fast.propagate_block
else:
    BACKEND = "pure"
    propagate_block = pure.propagate_block


def available_backends() -> dict[str, object]:
    """Map of importable backend name -> propagate_block callable."""
    out = {"pure": pure.propagate_block}
    if _fast is not None:
        out["fast"] = _fast.propagate_block
    return out
