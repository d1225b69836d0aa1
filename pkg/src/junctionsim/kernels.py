"""Kernel backend selection.

The recursion kernel exists twice: a compiled extension (``_kernel_c``,
built from ``_kernel.pyx``) and a pure-Python reference (``_kernel_py``)
with identical semantics.  The compiled one is preferred when importable;
setting the environment variable ``JUNCTIONSIM_PURE=1`` forces the pure
backend, and callers may also request one explicitly.
"""

from __future__ import annotations

import os

from . import _kernel_py

try:  # pragma: no cover - exercised only when the extension is built
    from . import _kernel_c
except ImportError:  # pragma: no cover
    _kernel_c = None

PURE_ENV_VAR = "JUNCTIONSIM_PURE"


def compiled_available() -> bool:
    return _kernel_c is not None


def active_backend() -> str:
    """Name of the backend ``get_kernel(None)`` would return."""
    if os.environ.get(PURE_ENV_VAR, "") not in ("", "0"):
        return "pure"
    return "compiled" if compiled_available() else "pure"


def get_kernel(backend: str | None = None):
    """Return the kernel module for ``backend`` (None/'auto', 'pure', 'compiled')."""
    if backend is None or backend == "auto":
        backend = active_backend()
    if backend == "pure":
        return _kernel_py
    if backend == "compiled":
        if _kernel_c is None:
            raise ImportError(
                "compiled kernel requested but the extension is not built; "
                "reinstall the package or use backend='pure'"
            )
        return _kernel_c
    raise ValueError(f"unknown kernel backend {backend!r}")


__all__ = ["get_kernel", "active_backend", "compiled_available", "PURE_ENV_VAR"]
