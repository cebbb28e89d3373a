"""Backend selection for the sampling hot loop.

The compiled extension (fkgreen._core, built from _core.pyx) is preferred;
the numpy implementation is the fallback.  Set FKG_CORE=python or FKG_CORE=c
to force a backend (forcing the compiled one raises if it is missing).
"""

from __future__ import annotations

import os

from . import _core_py

_requested = os.environ.get("FKG_CORE", "").strip().lower()

if _requested in ("py", "python"):
    _impl = _core_py
    BACKEND = "python"
elif _requested in ("", "c", "compiled"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested:
            raise
        _impl = _core_py
        BACKEND = "python"
else:
    raise ValueError(f"unknown FKG_CORE value {_requested!r}")

build_bridges = _impl.build_bridges
bridge_accumulate = _impl.bridge_accumulate


def get_backends():
    """Return {name: module} for every importable backend (for benchmarks
    and cross-checks)."""
    out = {"python": _core_py}
    try:
        from . import _core

        out["compiled"] = _core
    except ImportError:
        pass
    return out
