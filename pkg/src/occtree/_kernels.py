"""Kernel backend selection: compiled extension if available, pure Python
otherwise. ``BACKEND`` names the active implementation; set the environment
variable ``OCCTREE_PURE_PYTHON`` to force the fallback."""

import os

_force_py = bool(os.environ.get("OCCTREE_PURE_PYTHON"))

if not _force_py:
    try:
        from ._kernels_cy import (  # type: ignore[attr-defined]
            BACKEND,
            morton_decode,
            morton_decode_batch,
            morton_encode,
            morton_encode_batch,
            trace_cells,
        )
    except ImportError:  # pragma: no cover - depends on build environment
        _force_py = True

if _force_py:
    from ._kernels_py import (
        BACKEND,
        morton_decode,
        morton_decode_batch,
        morton_encode,
        morton_encode_batch,
        trace_cells,
    )

__all__ = [
    "BACKEND",
    "morton_decode",
    "morton_decode_batch",
    "morton_encode",
    "morton_encode_batch",
    "trace_cells",
]
