"""Kernel backend selection.

Prefers the compiled extension when it is importable; falls back to the
numpy implementations otherwise. Set ``PRIVDIST_PURE=1`` to force the
fallback (used by the benchmark and the agreement tests).
"""

import os

if os.environ.get("PRIVDIST_PURE") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

coord_value = _impl.coord_value
coord_value_batch = _impl.coord_value_batch
coord_subgrad = _impl.coord_subgrad
coord_subgrad_batch = _impl.coord_subgrad_batch
avg_l1 = _impl.avg_l1
avg_l2 = _impl.avg_l2
pwl_eval = _impl.pwl_eval
pwl_eval_batch = _impl.pwl_eval_batch
pwl_eval_coords = _impl.pwl_eval_coords
subset_min = _impl.subset_min


def backend() -> str:
    """Name of the active kernel backend ("compiled" or "python")."""
    return BACKEND
