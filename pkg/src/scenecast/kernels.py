"""Backend selection for the hot loops.

The compiled extension is used when importable; setting ``SCENECAST_NO_EXT=1``
forces the pure-Python implementation.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("SCENECAST_NO_EXT"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

gibbs_sweep = _impl.gibbs_sweep
build_tree = _impl.build_tree
tree_predict = _impl.tree_predict
adam_update = _impl.adam_update
message_aggregate_forward = _impl.message_aggregate_forward
message_aggregate_backward = _impl.message_aggregate_backward
lasso_cd = _impl.lasso_cd


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("cython" or "python"); default is the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
