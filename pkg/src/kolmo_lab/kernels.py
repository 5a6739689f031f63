"""Backend selection for the hot loops.

The compiled extension is preferred. Setting ``KOLMO_LAB_PURE=1`` (or a
failed build) falls back to the numpy implementation with identical
signatures.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("KOLMO_LAB_PURE", "0") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

kinetic_step = _impl.kinetic_step
frac_plap_power = _impl.frac_plap_power
frac_plap_matrix = _impl.frac_plap_matrix
pgs_tridiag = _impl.pgs_tridiag


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
