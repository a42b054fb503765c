"""Kernel selection: compiled extension if importable, numpy fallback otherwise.

Set ``QTORSION_PURE_PYTHON=1`` to force the fallback.  ``BACKEND`` names the
implementation actually in use.
"""

import os

from . import _kernels_py

_compiled = None
if not os.environ.get("QTORSION_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py
BACKEND = "cython" if _compiled is not None else "numpy"

element_geometry = _impl.element_geometry
element_gradients = _impl.element_gradients
# numpy's vectorized pow outruns the scalar libm loop
energy = _kernels_py.energy
assemble = _impl.assemble


def backends():
    """Available implementations keyed by name (the benchmark compares them)."""
    out = {"numpy": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
