"""Kernel backend selection: compiled extension when built, numpy fallback.

Both backends expose ``constraint_values``, ``constraint_grads``, and
``scaled_gram`` over :class:`~llcp.standard_form.PackedConstraints`; the
solver is agnostic to which one is active.
"""

from __future__ import annotations

from . import _kernels_py

try:
    from . import _kernels_cy as _compiled
except ImportError:  # extension not built; pure fallback
    _compiled = None

# exponent guard: any term exponent above this marks the constraint value
# as +inf so the line search backs off before exp() can overflow
EXP_GUARD = 30.0


def has_compiled() -> bool:
    return _compiled is not None


def get_backend(name: str = "auto"):
    """Resolve a backend module by name: "auto", "python", or "compiled"."""
    if name == "auto":
        return _compiled if _compiled is not None else _kernels_py
    if name in ("python", "numpy"):
        return _kernels_py
    if name in ("compiled", "cython"):
        if _compiled is None:
            raise ValueError("compiled kernels are not available in this build")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


def backend_name(module) -> str:
    return module.BACKEND
