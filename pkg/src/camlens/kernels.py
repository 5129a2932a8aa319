"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when
``CAMLENS_PURE_PYTHON=1``) the numpy fallback is used. Both expose
``apply_taps``, ``im2col3x3`` and ``col2im3x3``.
"""
import os
import types

from . import _fallback

try:
    from . import _ckernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def get_backend(name=None):
    """Return the kernel namespace for ``"compiled"``, ``"python"`` or the default."""
    if name is None:
        name = BACKEND
    if name == "python":
        mod = _fallback
    elif name == "compiled":
        if _compiled is None:
            raise ImportError("camlens._ckernels is not built")
        mod = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    return types.SimpleNamespace(
        name=name,
        apply_taps=mod.apply_taps,
        im2col3x3=mod.im2col3x3,
        col2im3x3=mod.col2im3x3,
    )


def compiled_available():
    return _compiled is not None


if _compiled is not None and os.environ.get("CAMLENS_PURE_PYTHON", "") not in ("1", "true"):
    BACKEND = "compiled"
else:
    BACKEND = "python"

_active = get_backend(BACKEND)
apply_taps = _active.apply_taps
im2col3x3 = _active.im2col3x3
col2im3x3 = _active.col2im3x3
