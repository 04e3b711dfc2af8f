"""Backend selection for the simulation kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise,
or when the environment variable ``ASYNCBCD_PURE_PYTHON`` is set to a
non-empty value, the pure-Python ``_pykernels`` module is used.  Both
produce bit-identical results.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = ("cython", "python")


def available_backends() -> tuple:
    return BACKENDS if _ckernels is not None else ("python",)


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (``None`` selects the default)."""
    if name is None:
        name = DEFAULT_BACKEND
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; reinstall with Cython available")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}; expected one of {BACKENDS}")


DEFAULT_BACKEND = "python" if (os.environ.get("ASYNCBCD_PURE_PYTHON") or _ckernels is None) else "cython"
