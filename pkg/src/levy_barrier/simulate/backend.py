"""Kernel selection.

The compiled kernel is used when it imports; otherwise, or when the
environment variable ``LEVY_BARRIER_PURE`` is set to a non-empty value other
than ``0``, the pure-Python kernel is used. Both expose ``NAME``,
``words``, ``uniforms``, ``normals``, ``reflected_batch`` and ``ruin_batch`` with identical
semantics.
"""
import os

from . import _pykernel


def _select():
    if os.environ.get("LEVY_BARRIER_PURE", "") not in ("", "0"):
        return _pykernel
    try:
        from . import _ckernel
    except ImportError:
        return _pykernel
    return _ckernel


kernel = _select()
NAME = kernel.NAME
python_kernel = _pykernel


def compiled_kernel():
    """The compiled kernel module, or ``None`` when it is not built."""
    try:
        from . import _ckernel
    except ImportError:
        return None
    return _ckernel


def words(seed, stream_id, sub, n):
    return kernel.words(seed, stream_id, sub, n)


def uniforms(seed, stream_id, sub, n):
    return kernel.uniforms(seed, stream_id, sub, n)


def normals(seed, stream_id, sub, n):
    return kernel.normals(seed, stream_id, sub, n)


def reflected_batch(*args):
    return kernel.reflected_batch(*args)


def ruin_batch(*args):
    return kernel.ruin_batch(*args)
