"""Optional numba acceleration.

Set ``KINKFIELD_NUMBA=0`` to force the pure-numpy code paths. The flag is
read once at import time.
"""
import os

_FLAG = os.environ.get("KINKFIELD_NUMBA", "1").strip().lower()

try:
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(fn):
    """Compile ``fn`` with numba when available, otherwise return it unchanged.

    The compiled kernels are always built when numba is importable so the
    benchmark can compare both paths in one process; ``USE_NUMBA`` only
    decides which path the public wrappers dispatch to.
    """
    if not HAVE_NUMBA:
        return fn
    from numba import njit as _njit
    return _njit(cache=True, nogil=True)(fn)
