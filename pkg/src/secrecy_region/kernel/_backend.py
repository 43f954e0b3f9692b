"""Select the compiled Hessian kernel when available.

Set ``SECRECY_REGION_PURE=1`` to force the numpy fallback.
"""
import os

BACKEND = "python"

if os.environ.get("SECRECY_REGION_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._hesscore import accumulate_term  # noqa: F401
        BACKEND = "cython"
    except ImportError:
        from ._hess_py import accumulate_term  # noqa: F401
else:
    from ._hess_py import accumulate_term  # noqa: F401
