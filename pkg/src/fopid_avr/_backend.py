"""Kernel selection: the compiled extension when importable, else NumPy.

Set ``FOPID_AVR_BACKEND=python`` to force the fallback.
"""

import logging
import os

logger = logging.getLogger(__name__)

BACKEND = "python"

if os.environ.get("FOPID_AVR_BACKEND", "").lower() != "python":
    try:
        from fopid_avr._kernels import gl_convolve, propagate  # noqa: F401

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        logger.debug("compiled kernels unavailable, using NumPy fallback")

if BACKEND == "python":
    from fopid_avr._kernels_py import gl_convolve, propagate  # noqa: F401

__all__ = ["BACKEND", "gl_convolve", "propagate"]
