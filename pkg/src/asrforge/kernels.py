"""Backend selection for the numeric inner loops.

The compiled ``_kernels`` extension is preferred. Setting ``ASRFORGE_PURE=1``
in the environment, or failing to import the extension, selects the
numpy fallback in ``_pykernels``.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("ASRFORGE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

ctc_forward_backward = _impl.ctc_forward_backward
edit_distance_ops = _impl.edit_distance_ops
polyphase_resample = _impl.polyphase_resample

__all__ = [
    "BACKEND",
    "ctc_forward_backward",
    "edit_distance_ops",
    "polyphase_resample",
]
