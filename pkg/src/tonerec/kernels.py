"""Backend selection for the loop kernels.

The Cython extension ``tonerec._ckernels`` is used when it was built; the
numpy module ``tonerec._pykernels`` is the fallback. Set ``TONEREC_KERNELS``
to ``python`` to force the fallback, or to ``cython`` to fail loudly when
the extension is missing.
"""

import os

import numpy as np

from . import _pykernels

_choice = os.environ.get("TONEREC_KERNELS", "auto").lower()

if _choice == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        _impl = _pykernels
        BACKEND = "python"


def available_backends():
    """Return ``{name: module}`` for every kernel backend importable here."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def cmac(a, b, conj_b=False):
    """Per-frequency channel contraction used by the FFT convolution."""
    return _impl.cmac(a, b, conj_b)


def maxpool_forward(x, size, stride):
    return _impl.maxpool_forward(np.ascontiguousarray(x), int(size), int(stride))


def maxpool_backward(grad_out, argmax, H, W):
    return _impl.maxpool_backward(np.ascontiguousarray(grad_out),
                                  np.ascontiguousarray(argmax, dtype=np.int64), H, W)


def ctc_alpha_beta(logp, ext, blank=0):
    return _impl.ctc_alpha_beta(np.ascontiguousarray(logp, dtype=np.float64),
                                np.ascontiguousarray(ext, dtype=np.int64), blank)


def edit_table(hyp, ref):
    return _impl.edit_table(np.ascontiguousarray(hyp, dtype=np.int64),
                            np.ascontiguousarray(ref, dtype=np.int64))
