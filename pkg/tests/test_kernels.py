"""The compiled kernels and the numpy fallback must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from asrforge import _pykernels, kernels
from asrforge.audio_io import _filter_table

try:
    from asrforge import _kernels
except ImportError:  # built without the extension
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


def _ext(target):
    ext = np.zeros(2 * len(target) + 1, dtype=np.int64)
    ext[1::2] = target
    return ext


@needs_ext
def test_ctc_forward_backward_parity(rng):
    for _ in range(100):
        T, V = int(rng.integers(1, 30)), int(rng.integers(2, 12))
        lp = rng.normal(size=(T, V))
        lp -= np.logaddexp.reduce(lp, axis=1, keepdims=True)
        L = int(rng.integers(0, (T + 1) // 2 + 1))
        ext = _ext(rng.integers(1, V, L))
        a1, b1, p1 = _kernels.ctc_forward_backward(lp, ext, 0)
        a2, b2, p2 = _pykernels.ctc_forward_backward(lp, ext, 0)
        assert p1 == pytest.approx(p2, abs=1e-10) or (np.isinf(p1) and np.isinf(p2))
        np.testing.assert_allclose(np.asarray(a1), a2, atol=1e-10)
        np.testing.assert_allclose(np.asarray(b1), b2, atol=1e-10)


@needs_ext
def test_edit_distance_parity(rng):
    for _ in range(300):
        a = rng.integers(0, 4, int(rng.integers(0, 12)))
        b = rng.integers(0, 4, int(rng.integers(0, 12)))
        assert tuple(_kernels.edit_distance_ops(a, b)) == tuple(_pykernels.edit_distance_ops(a, b))


@needs_ext
@pytest.mark.parametrize("rates", [(48000, 16000), (44100, 16000), (8000, 16000), (22050, 16000)])
def test_resample_parity(rng, rates):
    from math import gcd

    src, dst = rates
    g = gcd(src, dst)
    up, down = dst // g, src // g
    table = _filter_table(up, down, src, dst)
    x = rng.uniform(-1, 1, 5000)
    n = len(x) * up // down
    y1 = np.asarray(_kernels.polyphase_resample(x, table, up, down, n))
    y2 = _pykernels.polyphase_resample(x, table, up, down, n)
    np.testing.assert_allclose(y1, y2, atol=1e-12)


def test_pure_env_var_selects_fallback():
    env = {**os.environ, "ASRFORGE_PURE": "1"}
    out = subprocess.run(
        [sys.executable, "-c", "import asrforge; print(asrforge.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    ).stdout.strip()
    assert out == "python"


def test_default_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
    if _kernels is not None and os.environ.get("ASRFORGE_PURE") != "1":
        assert kernels.BACKEND == "cython"
