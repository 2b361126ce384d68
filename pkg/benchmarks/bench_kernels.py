"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time per call for each kernel and backend.
"""

import argparse
import timeit
from math import gcd

import numpy as np

from asrforge import _pykernels
from asrforge.audio_io import _filter_table

try:
    from asrforge import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    # CTC forward-backward: 4 s of 20 ms frames, 515 symbols, 60-label target
    T, V, L = 200, 515, 60
    logp = rng.normal(size=(T, V))
    logp -= np.logaddexp.reduce(logp, axis=1, keepdims=True)
    ext = np.zeros(2 * L + 1, dtype=np.int64)
    ext[1::2] = rng.integers(3, V, L)
    yield "ctc_forward_backward T=200 V=515 L=60", "ctc_forward_backward", (logp, ext, 0)

    # edit distance on 400-character references
    ref = rng.integers(0, 40, 400).astype(np.int64)
    hyp = ref.copy()
    hyp[rng.integers(0, 400, 60)] = rng.integers(0, 40, 60)
    yield "edit_distance_ops 400x400", "edit_distance_ops", (ref, hyp)

    # 10 s at 48 kHz -> 16 kHz and 44.1 kHz -> 16 kHz
    for src in (48000, 44100):
        g = gcd(src, 16000)
        up, down = 16000 // g, src // g
        x = rng.uniform(-1, 1, src * 10)
        table = _filter_table(up, down, src, 16000)
        yield f"polyphase_resample 10 s {src} -> 16000", "polyphase_resample", (x, table, up, down, len(x) * up // down)


def best_time(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.2 and number < 1000:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<44}{'python':>12}{'cython':>12}{'speedup':>10}")
    for label, name, call_args in cases(rng):
        py = best_time(getattr(_pykernels, name), call_args, args.repeat)
        if _kernels is None:
            print(f"{label:<44}{py * 1e3:>10.2f}ms{'n/a':>12}{'':>10}")
            continue
        cy = best_time(getattr(_kernels, name), call_args, args.repeat)
        print(f"{label:<44}{py * 1e3:>10.2f}ms{cy * 1e3:>10.2f}ms{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
