"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times batched expectation values, the adjoint vector-Jacobian product and the
Jacobi eigensolver at training-sized inputs, and checks both backends agree.
"""
import argparse
import sys
import timeit

import numpy as np

from spdqml import _backend
from spdqml.features import expand_batch

AXIS_X = 0


def cases(rng):
    n, batch = 7, 32
    angles = rng.uniform(-np.pi, np.pi, (batch, n))
    weights = rng.uniform(0, 2 * np.pi, (1, 3, n, 3))
    ranges = np.ones(3, dtype=np.int64)
    upstream = rng.normal(size=(batch, n))
    # shift-rule batch: every parameter shifted both ways for one sample
    shifted = np.repeat(weights, 2 * 3 * n * 3, axis=0)
    z = expand_batch(rng.uniform(0, 1, (512, 7)))
    cov = z.T @ z / len(z) + 1e-6 * np.eye(z.shape[1])
    return {
        "expval (32 x 7 qubits)": lambda k: k.expval(angles, weights, ranges, AXIS_X),
        "expval shift batch (126 circuits)": lambda k: k.expval(
            np.repeat(angles[:1], len(shifted), axis=0), shifted, ranges, AXIS_X),
        "adjoint vjp (32 x 7 qubits)": lambda k: k.expval_vjp(angles, weights, ranges, AXIS_X, upstream),
        "jacobi eigh (35 x 35)": lambda k: k.jacobi_eigh(cov.copy(), 1e-12, 100),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    compiled = _backend.compiled_kernels
    if compiled is None:
        print("compiled extension not built; only the fallback can be timed")
    backends = [("python", _backend.python_kernels)] + ([("compiled", compiled)] if compiled else [])
    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} " + " ".join(f"{name:>12s}" for name, _ in backends) + "   speedup")
    for label, fn in cases(rng).items():
        times = []
        for _, k in backends:
            number = 3
            times.append(min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number)
        if compiled is not None:
            a, b = fn(_backend.python_kernels), fn(compiled)
            a = a if isinstance(a, tuple) else (a,)
            b = b if isinstance(b, tuple) else (b,)
            diff = max(float(np.max(np.abs(np.asarray(x, float) - np.asarray(y, float))))
                       for x, y in zip(a, b))
            if diff > 1e-10:
                print(f"backends disagree on {label}: {diff:.2e}", file=sys.stderr)
                return 1
        cells = " ".join(f"{t * 1e3:10.3f}ms" for t in times)
        speed = f"{times[0] / times[1]:8.1f}x" if len(times) == 2 else ""
        print(f"{label:36s} {cells} {speed}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
