"""Compare the compiled and pure Python volatility kernels.

    python benchmarks/bench_recursions.py [--draws S] [--n N] [--repeat R]

Reports the best-of-R wall time per call for each kernel and backend, and
checks that the two backends agree.
"""
import argparse
import timeit

import numpy as np

from emgvb import _kernels


def make_inputs(s, n, q, seed=0):
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(n)
    return (rng.uniform(0.01, 0.2, s), rng.uniform(0.0, 0.2, s), rng.uniform(0.0, 0.2, s),
            rng.uniform(0.0, 0.35, (s, q)), r, float(np.var(r)))


def _run_recursion(backend, name, args, shape):
    out = np.empty(shape)
    getattr(backend, name)(*args, out)
    return out


def cases(s, n):
    args = make_inputs(s, n, 1)
    sig = np.random.default_rng(1).uniform(0.5, 2.0, (s, n))
    fw = (np.full(s, 0.1), np.full(s, 0.4), np.full(s, 0.3), 1000)
    return {
        "gjr_recursion": lambda b: _run_recursion(b, "gjr_recursion", args, (s, n)),
        "egarch_recursion": lambda b: _run_recursion(b, "egarch_recursion", args, (s, n)),
        "figarch_weights": lambda b: b.figarch_weights(*fw),
        "gaussian_loglik_rows": lambda b: b.gaussian_loglik_rows(args[4], sig),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--draws", type=int, default=150)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    a = p.parse_args(argv)
    backends = {"python": _kernels.python_backend}
    if _kernels.compiled_backend is not None:
        backends["cython"] = _kernels.compiled_backend
    print(f"S={a.draws} n={a.n} active backend: {_kernels.BACKEND}")
    print(f"{'kernel':22s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    for name, fn in cases(a.draws, a.n).items():
        times = {b: min(timeit.repeat(lambda: fn(mod), number=1, repeat=a.repeat)) for b, mod in backends.items()}
        if len(backends) == 2:
            np.testing.assert_allclose(fn(backends["cython"]), fn(backends["python"]), rtol=1e-12, atol=1e-14)
        speed = f"{times['python'] / times['cython']:9.1f}x" if "cython" in times else ""
        print(f"{name:22s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in backends) + f" {speed}")


if __name__ == "__main__":
    main()
