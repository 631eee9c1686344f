"""Compare the compiled kernel backend against the pure-numpy fallback.

Times each kernel on model-realistic shapes; run from the repo root with
    python3 benchmarks/bench_kernels.py [--repeats N] [--rows N] [--cols N]
"""

import argparse
import time

import numpy as np

from structkit.kernels import py_ref

try:
    from structkit.kernels import _core
except ImportError:
    _core = None


def best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_cases(rows: int, cols: int, rng: np.random.Generator):
    scores = rng.normal(size=(rows, cols))
    scores[rng.random(size=scores.shape) < 0.3] = -np.inf
    scores[:, 0] = 0.0
    probs = py_ref.masked_softmax(scores)
    dprobs = rng.normal(size=(rows, cols))
    logits = rng.normal(size=(rows, cols))
    targets = rng.integers(cols, size=rows)
    x = rng.normal(size=(rows, cols))
    dy = rng.normal(size=(rows, cols))
    gamma = rng.normal(size=cols)
    beta = rng.normal(size=cols)
    y01 = (rng.random(size=(rows, cols)) < 0.1).astype(np.float64)
    value = rng.normal(size=(rows, cols))
    grad = rng.normal(size=(rows, cols))
    m = np.zeros_like(value)
    v = np.zeros_like(value)

    def layernorm_case(mod):
        out, mean, rstd = mod.layernorm(x, gamma, beta, 1e-5)
        mod.layernorm_bwd(x, gamma, mean, rstd, dy)

    return [
        ("masked_softmax", lambda mod: mod.masked_softmax(scores)),
        ("masked_softmax_bwd",
         lambda mod: mod.masked_softmax_bwd(probs, dprobs)),
        ("cross_entropy_rows",
         lambda mod: mod.cross_entropy_rows(logits, targets)),
        ("gelu", lambda mod: mod.gelu(x)),
        ("gelu_bwd", lambda mod: mod.gelu_bwd(x, dy)),
        ("layernorm fwd+bwd", layernorm_case),
        ("bce_with_logits", lambda mod: mod.bce_with_logits(logits, y01)),
        ("adamw_update",
         lambda mod: mod.adamw_update(value.copy(), grad, m.copy(), v.copy(),
                                      1, 3e-4, 0.9, 0.999, 1e-8, 0.01)),
    ]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--rows", type=int, default=256)
    parser.add_argument("--cols", type=int, default=256)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = make_cases(args.rows, args.cols, rng)
    print(f"shapes {args.rows}x{args.cols}, best of {args.repeats} runs")
    if _core is None:
        print("compiled backend not available; timing numpy fallback only")
    header = f"{'kernel':22s} {'numpy (us)':>12s}"
    if _core is not None:
        header += f" {'cython (us)':>12s} {'speedup':>8s}"
    print(header)
    for name, fn in cases:
        t_py = best_of(lambda: fn(py_ref), args.repeats) * 1e6
        line = f"{name:22s} {t_py:12.1f}"
        if _core is not None:
            t_cy = best_of(lambda: fn(_core), args.repeats) * 1e6
            line += f" {t_cy:12.1f} {t_py / t_cy:7.2f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
