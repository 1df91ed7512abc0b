"""Compare the compiled kernels against the numpy fallbacks.

Run as: python benchmarks/bench_kernels.py
Sizes mirror real workloads: the twist scan at a level-12 horizon, a full
m=6 lattice backward pass, and the level-12-vs-level-6 sup distance.
"""

import time

import numpy as np

import strongwalk._kernels_py as numpy_impl

try:
    import strongwalk._fastkern as compiled_impl
except ImportError:
    compiled_impl = None


def timed(fn, *args, repeat=3):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def bench(name, args_fn, check=None):
    args = args_fn()
    t_py, out_py = timed(numpy_impl.__dict__[name], *args)
    line = f"{name:20s} numpy {t_py * 1e3:9.2f} ms"
    if compiled_impl is not None:
        t_c, out_c = timed(compiled_impl.__dict__[name], *args)
        line += f"   compiled {t_c * 1e3:9.2f} ms   speedup {t_py / t_c:6.2f}x"
        if check is not None:
            assert check(out_py, out_c), f"{name}: backend mismatch"
    print(line)


def main():
    rng = np.random.default_rng(0)
    print(f"compiled extension available: {compiled_impl is not None}\n")

    n_raw = 1 << 24  # level-12 horizon
    raw = rng.choice(np.array([-1, 1], dtype=np.int8), size=n_raw)
    desired = rng.choice(np.array([-1, 1], dtype=np.int8),
                         size=n_raw // 4 + 4096)
    bench("twist_scan", lambda: (raw, desired),
          check=lambda a, b: np.array_equal(a[0], b[0])
          and np.array_equal(a[1], b[1]))

    values = rng.uniform(0.0, 50.0, size=4097)

    def full_backward(next_values, q_up, inv_gross, impl):
        for _ in range(4096):
            next_values = impl(next_values, q_up, inv_gross)
        return next_values

    t_py, _ = timed(full_backward, values, 0.5, 0.999,
                    numpy_impl.lattice_step_back, repeat=1)
    line = f"{'lattice_backward':20s} numpy {t_py * 1e3:9.2f} ms"
    if compiled_impl is not None:
        t_c, _ = timed(full_backward, values, 0.5, 0.999,
                       compiled_impl.lattice_step_back, repeat=1)
        line += f"   compiled {t_c * 1e3:9.2f} ms   speedup {t_py / t_c:6.2f}x"
    print(line)

    fine = np.concatenate([[0], np.cumsum(
        rng.choice(np.array([-1, 1], dtype=np.int32), size=1 << 24))]) \
        .astype(np.int32)
    coarse = np.concatenate([[0], np.cumsum(
        rng.choice(np.array([-1, 1], dtype=np.int32), size=1 << 12))]) \
        .astype(np.int32)
    bench("sup_diff_nested",
          lambda: (fine, coarse, 12, 2.0 ** -12, 2.0 ** -6),
          check=lambda a, b: a == b)


if __name__ == "__main__":
    main()
