"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 2000]

Both implementations are imported directly, so the ``KINKFIELD_NUMBA``
flag does not matter here. The first numba call (compilation) is excluded.
"""
import argparse
import timeit

import numpy as np

from kinkfield import _kernels as k
from kinkfield import spectro


def cases(size, rng):
    z = rng.uniform(0.05, 60.0, size)
    r = 1.0 + np.arange(size, dtype=float) % 40
    m_true = rng.uniform(0.05, 2.0, size)
    log_ratio = spectro.log_bessel_k0(m_true * (r + 1)) - spectro.log_bessel_k0(m_true * r)
    profile = 0.5 + 1e-3 * rng.standard_normal(size)
    return {
        "k_scaled": (lambda: np.array([k.k_scaled_nb(0, v) for v in z]), lambda: k.k_scaled_np(0, z)),
        "invert_ratio": (lambda: k.invert_ratio_nb(log_ratio, r, 1.0, 1e-6, 20.0),
                         lambda: k.invert_ratio_np(log_ratio, r, 1.0, 1e-6, 20.0)),
        "longest_run": (lambda: k.longest_run_nb(profile, 1e-2), lambda: k.longest_run_np(profile, 1e-2)),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--size", type=int, default=2000)
    args = p.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, (nb, npy) in cases(args.size, rng).items():
        a, b = nb(), npy()
        assert np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-9, equal_nan=True), name
        t_nb = min(timeit.repeat(nb, number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(npy, number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<14}{t_nb:>12.3f}{t_np:>12.3f}{t_np / t_nb:>10.2f}")


if __name__ == "__main__":
    main()
