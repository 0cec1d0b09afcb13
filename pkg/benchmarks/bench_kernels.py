"""Compare the compiled and pure-Python encoders on the hot loop and on a full fit.

Usage: python benchmarks/bench_kernels.py [--n 50] [--m 256] [--repeat 3]
"""

import argparse
import time

import numpy as np

from borf import kernels
from borf.transform import config_grid, fit, signal_sigma
from borf.types import TimeSeriesDataset


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--m", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    series = [[rng.normal(size=args.m).cumsum()] for _ in range(args.n)]
    for ts in series:
        ts[0][rng.random(args.m) < 0.05] = np.nan
    ds = TimeSeriesDataset(series)
    cfgs = config_grid(args.m, "tsc")
    signals = [ts.signals[0] for ts in ds.series]
    sigmas = [signal_sigma(x) for x in signals]

    print(f"n={args.n} m={args.m} configs={len(cfgs)} backends={sorted(kernels.BACKENDS)}")
    results = {}
    original = kernels.encode_signal
    try:
        for name, enc in sorted(kernels.BACKENDS.items()):
            kernels.encode_signal = enc

            def encode_all():
                for cfg in cfgs:
                    mbp, sbp = cfg._bp_arrays
                    for x, sx in zip(signals, sigmas):
                        enc(x, sx, cfg.w, cfg.d, cfg.s, cfg.l, cfg.beta, mbp, sbp, cfg.alpha_slope)

            t_enc = best_of(encode_all, args.repeat)
            t_fit = best_of(lambda: fit(ds, cfgs, workers=1), args.repeat)
            results[name] = (t_enc, t_fit)
            print(f"{name:>8}: encode {t_enc * 1e3:9.1f} ms   fit (1 worker) {t_fit * 1e3:9.1f} ms")
    finally:
        kernels.encode_signal = original
    if len(results) == 2:
        (ce, cf), (pe, pf) = results["cython"], results["python"]
        print(f"speedup: encode x{pe / ce:.1f}, fit x{pf / cf:.1f}")


if __name__ == "__main__":
    main()
