#!/usr/bin/env python3
"""Timing benchmark: double-default scenario on a 1000-obligor portfolio.

10 factor sectors, deterministic severities up to 50, truncation at
L = 50000.  Reports assembly, base-distribution and scenario timings; the
scenario reuses the engine's per-sector and partial-convolution caches.
"""

import time

import numpy as np

from crplus import LossEngine, Obligor, Portfolio, Sector, SeverityDist, assemble, mean
from crplus import conditional as cd


def build_portfolio(n_obligors=1000, n_sectors=10, seed=2024):
    rng = np.random.default_rng(seed)
    sectors = tuple(Sector(f"s{k + 1}", float(a))
                    for k, a in enumerate(rng.uniform(0.5, 3.0, n_sectors)))
    obligors = []
    for i in range(n_obligors):
        w = np.zeros(n_sectors + 1)
        w[0] = rng.uniform(0.1, 0.5)
        ks = rng.choice(n_sectors, size=2, replace=False) + 1
        split = rng.uniform(0.2, 0.8)
        w[ks[0]] = (1 - w[0]) * split
        w[ks[1]] = (1 - w[0]) * (1 - split)
        obligors.append(Obligor(f"o{i}", float(rng.uniform(0.002, 0.02)), w,
                                SeverityDist({int(rng.integers(1, 51)): 1.0})))
    return Portfolio(sectors, tuple(obligors))


def main():
    port = build_portfolio()
    t0 = time.perf_counter()
    system = assemble(port, 50_000)
    t1 = time.perf_counter()
    engine = LossEngine(system)
    base = engine.loss_distribution()
    t2 = time.perf_counter()
    rep = cd.loss_given_two_defaults(engine, port, "o0", "o1")
    t3 = time.perf_counter()
    rep2 = cd.loss_given_two_defaults(engine, port, "o2", "o3")
    t4 = time.perf_counter()

    print(f"assemble:                 {t1 - t0:7.2f} s")
    print(f"base distribution:        {t2 - t1:7.2f} s  (mean {mean(base):.1f}, "
          f"tail {base.tail_mass:.2e})")
    print(f"first double-default:     {t3 - t2:7.2f} s  (mean {mean(rep.conditional_pmf):.1f})")
    print(f"second double-default:    {t4 - t3:7.2f} s  (warm cache)")


if __name__ == "__main__":
    main()
