"""Benchmark the compiled kernel against the pure-Python reference.

Runs the same disk-bound comparison workload on both backends, checks the
reports are identical, and prints wall times plus speedup.
"""
from __future__ import annotations

import time

from ._core import CSimCore
from .cache import CacheConfig
from .config import SimConfig
from .engine import run as run_sim
from .workload import WorkloadConfig


def bench_config(duration_s: float = 1800.0, seed: int = 1,
                 policy: str = "prefix-pic-multicast") -> SimConfig:
    return SimConfig(
        workload=WorkloadConfig(mean_interarrival_s=1.5),
        cache=CacheConfig(),
        policy=policy,
        seed=seed,
        duration_s=duration_s,
        warmup_s=min(600.0, duration_s / 4),
    )


def main(duration_s: float = 1800.0, seed: int = 1) -> int:
    cfg = bench_config(duration_s, seed)
    t0 = time.perf_counter()
    pure = run_sim(cfg, backend="pure")
    t_pure = time.perf_counter() - t0
    print(f"pure     {t_pure:8.3f} s  (streamed={pure.videos_streamed})")
    if CSimCore is None:
        print("compiled kernel not built; run pip install to compile it")
        return 1
    t0 = time.perf_counter()
    compiled = run_sim(cfg, backend="compiled")
    t_comp = time.perf_counter() - t0
    print(f"compiled {t_comp:8.3f} s  (streamed={compiled.videos_streamed})")
    if pure != compiled:
        print("MISMATCH: backends disagree")
        return 1
    print(f"speedup  {t_pure / t_comp:8.2f}x  (reports identical)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
