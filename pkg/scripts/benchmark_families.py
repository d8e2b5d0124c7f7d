"""Time classic F4, learn, apply and batched apply on the bundled families.

    python3 scripts/benchmark_families.py --family katsura --from 5 --to 9
"""

import argparse
import statistics
import sys
import time
from dataclasses import dataclass

import gmpy2

from f4gb import Ring, groebner
from f4gb.systems import FAMILIES, family
from f4gb.trace import f4_apply, f4_apply_batched, f4_learn


@dataclass
class Config:
    family: str = "katsura"
    lo: int = 5
    hi: int = 8
    prime: int = 2**31 - 1
    batch: int = 4
    repeats: int = 3
    rational: bool = False


def median_time(fn, repeats):
    ts = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts)


def run(cfg: Config):
    primes = [cfg.prime]
    while len(primes) < cfg.batch + 1:
        primes.append(int(gmpy2.prev_prime(primes[-1])))
    cols = ["system", "nvars", "basis", "classic", "learn", "apply", f"batch{cfg.batch}",
            "apply/classic", f"batch{cfg.batch}/apply"]
    if cfg.rational:
        cols.append("rational")
    print("\t".join(cols))
    for n in range(cfg.lo, cfg.hi + 1):
        names, F = family(cfg.family, n)
        R = Ring(names, cfg.prime)
        G = groebner(F, R)  # warm the compiled kernels
        classic = median_time(lambda: groebner(F, R), cfg.repeats)
        t0 = time.perf_counter()
        _, tr = f4_learn(F, R)
        learn = time.perf_counter() - t0
        f4_apply(tr, F, primes[1])
        apply = median_time(lambda: f4_apply(tr, F, primes[1]), cfg.repeats)
        batch = median_time(lambda: f4_apply_batched(tr, F, primes[1:]), cfg.repeats)
        row = [f"{cfg.family}-{n}", str(len(names)), str(len(G)), f"{classic:.4f}",
               f"{learn:.4f}", f"{apply:.4f}", f"{batch:.4f}", f"{apply / classic:.3f}",
               f"{batch / apply:.3f}"]
        if cfg.rational:
            t0 = time.perf_counter()
            groebner(F, Ring(names, 0))
            row.append(f"{time.perf_counter() - t0:.4f}")
        print("\t".join(row))
        sys.stdout.flush()


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--family", choices=sorted(FAMILIES), default=Config.family)
    ap.add_argument("--from", dest="lo", type=int, default=Config.lo)
    ap.add_argument("--to", dest="hi", type=int, default=Config.hi)
    ap.add_argument("--prime", type=int, default=Config.prime)
    ap.add_argument("--batch", type=int, choices=(1, 2, 4, 8), default=Config.batch)
    ap.add_argument("--repeats", type=int, default=Config.repeats)
    ap.add_argument("--rational", action="store_true", help="also time the computation over Q")
    run(Config(**vars(ap.parse_args())))


if __name__ == "__main__":
    main()
