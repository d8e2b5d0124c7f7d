"""Image-by-image view of the multimodular reconstruction for one system.

For each prime added it prints the modulus size, whether the subset and
the full reconstruction succeed, whether the result equals the final basis,
and what the size heuristic says.

    python3 scripts/rational_convergence.py --family katsura --n 5
"""

import argparse
from dataclasses import dataclass

from f4gb import Ring
from f4gb.io import certificate
from f4gb.multimodular import (PrimeStream, RationalRun, ReconstructionState, clear_denominators,
                               crt_combine, groebner_rational, heuristic_check, reconstruct)
from f4gb.systems import FAMILIES, family
from f4gb.trace import f4_apply, f4_learn


@dataclass
class Config:
    family: str = "katsura"
    n: int = 5
    images: int = 0  # 0: until two images past stabilization
    guard_bits: int = 10


def run(cfg: Config):
    names, F = family(cfg.family, cfg.n)
    R = Ring(names, 0)
    driver = RationalRun()
    final = groebner_rational(F, R, run=driver)
    want = certificate(final, R)
    cleared = clear_denominators(F)
    stream = PrimeStream([c for f in cleared for c in f.values()])
    p = next(stream)
    _, tr = f4_learn(cleared, Ring(names, p))
    sizes = [len(k) for k in tr.final_keys]
    print(f"# {cfg.family}-{cfg.n}: {len(sizes)} polynomials, {sum(sizes)} coefficients; "
          f"driver used {driver.state.nimages} images")
    print("images\tbits\tfull\tequal\theuristic")
    state = ReconstructionState()
    stable_at = None
    k = 0
    while True:
        k += 1
        G = f4_apply(tr, cleared, p)
        crt_combine(state, [g.get(e, 0) for g, keys in zip(G, tr.final_keys) for e in keys], p)
        rec = reconstruct(state.residues, state.M)
        equal = False
        if rec is not None:
            it = iter(rec)
            basis = [{e: c for e in keys if (c := next(it))} for keys in tr.final_keys]
            equal = certificate(basis, R) == want
        heur = rec is not None and heuristic_check(rec, state.M, cfg.guard_bits)
        if equal and stable_at is None:
            stable_at = k
        print(f"{k}\t{state.M.bit_length()}\t{rec is not None}\t{equal}\t{heur}")
        limit = cfg.images or ((stable_at or 10**9) + 2)
        if k >= limit or k >= 400:
            break
        p = next(stream)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--family", choices=sorted(FAMILIES), default=Config.family)
    ap.add_argument("--n", type=int, default=Config.n)
    ap.add_argument("--images", type=int, default=Config.images)
    ap.add_argument("--guard-bits", dest="guard_bits", type=int, default=Config.guard_bits)
    run(Config(**vars(ap.parse_args())))


if __name__ == "__main__":
    main()
