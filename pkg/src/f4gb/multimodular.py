"""Groebner bases over Q from images modulo many 31-bit primes.

Denominators are cleared, F4 is learned once modulo the first prime and the
trace is replayed on batches of further primes.  Images are combined by
CRT; rationals are recovered by reconstruction, first on a small subset of
coefficients, then on all of them.  A candidate is accepted once its
coefficients are small next to sqrt(M), unchanged by the last batch of
images, and it passes a check modulo a fresh random prime.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2
import numpy as np

from .f4 import F4Error
from .stats import NullStats, Stats
from .trace import Trace, apply_batched_arrays, f4_learn

PRIME_START = 2**31 - 1
PRIME_MIN = 2**30
SUBSET_CAP = 16


class ResourceError(RuntimeError):
    """The prime budget ran out before the reconstruction was accepted."""


class CRTError(ValueError):
    pass


@dataclass
class MultimodularOptions:
    batch: int = 4  # lanes per batched apply
    prime_budget: int = 512
    guard_bits: int = 10  # heuristic margin
    growth: float = 0.15  # new primes per step, relative to images so far
    relearn_after: int = 2  # fully diverged batches in a row before relearning
    seed: int = 0


# ---------------------------------------------------------------- inputs


def clear_denominators(polys: Sequence[dict]) -> list[dict]:
    """Scale each polynomial to integer coefficients with content 1."""
    out = []
    for f in polys:
        if not f:
            out.append({})
            continue
        coeffs = [Fraction(c) for c in f.values()]
        L = math.lcm(*(c.denominator for c in coeffs))
        ints = [int(c * L) for c in coeffs]
        g = math.gcd(*ints)
        out.append({e: c // g for e, c in zip(f, ints) if c})
    return out


@dataclass
class PrimeStream:
    """31-bit primes in decreasing order, avoiding primes that divide any of ``avoid``."""

    avoid: Sequence[int] = ()
    next_candidate: int = PRIME_START
    skipped: set = field(default_factory=set)
    yielded: int = 0

    def __post_init__(self):
        self.avoid = [abs(int(c)) for c in self.avoid if c]

    def __iter__(self):
        return self

    def __next__(self) -> int:
        p = self.next_candidate
        while True:
            if p < PRIME_MIN:
                raise ResourceError("ran out of 31-bit primes")
            if not gmpy2.is_prime(p):
                p = int(gmpy2.prev_prime(p))
                continue
            if any(c % p == 0 for c in self.avoid):
                self.skipped.add(p)
                p -= 1
                continue
            self.next_candidate = p - 1
            self.yielded += 1
            return p


# ------------------------------------------------- CRT and reconstruction


@dataclass
class ReconstructionState:
    """Combined residues (object array of ints) modulo ``M``."""

    residues: np.ndarray = None
    M: int = 1
    primes: list = field(default_factory=list)
    rationals: list = None  # last full reconstruction, or None

    @property
    def nimages(self) -> int:
        return len(self.primes)


def crt_combine(state: ReconstructionState, residues, p: int) -> ReconstructionState:
    """Absorb residues modulo p: r -> r + M * ((a - r) / M mod p)."""
    p = int(p)
    if math.gcd(state.M, p) != 1:
        raise CRTError(f"modulus {p} is not coprime to the current product")
    a = np.asarray([int(x) % p for x in residues], dtype=object)
    if state.residues is None:
        state.residues = a
    else:
        if len(a) != len(state.residues):
            raise CRTError("residue vectors differ in length")
        inv = pow(state.M % p, -1, p)
        r = state.residues
        state.residues = r + state.M * (((a - r % p) * inv) % p)
    state.M *= p
    state.primes.append(p)
    return state


def crt_pair(r1: int, m1: int, r2: int, m2: int) -> int:
    """The residue modulo m1*m2 congruent to r1 mod m1 and r2 mod m2."""
    st = ReconstructionState()
    st.residues = np.asarray([r1 % m1], dtype=object)
    st.M = m1
    return int(crt_combine(st, [r2], m2).residues[0])


def rat_reconstruct(r: int, M: int):
    """n/d with n = r*d mod M and |n|, d <= floor(sqrt(M/2)), or None."""
    r = int(r) % M
    bound = math.isqrt(M // 2)
    r0, r1 = M, r
    t0, t1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        t0, t1 = t1, t0 - q * t1
    if t1 == 0 or abs(t1) > bound or math.gcd(r1, abs(t1)) != 1:
        return None
    if t1 < 0:
        r1, t1 = -r1, -t1
    return r1, t1


def reconstruct(values, M: int, previous=None):
    """Fractions for every residue, reusing ``previous`` entries that still fit."""
    out = []
    for k, r in enumerate(values):
        if previous is not None:
            q = previous[k]
            if (q.numerator - q.denominator * int(r)) % M == 0:
                out.append(q)
                continue
        nd = rat_reconstruct(r, M)
        if nd is None:
            return None
        out.append(Fraction(*nd))
    return out


def heuristic_check(coeffs, M: int, guard_bits: int = 10) -> bool:
    """Every n/d has max(|n|, d) <= sqrt(M) / 2^guard_bits."""
    limit = 1 << (2 * guard_bits)
    for c in coeffs:
        c = Fraction(c)
        h = max(abs(c.numerator), c.denominator)
        if h * h * limit > M:
            return False
    return True


def _reduce_mod(f: dict, q: int):
    out = {}
    for e, c in f.items():
        c = Fraction(c)
        if c.denominator % q == 0:
            return None
        v = c.numerator * pow(c.denominator, -1, q) % q
        if v:
            out[e] = v
    return out


def random_prime(rng: random.Random, exclude=()) -> int:
    exclude = set(exclude)
    while True:
        q = int(gmpy2.next_prime(rng.randrange(PRIME_MIN, PRIME_START - 64)))
        if q < PRIME_START and q not in exclude:
            return q


def randomized_check(candidate: Sequence[dict], polys: Sequence[dict], ring, *,
                     rng: random.Random | None = None, exclude=(), q: int | None = None) -> bool:
    """Candidate mod a fresh prime q is a Groebner basis containing every input mod q."""
    from .api import is_groebner, lead_exps, normal_form_many

    rng = rng if rng is not None else random.Random(0)
    while True:
        if q is None:
            q = random_prime(rng, exclude)
        Gq = [_reduce_mod(g, q) for g in candidate]
        ok = all(g is not None for g in Gq) and all(
            g and gq and lead_exps(ring, g) == lead_exps(ring, gq) for g, gq in zip(candidate, Gq)
        )
        if ok:
            break
        exclude = set(exclude) | {q}
        q = None
    Fq = [_reduce_mod(f, q) for f in polys]
    if any(f is None for f in Fq):
        return False
    rq = ring.with_characteristic(q)
    if not is_groebner(Gq, rq):
        return False
    return all(not r for r in normal_form_many([f for f in Fq if f], Gq, rq))


# ---------------------------------------------------------------- driver


@dataclass
class Attempt:
    images: int
    bits: int
    subset: bool
    full: bool
    heuristic: bool
    stable: bool
    randomized: bool | None


@dataclass
class RationalRun:
    """Everything the driver did; ``basis`` is the result."""

    basis: list = None
    trace: Trace = None
    state: ReconstructionState = None
    attempts: list = field(default_factory=list)
    batches: list = field(default_factory=list)  # (images before, batch size)
    unlucky: list = field(default_factory=list)
    relearned: int = 0
    primes_used: int = 0


def _flatten(arrays) -> np.ndarray:
    if not arrays:
        return np.empty(0, dtype=np.int64)
    return np.concatenate([a[:, 0] for a in arrays])


def _subset_positions(trace: Trace):
    sizes = [len(s) for s in trace.final_supports]
    k = int(np.argmax(sizes))
    start = sum(sizes[:k])
    # skip the leading 1
    return list(range(start + 1, start + min(sizes[k], SUBSET_CAP + 1)))


def _assemble(trace: Trace, coeffs) -> list[dict]:
    out, pos = [], 0
    for keys in trace.final_keys:
        f = {}
        for e in keys:
            c = coeffs[pos]
            pos += 1
            if c:
                f[e] = c
        out.append(f)
    return out


def groebner_rational(polys: Sequence[dict], ring, *, seed: int = 0, stats: Stats | None = None,
                      arith=None, linalg: str = "det", batch: int = 4, prime_budget: int = 512,
                      guard_bits: int = 10, run: RationalRun | None = None, **_ignored) -> list[dict]:
    """Reduced Groebner basis over Q (Monte-Carlo), ascending leading monomials.

    ``run``, when given, is filled with the driver's history.
    """
    opts = MultimodularOptions(batch=batch, prime_budget=prime_budget, guard_bits=guard_bits,
                               seed=seed)
    stats = stats if stats is not None else NullStats()
    run = run if run is not None else RationalRun()
    if opts.batch not in (1, 2, 4, 8):
        raise F4Error("batch size must be 1, 2, 4 or 8")
    with stats.timed():
        return _drive(polys, ring, opts, stats, run, arith)


def _drive(polys, ring, opts, stats, run, arith):
    rng = random.Random(opts.seed)
    with stats.phase("other"):
        cleared = clear_denominators(polys)
        if not any(cleared):
            raise F4Error("the input system has no nonzero polynomial")
        stream = PrimeStream([c for f in cleared for c in f.values()])

    def take():
        if run.primes_used >= opts.prime_budget:
            raise ResourceError(f"prime budget of {opts.prime_budget} exhausted "
                                f"after {run.state.nimages if run.state else 0} images")
        run.primes_used += 1
        return next(stream)

    def learn(p):
        _, tr = f4_learn(cleared, ring.with_characteristic(p), seed=opts.seed, stats=stats)
        run.trace = tr
        run.state = ReconstructionState()
        arrays, _ = apply_batched_arrays(tr, cleared, [p], arith=arith, stats=stats)
        with stats.phase("other"):
            crt_combine(run.state, _flatten(arrays[0]), p)

    learn(take())
    full_miss = 0
    previous, prev_n = None, 0
    while True:
        st, tr = run.state, run.trace
        with stats.phase("other"):
            values = st.residues
            subset = _subset_positions(tr)
            sub_ok = reconstruct([values[i] for i in subset], st.M) is not None
            coeffs = reconstruct(values, st.M, previous) if sub_ok else None
            full_ok = coeffs is not None
            heur = full_ok and heuristic_check(coeffs, st.M, opts.guard_bits)
            # a lone image (the learning prime) is never trusted: an unlucky
            # learning prime can give the unit ideal, which every check accepts
            stable = full_ok and previous is not None and st.nimages > prev_n and coeffs == previous
            rnd = None
            if heur and stable:
                candidate = _assemble(tr, coeffs)
                rnd = randomized_check(candidate, cleared, ring, rng=rng, exclude=st.primes)
            run.attempts.append(Attempt(st.nimages, st.M.bit_length(), sub_ok, full_ok, heur, stable, rnd))
            if full_ok:
                previous, prev_n = coeffs, st.nimages
        if rnd:
            st.rationals = coeffs
            run.basis = candidate
            return candidate
        # images that agree but fail the check point at an unlucky learning prime
        if heur and stable and _trace_suspect(run, cleared, ring, take, opts, stats, arith):
            previous = None
            full_miss = 0
            continue
        n = st.nimages
        size = max(4, math.ceil(opts.growth * n))
        run.batches.append((n, size))
        got = 0
        primes = [take() for _ in range(size)]
        for i in range(0, size, opts.batch):
            chunk = primes[i:i + opts.batch]
            results, bad = apply_batched_arrays(tr, cleared, chunk, arith=arith, stats=stats)
            with stats.phase("other"):
                for l, p in enumerate(chunk):
                    if results[l] is None:
                        run.unlucky.append(p)
                        continue
                    crt_combine(st, _flatten(results[l]), p)
                    got += 1
        if got == 0:
            full_miss += 1
            if full_miss >= opts.relearn_after:
                run.relearned += 1
                learn(take())
                previous = None
                full_miss = 0
        else:
            full_miss = 0


def _trace_suspect(run, cleared, ring, take, opts, stats, arith) -> bool:
    """Compare the trace's leading monomials with classic F4 modulo a fresh prime.

    On mismatch the learning prime was unlucky: relearn on the fresh prime.
    """
    from .api import groebner, lead_exps

    q = take()
    rq = ring.with_characteristic(q)
    G = groebner(cleared, rq, seed=opts.seed, stats=stats)
    leads = [lead_exps(rq, g) for g in G]
    if leads == run.trace.leading_monomials:
        return False
    run.relearned += 1
    _, tr = f4_learn(cleared, rq, seed=opts.seed, stats=stats)
    run.trace = tr
    run.state = ReconstructionState()
    arrays, _ = apply_batched_arrays(tr, cleared, [q], arith=arith, stats=stats)
    crt_combine(run.state, _flatten(arrays[0]), q)
    return True
