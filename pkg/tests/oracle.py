"""Brute-force Buchberger with full auto-reduction, written independently of
the package: plain dict polynomials, tuple keys, heap-driven division."""

from __future__ import annotations

import heapq
from fractions import Fraction


def order_key(kind, weights=None):
    if kind == "lex":
        return lambda e: tuple(e)
    if kind == "deglex":
        return lambda e: (sum(e),) + tuple(e)
    if kind in ("degrevlex", "drl"):
        return lambda e: (sum(e),) + tuple(-x for x in reversed(e))
    if kind == "wdegrevlex":
        return lambda e: (sum(w * x for w, x in zip(weights, e)),) + tuple(-x for x in reversed(e))
    raise ValueError(kind)


class Arith:
    def __init__(self, p=0):
        self.p = p

    def norm(self, c):
        if self.p:
            return Fraction(c).numerator * pow(Fraction(c).denominator, -1, self.p) % self.p
        return Fraction(c)

    def inv(self, c):
        return pow(c, -1, self.p) if self.p else 1 / c

    def sub(self, a, b):
        return (a - b) % self.p if self.p else a - b

    def mul(self, a, b):
        return a * b % self.p if self.p else a * b


def lead(f, key):
    return max(f, key=key)


def monic(f, key, A):
    lc = f[lead(f, key)]
    inv = A.inv(lc)
    return {e: A.mul(c, inv) for e, c in f.items()}


def divides(a, b):
    return all(x <= y for x, y in zip(a, b))


def reduce_full(f, G, key, A):
    """Remainder of f by the (monic) polynomials G."""
    f = dict(f)
    leads = [(lead(g, key), g) for g in G]
    heap = [(_neg(key(e)), e) for e in f]
    heapq.heapify(heap)
    rem = {}
    while heap:
        _, e = heapq.heappop(heap)
        c = f.get(e)
        if not c:
            continue
        for lm, g in leads:
            if divides(lm, e):
                shift = tuple(x - y for x, y in zip(e, lm))
                for ge, gc in g.items():
                    m = tuple(x + y for x, y in zip(ge, shift))
                    old = f.get(m, 0)
                    v = A.sub(old, A.mul(c, gc))
                    if v:
                        if not old:
                            heapq.heappush(heap, (_neg(key(m)), m))
                        f[m] = v
                    else:
                        f.pop(m, None)
                break
        else:
            rem[e] = c
            del f[e]
    return rem


def _neg(k):
    return tuple(-x for x in k)


def spoly(f, g, key, A):
    lf, lg = lead(f, key), lead(g, key)
    L = tuple(map(max, lf, lg))
    out = {}
    for poly, lm, sign in ((f, lf, 1), (g, lg, -1)):
        shift = tuple(x - y for x, y in zip(L, lm))
        for e, c in poly.items():
            m = tuple(x + y for x, y in zip(e, shift))
            v = out.get(m, 0)
            v = A.sub(v, c) if sign < 0 else (v + c) % A.p if A.p else v + c
            out[m] = v
    return {e: c for e, c in out.items() if c}


def buchberger(F, kind="degrevlex", p=0, weights=None):
    """Reduced Groebner basis of F, sorted by ascending leading monomial."""
    key = order_key(kind, weights)
    A = Arith(p)
    G = []
    for f in F:
        f = {tuple(e): A.norm(c) for e, c in f.items()}
        f = {e: c for e, c in f.items() if c}
        if f:
            G.append(monic(f, key, A))
    pairs = [(i, j) for i in range(len(G)) for j in range(i + 1, len(G))]
    while pairs:
        pairs.sort(key=lambda ij: sum(map(max, lead(G[ij[0]], key), lead(G[ij[1]], key))))
        i, j = pairs.pop(0)
        li, lj = lead(G[i], key), lead(G[j], key)
        if all(a == 0 or b == 0 for a, b in zip(li, lj)):
            continue
        r = reduce_full(spoly(G[i], G[j], key, A), G, key, A)
        if r:
            G.append(monic(r, key, A))
            k = len(G) - 1
            pairs.extend((t, k) for t in range(k))
    return reduce_basis(G, key, A)


def reduce_basis(G, key, A):
    G = [g for g in G if g]
    minimal = []
    for i, g in enumerate(G):
        lg = lead(g, key)
        if any(
            divides(lead(h, key), lg) and (lead(h, key) != lg or j < i)
            for j, h in enumerate(G)
            if j != i
        ):
            continue
        minimal.append(g)
    out = []
    for i, g in enumerate(minimal):
        others = minimal[:i] + minimal[i + 1:]
        lg = lead(g, key)
        tail = {e: c for e, c in g.items() if e != lg}
        r = reduce_full(tail, others, key, A)
        r[lg] = g[lg]
        out.append(monic(r, key, A))
    return sorted(out, key=lambda f: key(lead(f, key)))


def canonical(G, key=None):
    """Hashable form for set comparisons."""
    return sorted(tuple(sorted(g.items())) for g in G)
