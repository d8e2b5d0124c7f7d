"""Library entry points on plain polynomials.

A polynomial is a dict mapping exponent tuples to coefficients: residues in
[0, p) over GF(p), ``Fraction`` (or int) over Q.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .arith import FieldError, is_prime
from .f4 import F4Engine, F4Error, check_groebner, make_monic, normal_forms, spoly_rows
from .linalg import Lanes, MacaulayMatrix
from .monomials import DRL, MonomialOrdering, MonomialTable, PackedOverflow
from .stats import Stats


@dataclass(frozen=True)
class Ring:
    variables: tuple[str, ...]
    characteristic: int = 0
    ordering: MonomialOrdering = field(default=DRL)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if len(set(self.variables)) != len(self.variables):
            raise F4Error("variable names must be unique")
        if self.characteristic and not is_prime(self.characteristic):
            raise FieldError(f"characteristic {self.characteristic} is not a prime")
        self.ordering.check(self.nvars)

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def with_ordering(self, ordering) -> "Ring":
        return Ring(self.variables, self.characteristic, ordering)

    def with_characteristic(self, p: int) -> "Ring":
        return Ring(self.variables, p, self.ordering)

    def coerce(self, c):
        """Map a rational or integer into this ring's coefficient field."""
        p = self.characteristic
        if p == 0:
            return Fraction(c)
        c = Fraction(c)
        if c.denominator % p == 0:
            raise FieldError(f"denominator {c.denominator} vanishes modulo {p}")
        return c.numerator * pow(c.denominator, -1, p) % p

    def poly(self, terms: dict) -> dict:
        out = {}
        for e, c in terms.items():
            if len(e) != self.nvars:
                raise F4Error(f"monomial {e} does not match {self.nvars} variables")
            c = self.coerce(c)
            if c:
                out[tuple(e)] = c
        return out


# ----------------------------------------------------------- conversions


def make_table(ring: Ring, seed: int = 0, packed: bool | None = None) -> MonomialTable:
    return MonomialTable(ring.nvars, ring.ordering, seed=seed, packed=packed)


def to_rows(table: MonomialTable, polys, lanes: Lanes):
    """dict polynomials -> engine (mons, coeffs) rows over ``lanes``."""
    rows = []
    for f in polys:
        mons = [table.intern(e) for e in f]
        order = table.sort_desc(mons)
        pos = {m: i for i, m in enumerate(mons)}
        vals = list(f.values())
        col = [vals[pos[m]] for m in order]
        if lanes.is_rational:
            arr = np.array([Fraction(c) for c in col], dtype=object).reshape(-1, 1)
        else:
            arr = np.array([[int(c) % q for q in lanes.primes] for c in col],
                           dtype=lanes.dtype).reshape(-1, lanes.n)
        rows.append((order, arr))
    return rows


def from_rows(table: MonomialTable, rows, lane: int = 0):
    out = []
    for mons, coeffs in rows:
        f = {}
        for m, c in zip(mons, coeffs[:, lane]):
            if c:
                f[table.exps[m]] = c if isinstance(c, Fraction) else int(c)
        out.append(f)
    return out


def lead_exps(ring: Ring, f: dict):
    return max(f, key=ring.ordering.sort_key)


def sort_terms(ring: Ring, f: dict):
    return sorted(f.items(), key=lambda t: ring.ordering.sort_key(t[0]), reverse=True)


def monic(ring: Ring, f: dict) -> dict:
    if not f:
        return {}
    lc = f[lead_exps(ring, f)]
    if ring.characteristic:
        inv = pow(int(lc), -1, ring.characteristic)
        return {e: c * inv % ring.characteristic for e, c in f.items()}
    return {e: Fraction(c) / lc for e, c in f.items()}


def _lanes(ring: Ring, arith=None) -> Lanes:
    if ring.characteristic == 0:
        return Lanes.rational()
    return Lanes.of([ring.characteristic], arith)


def _retry_unpacked(fn, ring, seed):
    """Run ``fn(table)`` with packed monomials, falling back on degree overflow."""
    try:
        return fn(make_table(ring, seed))
    except PackedOverflow:
        return fn(make_table(ring, seed, packed=False))


# -------------------------------------------------------------- entry points


def groebner(polys: Sequence[dict], ring: Ring, *, linalg: str = "det", arith=None,
             seed: int = 0, stats: Stats | None = None, **mm_options) -> list[dict]:
    """Reduced Groebner basis, sorted by ascending leading monomial.

    Over GF(p) this runs F4 directly; over Q it runs the multi-modular driver.
    """
    polys = [ring.poly(f) for f in polys]
    if not any(polys):
        raise F4Error("the input system has no nonzero polynomial")
    if linalg not in ("det", "prob"):
        raise F4Error(f"unknown linear algebra mode {linalg!r}")
    if ring.characteristic == 0:
        from .multimodular import groebner_rational

        return groebner_rational(polys, ring, seed=seed, stats=stats, arith=arith,
                                 linalg=linalg, **mm_options)
    lanes = _lanes(ring, arith)

    def run(table):
        eng = F4Engine(table, lanes, probabilistic=(linalg == "prob"), seed=seed, stats=stats)
        rows = to_rows(table, polys, lanes)
        if stats is not None:
            with stats.timed():
                out = eng.run(rows)
        else:
            out = eng.run(rows)
        return from_rows(table, out)

    return _retry_unpacked(run, ring, seed)


def f4(polys, ring: Ring, **kw) -> list[dict]:
    return groebner(polys, ring, **kw)


def normal_form(f: dict, G: Sequence[dict], ring: Ring) -> dict:
    """Remainder of f after full reduction by the leading terms of G."""
    return normal_form_many([f], G, ring)[0]


def normal_form_many(fs, G, ring: Ring):
    fs = [ring.poly(f) for f in fs]
    G = [monic(ring, ring.poly(g)) for g in G if g]
    G = [g for g in G if g]
    lanes = _lanes(ring)

    def run(table):
        Grows = to_rows(table, G, lanes)
        rows = to_rows(table, fs, lanes)
        return from_rows(table, normal_forms(table, lanes, rows, Grows))

    return _retry_unpacked(run, ring, 0)


def is_groebner(G: Sequence[dict], ring: Ring) -> bool:
    G = [monic(ring, ring.poly(g)) for g in G]
    G = [g for g in G if g]
    if not G:
        raise F4Error("empty set")
    lanes = _lanes(ring)

    def run(table):
        return check_groebner(table, lanes, to_rows(table, G, lanes))

    return _retry_unpacked(run, ring, 0)


def spoly(f: dict, g: dict, ring: Ring) -> dict:
    """lcm/lt(f) * f - lcm/lt(g) * g."""
    f, g = ring.poly(f), ring.poly(g)
    if not f or not g:
        raise F4Error("S-polynomial of a zero polynomial")
    lf, lg = lead_exps(ring, f), lead_exps(ring, g)
    L = tuple(map(max, lf, lg))
    p = ring.characteristic
    out = {}
    for poly, lm, sign in ((f, lf, 1), (g, lg, -1)):
        shift = tuple(a - b for a, b in zip(L, lm))
        if p:
            scale = sign * pow(int(poly[lm]), -1, p)
        else:
            scale = sign / Fraction(poly[lm])
        for e, c in poly.items():
            m = tuple(a + b for a, b in zip(e, shift))
            v = out.get(m, 0) + scale * c
            out[m] = v % p if p else v
    return {e: c for e, c in out.items() if c}


def autoreduce(G: Sequence[dict], ring: Ring) -> list[dict]:
    """Reduced form of a Groebner basis: monic, tails irreducible, ascending leads."""
    G = [monic(ring, ring.poly(g)) for g in G if g]
    G = [g for g in G if g]
    lanes = _lanes(ring)

    def run(table):
        eng = F4Engine(table, lanes)
        for mons, coeffs in to_rows(table, G, lanes):
            h = eng.add(mons, coeffs)
            eng.update(h)
        eng.pairs = []
        _, out = eng.autoreduce()
        return from_rows(table, out)

    return _retry_unpacked(run, ring, 0)


def macaulay_matrix(polys: Sequence[dict], ring: Ring):
    """Macaulay matrix of a polynomial set: (column monomials, dense rows).

    Columns are all monomials occurring in ``polys``, largest first.
    """
    polys = [ring.poly(f) for f in polys]
    cols = sorted({e for f in polys for e in f}, key=ring.ordering.sort_key, reverse=True)
    pos = {e: i for i, e in enumerate(cols)}
    rows = []
    for f in polys:
        r = [0] * len(cols)
        for e, c in f.items():
            r[pos[e]] = c
        rows.append(r)
    return cols, rows
