"""Monomials: exponent vectors, packed words, division masks, orderings and
the per-computation interning table with an additive hash."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from operator import add, sub
from typing import Sequence

MASK64 = (1 << 64) - 1

PACK_BITS = 8
PACK_MAX_VARS = 31
PACK_MAX_DEGREE = 127

DIVMASK_BITS = 32

ORDERINGS = ("lex", "deglex", "degrevlex", "wdegrevlex")


class MonomialError(ValueError):
    """Bad monomial arguments (mismatched variable counts, non-divisor, ...)."""


class PackedOverflow(ArithmeticError):
    """A packed product left the representable range."""


# ---------------------------------------------------------------- orderings


@dataclass(frozen=True)
class MonomialOrdering:
    kind: str = "degrevlex"
    weights: tuple[int, ...] | None = None

    def __post_init__(self):
        kind = {"drl": "degrevlex", "grevlex": "degrevlex", "grlex": "deglex"}.get(
            self.kind, self.kind
        )
        object.__setattr__(self, "kind", kind)
        if kind not in ORDERINGS:
            raise MonomialError(f"unknown monomial ordering {self.kind!r}")
        if kind == "wdegrevlex":
            if not self.weights or any(w <= 0 for w in self.weights):
                raise MonomialError("weighted ordering needs strictly positive weights")
            object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        elif self.weights is not None:
            raise MonomialError(f"{kind} takes no weights")

    @classmethod
    def parse(cls, text: str) -> "MonomialOrdering":
        """Parse ``lex``, ``deglex``, ``degrevlex`` or ``wdegrevlex:1,2,3``."""
        if text.startswith("wdegrevlex"):
            _, _, w = text.partition(":")
            try:
                weights = tuple(int(t) for t in w.split(","))
            except ValueError:
                raise MonomialError(f"bad weights in {text!r}") from None
            return cls("wdegrevlex", weights)
        return cls(text)

    def __str__(self):
        if self.weights:
            return f"{self.kind}:{','.join(map(str, self.weights))}"
        return self.kind

    def check(self, nvars: int) -> None:
        if self.weights is not None and len(self.weights) != nvars:
            raise MonomialError(
                f"ordering has {len(self.weights)} weights, ring has {nvars} variables"
            )

    def sort_key(self, exps: Sequence[int]):
        """Tuple key, increasing with the monomial under this ordering."""
        if self.kind == "lex":
            return tuple(exps)
        if self.kind == "deglex":
            return (sum(exps),) + tuple(exps)
        rev = tuple(-e for e in reversed(exps))
        if self.kind == "degrevlex":
            return (sum(exps),) + rev
        return (sum(w * e for w, e in zip(self.weights, exps)),) + rev

    def packed_key(self, exps: Sequence[int]) -> int:
        """Integer key equivalent to :meth:`sort_key` when every exponent < 256."""
        n = len(exps)
        if self.kind in ("lex", "deglex"):
            key = 0
            for e in exps:
                key = (key << PACK_BITS) | e
            if self.kind == "deglex":
                key |= sum(exps) << (PACK_BITS * n)
            return key
        key = 0
        for e in reversed(exps):
            key = (key << PACK_BITS) | (255 - e)
        if self.kind == "degrevlex":
            deg = sum(exps)
        else:
            deg = sum(w * e for w, e in zip(self.weights, exps))
        return key | (deg << (PACK_BITS * n))


DRL = MonomialOrdering("degrevlex")


def monomial_cmp(u, v, ordering: MonomialOrdering = DRL) -> int:
    """Three-way comparison: -1 if u < v, 0 if equal, 1 if u > v.

    Accepts exponent tuples or :class:`PackedMonomial` values.  Packed values
    under degrevlex are compared directly on their words.
    """
    if isinstance(u, PackedMonomial) and isinstance(v, PackedMonomial):
        if u.nvars != v.nvars:
            raise MonomialError("monomials over different variable counts")
        if ordering.kind == "degrevlex":
            return packed_drl_cmp(u, v)
        u, v = u.unpack(), v.unpack()
    if isinstance(u, PackedMonomial):
        u = u.unpack()
    if isinstance(v, PackedMonomial):
        v = v.unpack()
    if len(u) != len(v):
        raise MonomialError("monomials over different variable counts")
    ku, kv = ordering.sort_key(u), ordering.sort_key(v)
    return (ku > kv) - (ku < kv)


# ------------------------------------------------------- exponent arithmetic


def _same_length(u, v):
    if len(u) != len(v):
        raise MonomialError("monomials over different variable counts")


def monomial_mul(u, v):
    if isinstance(u, PackedMonomial) and isinstance(v, PackedMonomial):
        return packed_mul(u, v)
    _same_length(u, v)
    return tuple(map(add, u, v))


def monomial_lcm(u, v):
    _same_length(u, v)
    return tuple(map(max, u, v))


def monomial_gcd(u, v):
    _same_length(u, v)
    return tuple(map(min, u, v))


def monomial_divides(u, v) -> bool:
    """True when u divides v."""
    _same_length(u, v)
    return all(a <= b for a, b in zip(u, v))


def monomial_div(u, v):
    """u / v; v must divide u."""
    if not monomial_divides(v, u):
        raise MonomialError(f"{v} does not divide {u}")
    return tuple(map(sub, u, v))


def is_coprime(u, v) -> bool:
    return all(a == 0 or b == 0 for a, b in zip(u, v))


# ------------------------------------------------------------------ packing


@dataclass(frozen=True)
class PackedMonomial:
    """Exponents packed into 64-bit words, most significant word first.

    Field layout, from the top: total degree, then x_n, x_{n-1}, ..., x_1,
    each ``bits`` wide.  Because the degree field sits on top and the
    variables come in reverse, a product is plain integer addition and a
    degrevlex comparison needs one degree compare plus a word compare.
    """

    words: tuple[int, ...]
    nvars: int
    bits: int = PACK_BITS

    @property
    def value(self) -> int:
        v = 0
        for w in self.words:
            v = (v << 64) | w
        return v

    @property
    def degree(self) -> int:
        return self.value >> (self.bits * self.nvars)

    def unpack(self) -> tuple[int, ...]:
        v, b = self.value, self.bits
        fmask = (1 << b) - 1
        return tuple((v >> (b * i)) & fmask for i in range(self.nvars))


def _nwords(nvars: int, bits: int) -> int:
    return ((nvars + 1) * bits + 63) // 64


def pack_limits(bits: int = PACK_BITS) -> tuple[int, int]:
    """(max variables, max total degree) representable with ``bits``-bit fields."""
    return 256 // bits - 1, (1 << (bits - 1)) - 1


def pack(exps: Sequence[int], bits: int = PACK_BITS) -> PackedMonomial | None:
    """Pack an exponent vector, or return None when it is not representable."""
    max_vars, max_deg = pack_limits(bits)
    n = len(exps)
    deg = sum(exps)
    if n > max_vars or deg > max_deg or any(e < 0 for e in exps):
        return None
    v = deg
    for e in reversed(exps):
        v = (v << bits) | e
    return _from_value(v, n, bits)


def _from_value(v: int, nvars: int, bits: int) -> PackedMonomial:
    k = _nwords(nvars, bits)
    words = tuple((v >> (64 * (k - 1 - i))) & MASK64 for i in range(k))
    return PackedMonomial(words, nvars, bits)


def unpack(pm: PackedMonomial) -> tuple[int, ...]:
    return pm.unpack()


def packed_mul(u: PackedMonomial, v: PackedMonomial):
    """Product of packed monomials.

    Returns a packed result while the degree stays representable, otherwise
    falls back to the exponent-vector product.
    """
    if u.nvars != v.nvars or u.bits != v.bits:
        raise MonomialError("packed monomials with different layouts")
    _, max_deg = pack_limits(u.bits)
    if u.degree + v.degree > max_deg:
        return tuple(map(add, u.unpack(), v.unpack()))
    return _from_value(u.value + v.value, u.nvars, u.bits)


def packed_drl_cmp(u: PackedMonomial, v: PackedMonomial) -> int:
    du, dv = u.degree, v.degree
    if du != dv:
        return -1 if du < dv else 1
    # equal degree: the larger packed value has the larger trailing exponent
    if u.words == v.words:
        return 0
    return -1 if u.words > v.words else 1


# ----------------------------------------------------------- division masks


@dataclass(frozen=True)
class DivmaskLayout:
    """Per-variable bit fields of a division mask.

    With ``nvars <= total_bits`` every variable owns ``total_bits // nvars``
    bits holding a saturated unary code of its exponent, x_1 in the highest
    field.  With more variables, variable i sets bit ``i * total_bits //
    nvars`` when its exponent is positive, so several variables share a bit.
    """

    nvars: int
    total_bits: int = DIVMASK_BITS
    width: int | None = None

    def __post_init__(self):
        if self.width is None:
            object.__setattr__(self, "width", max(1, self.total_bits // max(self.nvars, 1)))

    @property
    def compressed(self) -> bool:
        return self.nvars > self.total_bits

    def of(self, exps: Sequence[int]) -> int:
        if len(exps) != self.nvars:
            raise MonomialError("exponent vector does not match mask layout")
        if self.compressed:
            mask = 0
            for i, e in enumerate(exps):
                if e:
                    mask |= 1 << (self.total_bits - 1 - (i * self.total_bits) // self.nvars)
            return mask
        w = self.width
        mask = 0
        for e in exps:
            mask = (mask << w) | ((1 << min(e, w)) - 1)
        return mask


def divmask_of(exps: Sequence[int], layout: DivmaskLayout) -> int:
    return layout.of(exps)


def divmask_filter(d1: int, d2: int) -> bool:
    """Necessary condition for m2 | m1; False means m2 certainly does not divide m1."""
    return (~d1 & d2) == 0


# ------------------------------------------------------------------ hashing


def hash_weights(nvars: int, seed: int = 0) -> tuple[int, ...]:
    rng = random.Random(seed)
    return tuple(rng.getrandbits(64) for _ in range(nvars))


def monomial_hash(exps: Sequence[int], weights: Sequence[int]) -> int:
    h = 0
    for e, w in zip(exps, weights):
        h += e * w
    return h & MASK64


# ----------------------------------------------------------- interning table


@dataclass
class MonomialTable:
    """Interns monomials of one computation; ids are dense and stable.

    Per-id attributes are kept in parallel lists.  The index maps the additive
    hash to an id; the rare colliding monomials live in ``_spill`` keyed by
    the exponent tuple.
    """

    nvars: int
    ordering: MonomialOrdering = DRL
    seed: int = 0
    packed: bool | None = None
    exps: list = field(default_factory=list)
    degs: list = field(default_factory=list)
    masks: list = field(default_factory=list)
    hashes: list = field(default_factory=list)
    keys: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def __post_init__(self):
        self.ordering.check(self.nvars)
        if self.packed is None:
            self.packed = self.nvars <= PACK_MAX_VARS
        elif self.packed and self.nvars > PACK_MAX_VARS:
            raise MonomialError(f"packed monomials support at most {PACK_MAX_VARS} variables")
        self.weights = hash_weights(self.nvars, self.seed)
        self.layout = DivmaskLayout(self.nvars)
        self.index: dict[int, int] = {}
        self._spill: dict[tuple, int] = {}
        self.one = self.intern((0,) * self.nvars)

    def __len__(self):
        return len(self.exps)

    def _new(self, e: tuple, h: int) -> int:
        deg = sum(e)
        if self.packed:
            if deg > PACK_MAX_DEGREE:
                raise PackedOverflow(f"total degree {deg} exceeds {PACK_MAX_DEGREE}")
            v = deg
            for x in reversed(e):
                v = (v << PACK_BITS) | x
            self.values.append(v)
            self.keys.append(self.ordering.packed_key(e))
        else:
            self.keys.append(self.ordering.sort_key(e))
        i = len(self.exps)
        self.exps.append(e)
        self.degs.append(deg)
        self.masks.append(self.layout.of(e))
        self.hashes.append(h)
        if h in self.index:
            self._spill[e] = i
        else:
            self.index[h] = i
        return i

    def _find(self, e: tuple, h: int):
        i = self.index.get(h)
        if i is None:
            return None
        if self.exps[i] == e:
            return i
        return self._spill.get(e)

    def intern(self, exps: Sequence[int]) -> int:
        e = tuple(int(x) for x in exps)
        if len(e) != self.nvars:
            raise MonomialError(f"expected {self.nvars} exponents, got {len(e)}")
        if any(x < 0 for x in e):
            raise MonomialError("negative exponent")
        h = monomial_hash(e, self.weights)
        i = self._find(e, h)
        return self._new(e, h) if i is None else i

    def resolve(self, i: int) -> tuple[int, ...]:
        return self.exps[i]

    def mul(self, a: int, b: int) -> int:
        """Intern the product of two interned monomials (hash reused additively)."""
        h = (self.hashes[a] + self.hashes[b]) & MASK64
        i = self.index.get(h)
        if i is not None:
            if self.packed:
                if self.values[i] == self.values[a] + self.values[b]:
                    return i
            elif self.exps[i] == tuple(map(add, self.exps[a], self.exps[b])):
                return i
        e = tuple(map(add, self.exps[a], self.exps[b]))
        j = self._find(e, h)
        return self._new(e, h) if j is None else j

    def mul_many(self, m: int, mons) -> list[int]:
        """Ids of ``m * t`` for each id ``t`` in ``mons``; the hot loop of preprocessing."""
        hm = self.hashes[m]
        index, hashes = self.index, self.hashes
        out = []
        if self.packed:
            values = self.values
            vm = values[m]
            for t in mons:
                i = index.get((hashes[t] + hm) & MASK64)
                if i is None or values[i] != values[t] + vm:
                    i = self.mul(m, t)
                out.append(i)
        else:
            for t in mons:
                out.append(self.mul(m, t))
        return out

    def div(self, a: int, b: int) -> int:
        """Intern a / b; b must divide a."""
        return self.intern(monomial_div(self.exps[a], self.exps[b]))

    def lcm(self, a: int, b: int) -> int:
        return self.intern(tuple(map(max, self.exps[a], self.exps[b])))

    def divides(self, a: int, b: int) -> bool:
        """True when monomial a divides monomial b (mask filter, then exact check)."""
        if (~self.masks[b] & self.masks[a]) != 0:
            return False
        return all(x <= y for x, y in zip(self.exps[a], self.exps[b]))

    def coprime(self, a: int, b: int) -> bool:
        return is_coprime(self.exps[a], self.exps[b])

    def cmp(self, a: int, b: int) -> int:
        ka, kb = self.keys[a], self.keys[b]
        return (ka > kb) - (ka < kb)

    def sort_desc(self, ids) -> list[int]:
        return sorted(ids, key=self.keys.__getitem__, reverse=True)

    def packed_of(self, i: int) -> PackedMonomial | None:
        if not self.packed:
            return None
        return _from_value(self.values[i], self.nvars, PACK_BITS)
