"""Arithmetic in Z/pZ: generic (multiply-shift remainder), signed and delayed
flavors, plus coefficient tuples over a batch of primes.

The scalar functions here are the reference versions; the compiled row
kernels in :mod:`f4gb._kernels` implement the same update rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import gmpy2
import numpy as np

GENERIC, SIGNED, DELAYED = "generic", "signed", "delayed"
FLAVORS = (GENERIC, SIGNED, DELAYED)

DELAYED_CUTOFF_BITS = 27
KERNEL_PRIME_BITS = 31  # primes the compiled kernels accept (64-bit operations)
KERNEL_OPERAND_BITS = 63


class FieldError(ValueError):
    pass


def is_prime(n: int) -> bool:
    return n >= 2 and bool(gmpy2.is_prime(n))


def magic_precompute(p: int, operand_bits: int = 64) -> tuple[int, int]:
    """Return (m, s) with floor(x / p) == (m * x) >> s for all 0 <= x < 2**operand_bits.

    With s = operand_bits + bitlen(p) and m = ceil(2**s / p) the error
    e = m*p - 2**s < p satisfies e*x < 2**s, which is enough.
    """
    if p < 2:
        raise FieldError(f"modulus must be at least 2, got {p}")
    s = operand_bits + p.bit_length()
    m = -(-(1 << s) // p)
    return m, s


def flavor_select(p: int, storage_bits: int = 32, requested: str | None = None) -> str:
    """Delayed for primes below 2**27 in 32-bit storage, generic otherwise."""
    if requested not in (None, "auto"):
        if requested not in FLAVORS:
            raise FieldError(f"unknown arithmetic flavor {requested!r}")
        return requested
    if storage_bits == 32 and p < (1 << DELAYED_CUTOFF_BITS):
        return DELAYED
    return GENERIC


@dataclass(frozen=True)
class PrimeField:
    p: int
    magic_m: int
    magic_s: int
    flavor: str = GENERIC
    coeff_bits: int = 32

    @classmethod
    def make(cls, p: int, flavor: str | None = None, check_prime: bool = True) -> "PrimeField":
        if p < 2 or (check_prime and not is_prime(p)):
            raise FieldError(f"{p} is not a prime")
        if p >= 1 << 64:
            raise FieldError("primes must be below 2**64")
        coeff_bits = 32 if p < (1 << 32) else 64
        fl = flavor_select(p, coeff_bits, flavor)
        if fl == DELAYED and p >= (1 << DELAYED_CUTOFF_BITS):
            raise FieldError(f"delayed arithmetic needs p < 2**{DELAYED_CUTOFF_BITS}")
        if fl == SIGNED and p >= (1 << KERNEL_PRIME_BITS):
            raise FieldError(f"signed arithmetic needs p < 2**{KERNEL_PRIME_BITS}")
        m, s = magic_precompute(p, KERNEL_OPERAND_BITS if p < (1 << 31) else 128)
        return cls(p, m, s, fl, coeff_bits)

    @property
    def machine(self) -> bool:
        """Whether the compiled 64-bit kernels can run this field."""
        return self.p < (1 << KERNEL_PRIME_BITS)

    def reduce(self, x: int) -> int:
        return mod_reduce_generic(x, self)

    def mul(self, a: int, b: int) -> int:
        return mulmod_generic(a, b, self)

    def inv(self, a: int) -> int:
        return inv_mod(a, self.p)


def mod_reduce_generic(x: int, field: PrimeField) -> int:
    """x mod p through the precomputed multiply-shift quotient."""
    q = (field.magic_m * x) >> field.magic_s
    return x - q * field.p


def mulmod_generic(a: int, b: int, field: PrimeField) -> int:
    return mod_reduce_generic(a * b, field)


def addmul_signed(x: int, c: int, y: int, p: int) -> int:
    """x - c*y, then + p**2 when negative; keeps x in [0, p**2) for x in that range."""
    x = x - c * y
    if x < 0:
        x += p * p
    return x


@lru_cache(maxsize=None)
def delayed_threshold(p: int, acc_bits: int = 63) -> int:
    """How many products below p**2 can be added to a value below p before
    an ``acc_bits``-bit accumulator could overflow."""
    return ((1 << acc_bits) - 1 - p) // ((p - 1) * (p - 1))


def delayed_row_reduce(pairs, p: int, acc_bits: int = 63) -> int:
    """Sum of c*y over ``pairs`` mod p with reduction deferred by a count threshold.

    Raises ``OverflowError`` if an intermediate ever exceeds the accumulator,
    which the threshold rules out.
    """
    limit = delayed_threshold(p, acc_bits)
    if limit < 1:
        raise FieldError(f"p={p} leaves no headroom for delayed reduction")
    bound = 1 << acc_bits
    acc, count = 0, 0
    for c, y in pairs:
        acc += c * y
        count += 1
        if acc >= bound:
            raise OverflowError("delayed accumulator overflow")
        if count == limit:
            acc %= p
            count = 0
    return acc % p


def inv_mod(a: int, p: int) -> int:
    a %= p
    if a == 0:
        raise FieldError("zero has no inverse")
    return pow(a, -1, p)


# -------------------------------------------------------- coefficient tuples


class CoefficientTuple:
    """Residues over a fixed batch of primes, stored contiguously."""

    __slots__ = ("primes", "residues")

    def __init__(self, residues, primes):
        self.primes = np.asarray(primes, dtype=np.int64)
        self.residues = np.asarray(residues, dtype=np.int64) % self.primes

    @classmethod
    def lift(cls, value: int, primes) -> "CoefficientTuple":
        return cls([value % int(q) for q in primes], primes)

    def _check(self, other):
        if not np.array_equal(self.primes, other.primes):
            raise FieldError("tuples over different prime batches")

    def __add__(self, other):
        self._check(other)
        return CoefficientTuple((self.residues + other.residues) % self.primes, self.primes)

    def __mul__(self, other):
        self._check(other)
        # residues < 2**31 so the product fits in int64
        return CoefficientTuple(self.residues * other.residues % self.primes, self.primes)

    def addmul(self, c, y):
        """self + c*y, componentwise."""
        self._check(c)
        self._check(y)
        return CoefficientTuple(
            (self.residues + c.residues * y.residues % self.primes) % self.primes, self.primes
        )

    def __eq__(self, other):
        return (
            isinstance(other, CoefficientTuple)
            and np.array_equal(self.primes, other.primes)
            and np.array_equal(self.residues, other.residues)
        )

    def __repr__(self):
        return f"CoefficientTuple({self.residues.tolist()}, primes={self.primes.tolist()})"


def tuple_add(a: CoefficientTuple, b: CoefficientTuple) -> CoefficientTuple:
    return a + b


def tuple_mul(a: CoefficientTuple, b: CoefficientTuple) -> CoefficientTuple:
    return a * b


def tuple_addmul(x: CoefficientTuple, c: CoefficientTuple, y: CoefficientTuple) -> CoefficientTuple:
    return x.addmul(c, y)
