"""Text format for polynomial systems and canonical basis files.

A system file is

    x, y, z          variables
    0                characteristic (0 or a prime)
    x^2 + 2*x*z + 3*z, 2*x + 4*y + 3
    # comments run to the end of the line

Polynomials are separated by commas or newlines.  Basis files use the
same layout, one polynomial per line, so they can be read back.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from fractions import Fraction

from .api import Ring, lead_exps
from .arith import is_prime
from .monomials import DRL, MonomialOrdering

NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
MAX_CHAR = 2**63


class ParseError(ValueError):
    def __init__(self, msg, line=None, col=None):
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", column {col}" if col is not None else "")
        super().__init__(msg + where)
        self.line, self.col = line, col


@dataclass(frozen=True)
class SystemFile:
    variables: tuple[str, ...]
    characteristic: int
    polys: tuple[dict, ...]

    def ring(self, ordering: MonomialOrdering = DRL) -> Ring:
        return Ring(self.variables, self.characteristic, ordering)


# --------------------------------------------------------------- lexing

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\S))")


def _tokens(text, line):
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:  # trailing whitespace
            return
        col = m.start(m.lastindex) + 1
        if m.group(1) is not None:
            yield ("num", int(m.group(1)), line, col)
        elif m.group(2) is not None:
            yield ("name", m.group(2), line, col)
        else:
            yield ("op", m.group(3), line, col)
        pos = m.end()


class _Parser:
    """Recursive descent over one polynomial's tokens."""

    def __init__(self, tokens, index, p, end):
        self.toks = tokens
        self.i = 0
        self.index = index
        self.nvars = len(index)
        self.p = p
        self.end = end  # (line, col) for errors at end of input

    # field helpers
    def const(self, c):
        if self.p:
            c = Fraction(c)
            return {(0,) * self.nvars: c.numerator * pow(c.denominator, -1, self.p) % self.p} \
                if c.numerator % self.p else {}
        return {(0,) * self.nvars: Fraction(c)} if c else {}

    def add(self, f, g, sign=1):
        out = dict(f)
        for e, c in g.items():
            v = out.get(e, 0) + sign * c
            if self.p:
                v %= self.p
            if v:
                out[e] = v
            else:
                out.pop(e, None)
        return out

    def mul(self, f, g):
        out = {}
        for e1, c1 in f.items():
            for e2, c2 in g.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                v = out.get(e, 0) + c1 * c2
                if self.p:
                    v %= self.p
                out[e] = v
        return {e: c for e, c in out.items() if c}

    # token access
    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self):
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of polynomial", *self.end)
        self.i += 1
        return t

    def expect(self, op):
        t = self.take()
        if t[0] != "op" or t[1] != op:
            raise ParseError(f"expected {op!r}, found {t[1]!r}", t[2], t[3])

    def parse(self):
        f = self.expr()
        t = self.peek()
        if t is not None:
            raise ParseError(f"unexpected {t[1]!r}", t[2], t[3])
        return f

    def expr(self):
        sign = 1
        t = self.peek()
        if t is not None and t[0] == "op" and t[1] in "+-":
            self.take()
            sign = -1 if t[1] == "-" else 1
        f = self.add({}, self.term(), sign)
        while True:
            t = self.peek()
            if t is None or t[0] != "op" or t[1] not in "+-":
                return f
            self.take()
            f = self.add(f, self.term(), -1 if t[1] == "-" else 1)

    def term(self):
        f = self.factor()
        while True:
            t = self.peek()
            if t is None or t[0] != "op" or t[1] != "*":
                return f
            self.take()
            f = self.mul(f, self.factor())

    def factor(self):
        f = self.base()
        t = self.peek()
        if t is not None and t[0] == "op" and t[1] == "^":
            self.take()
            e = self.take()
            if e[0] != "num":
                raise ParseError(f"bad exponent {e[1]!r}", e[2], e[3])
            g = self.const(1)
            for _ in range(e[1]):
                g = self.mul(g, f)
            f = g
        return f

    def base(self):
        t = self.take()
        kind, val, line, col = t
        if kind == "num":
            nxt = self.peek()
            if nxt is not None and nxt[0] == "op" and nxt[1] == "/":
                self.take()
                d = self.take()
                if d[0] != "num":
                    raise ParseError("bad rational literal", d[2], d[3])
                if self.p:
                    raise ParseError("rational literals need characteristic 0", line, col)
                if d[1] == 0:
                    raise ParseError("zero denominator", d[2], d[3])
                return self.const(Fraction(val, d[1]))
            return self.const(val)
        if kind == "name":
            if val not in self.index:
                raise ParseError(f"unknown variable {val}", line, col)
            e = [0] * self.nvars
            e[self.index[val]] = 1
            return {tuple(e): 1}
        if val == "(":
            f = self.expr()
            self.expect(")")
            return f
        raise ParseError(f"unexpected {val!r}", line, col)


def _strip(line):
    return line.split("#", 1)[0]


def parse_system(data, *, coefficients_over_q: bool = False) -> SystemFile:
    """Parse system text (str or UTF-8 bytes).

    ``coefficients_over_q`` keeps integer coefficients exact even when the
    declared characteristic is a prime, for reuse modulo other primes.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8 ({exc.reason})") from None
    lines = data.split("\n")
    content = [(i + 1, _strip(l)) for i, l in enumerate(lines)]
    content = [(n, l) for n, l in content if l.strip()]
    if not content:
        raise ParseError("missing variable line", 1)
    vline, vtext = content[0]
    names = [v.strip() for v in vtext.split(",")]
    for v in names:
        if not NAME.match(v):
            raise ParseError(f"bad variable name {v!r}", vline)
    if len(set(names)) != len(names):
        raise ParseError("duplicate variable name", vline)
    if len(content) < 2:
        raise ParseError("missing characteristic line", vline + 1)
    cline, ctext = content[1]
    try:
        p = int(ctext.strip())
    except ValueError:
        raise ParseError(f"bad characteristic {ctext.strip()!r}", cline) from None
    if p != 0 and (p < 2 or p >= MAX_CHAR or not is_prime(p)):
        raise ParseError(f"characteristic {p} is not 0 or a prime below 2^63", cline)
    index = {v: i for i, v in enumerate(names)}

    polys, current = [], []
    depth = 0
    last = (cline, 1)

    def flush(where):
        if current:
            polys.append(_Parser(current, index, 0 if coefficients_over_q else p, where).parse())
            current.clear()

    for n, text in content[2:]:
        for tok in _tokens(text, n):
            kind, val, line, col = tok
            last = (line, col)
            if kind == "op" and val == "," and depth == 0:
                if not current:
                    raise ParseError("empty polynomial", line, col)
                flush((line, col))
                continue
            if kind == "op" and val == "(":
                depth += 1
            elif kind == "op" and val == ")":
                depth -= 1
            current.append(tok)
        if depth == 0:
            flush((n, len(text) + 1))
    if depth:
        raise ParseError("unbalanced parentheses", *last)
    flush(last)
    if not polys:
        raise ParseError("empty system", last[0])
    return SystemFile(tuple(names), p, tuple(polys))


def read_system(path, **kw) -> SystemFile:
    with open(path, "rb") as fh:
        return parse_system(fh.read(), **kw)


# ------------------------------------------------------------- writing


def _coeff_str(c):
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _monomial_str(e, names):
    parts = []
    for v, k in zip(names, e):
        if k == 1:
            parts.append(v)
        elif k > 1:
            parts.append(f"{v}^{k}")
    return "*".join(parts)


def format_poly(f: dict, ring: Ring) -> str:
    if not f:
        return "0"
    terms = sorted(f.items(), key=lambda t: ring.ordering.sort_key(t[0]), reverse=True)
    out = []
    for k, (e, c) in enumerate(terms):
        c = Fraction(c)
        neg = c < 0
        mag = -c if neg else c
        mon = _monomial_str(e, ring.variables)
        if not mon:
            body = _coeff_str(mag)
        elif mag == 1:
            body = mon
        else:
            body = f"{_coeff_str(mag)}*{mon}"
        if k == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


def format_system(system: SystemFile, ordering: MonomialOrdering = DRL) -> str:
    ring = system.ring(ordering)
    lines = [",".join(system.variables), str(system.characteristic)]
    lines += [format_poly(f, ring) for f in system.polys]
    return "\n".join(lines) + "\n"


def normalize(f: dict, ring: Ring) -> dict:
    """Monic over GF(p); over Q integral, content-free, positive leading coefficient."""
    if not f:
        return {}
    lc = f[lead_exps(ring, f)]
    p = ring.characteristic
    if p:
        inv = pow(int(lc), -1, p)
        return {e: int(c) * inv % p for e, c in f.items() if int(c) * inv % p}
    coeffs = [Fraction(c) for c in f.values()]
    L = math.lcm(*(c.denominator for c in coeffs))
    ints = [int(c * L) for c in coeffs]
    g = math.gcd(*ints)
    if Fraction(lc) < 0:
        g = -g
    return {e: c // g for e, c in zip(f, ints) if c}


def basis_body(G, ring: Ring) -> str:
    """Canonical serialization: ascending leads, descending terms, LF endings."""
    G = [normalize(g, ring) for g in G if g]
    G.sort(key=lambda g: ring.ordering.sort_key(lead_exps(ring, g)))
    return "".join(format_poly(g, ring) + "\n" for g in G)


def write_basis(G, ring: Ring) -> bytes:
    """Header (variables, characteristic, ordering comment) plus canonical body."""
    header = f"{','.join(ring.variables)}\n{ring.characteristic}\n# ordering {ring.ordering}\n"
    return (header + basis_body(G, ring)).encode()


def certificate(G, ring: Ring) -> str:
    """SHA-256 hex digest of the canonical body."""
    return hashlib.sha256(basis_body(G, ring).encode()).hexdigest()
