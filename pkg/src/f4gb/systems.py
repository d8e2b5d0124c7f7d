"""Benchmark families: katsura, cyclic, noon, eco, chandra.

Each generator returns (variable names, polynomials) with polynomials as
dicts from exponent tuples to integer or Fraction coefficients.
"""

from __future__ import annotations

from fractions import Fraction


def _var(n, i, e=1):
    v = [0] * n
    v[i] = e
    return tuple(v)


def _add(poly, mon, c):
    c = poly.get(mon, 0) + c
    if c:
        poly[mon] = c
    else:
        poly.pop(mon, None)


def _mul_mon(a, b):
    return tuple(x + y for x, y in zip(a, b))


def katsura(n: int):
    """n+1 unknowns x0..xn."""
    nv = n + 1
    names = [f"x{i}" for i in range(nv)]
    one = (0,) * nv

    def x(k):
        k = abs(k)
        return _var(nv, k) if k <= n else None

    polys = []
    for m in range(n):
        f = {}
        for i in range(-n, n + 1):
            a, b = x(i), x(m - i)
            if a is None or b is None:
                continue
            _add(f, _mul_mon(a, b), 1)
        _add(f, _var(nv, m), -1)
        polys.append(f)
    lin = {_var(nv, 0): 1, one: -1}
    for i in range(1, nv):
        _add(lin, _var(nv, i), 2)
    polys.append(lin)
    return names, polys


def cyclic(n: int):
    names = [f"x{i}" for i in range(1, n + 1)]
    polys = []
    for k in range(1, n):
        f = {}
        for i in range(n):
            mon = [0] * n
            for j in range(k):
                mon[(i + j) % n] += 1
            _add(f, tuple(mon), 1)
        polys.append(f)
    polys.append({(1,) * n: 1, (0,) * n: -1})
    return names, polys


def noon(n: int):
    """10 x_i * sum_{j != i} x_j^2 - 11 x_i + 10."""
    names = [f"x{i}" for i in range(1, n + 1)]
    polys = []
    for i in range(n):
        f = {}
        for j in range(n):
            if j != i:
                mon = [0] * n
                mon[i] += 1
                mon[j] += 2
                _add(f, tuple(mon), 10)
        _add(f, _var(n, i), -11)
        _add(f, (0,) * n, 10)
        polys.append(f)
    return names, polys


def eco(n: int):
    """(x_k + sum_{i=1}^{n-k-1} x_i x_{i+k}) x_n - k for k < n, and x_1 + ... + x_{n-1} + 1."""
    names = [f"x{i}" for i in range(1, n + 1)]
    polys = []
    for k in range(1, n):
        f = {}
        _add(f, _mul_mon(_var(n, k - 1), _var(n, n - 1)), 1)
        for i in range(1, n - k):
            mon = [0] * n
            mon[i - 1] += 1
            mon[i + k - 1] += 1
            mon[n - 1] += 1
            _add(f, tuple(mon), 1)
        _add(f, (0,) * n, -k)
        polys.append(f)
    lin = {(0,) * n: 1}
    for i in range(n - 1):
        _add(lin, _var(n, i), 1)
    polys.append(lin)
    return names, polys


def chandra(n: int, c: Fraction = Fraction(51234, 100000)):
    """Chandrasekhar H-equation: 2n x_i - c x_i (1 + sum_{j<n} i/(i+j) x_j) - 2n."""
    names = [f"x{i}" for i in range(1, n + 1)]
    polys = []
    for i in range(1, n + 1):
        f = {}
        xi = _var(n, i - 1)
        _add(f, xi, 2 * n - c)
        for j in range(1, n):
            _add(f, _mul_mon(xi, _var(n, j - 1)), -c * Fraction(i, i + j))
        _add(f, (0,) * n, -2 * n)
        polys.append(f)
    return names, polys


FAMILIES = {"katsura": katsura, "cyclic": cyclic, "noon": noon, "eco": eco, "chandra": chandra}


def family(name: str, n: int):
    try:
        return FAMILIES[name](n)
    except KeyError:
        raise ValueError(f"unknown benchmark family {name!r}") from None
