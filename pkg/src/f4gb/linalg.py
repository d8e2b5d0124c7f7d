"""Macaulay matrices in four-block form and their reduction.

Columns are arranged as [pivot columns | other columns], each part sorted
by descending monomial, so the upper rows (A|B) are triangular and the
lower rows (C|D) lose their C part once every pivot column is eliminated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .arith import DELAYED, DELAYED_CUTOFF_BITS, GENERIC, SIGNED, PrimeField, delayed_threshold

SIGNED_BATCH_MIN = 1 << DELAYED_CUTOFF_BITS

_FLAVOR_CODE = {GENERIC: _kernels.GENERIC, SIGNED: _kernels.SIGNED, DELAYED: _kernels.DELAYED}


@dataclass(frozen=True)
class Lanes:
    """The coefficient domain of one matrix: a batch of prime fields, or Q.

    ``fields`` empty means the rationals (Python fallback only).
    """

    fields: tuple[PrimeField, ...]

    @classmethod
    def of(cls, primes, flavor=None) -> "Lanes":
        primes = [int(p) for p in primes]
        if flavor in (None, "auto") and len(primes) > 1 and \
                all(SIGNED_BATCH_MIN <= p < 2**31 for p in primes):
            # across lanes the branch-free signed update vectorizes, the
            # multiply-shift reduction does not
            flavor = SIGNED
        return cls(tuple(PrimeField.make(p, flavor) for p in primes))

    @classmethod
    def rational(cls) -> "Lanes":
        return cls(())

    @property
    def n(self) -> int:
        return max(1, len(self.fields))

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(f.p for f in self.fields)

    @property
    def is_rational(self) -> bool:
        return not self.fields

    @property
    def machine(self) -> bool:
        return bool(self.fields) and all(f.machine for f in self.fields)

    @property
    def flavor(self) -> str:
        return self.fields[0].flavor if self.fields else GENERIC

    @property
    def dtype(self):
        return np.int64 if self.machine else object

    def kernel_args(self):
        fl = {f.flavor for f in self.fields}
        if len(fl) != 1:
            raise ValueError("all lanes of a batch must share one arithmetic flavor")
        primes = np.array([f.p for f in self.fields], dtype=np.int64)
        mags = np.array([f.magic_m for f in self.fields], dtype=np.uint64)
        shs = np.array([f.magic_s - 64 for f in self.fields], dtype=np.uint64)
        dlimit = min(delayed_threshold(f.p) for f in self.fields)
        return primes, mags, shs, _FLAVOR_CODE[self.flavor], max(1, dlimit)

    def inv(self, lane: int, a):
        if self.is_rational:
            return 1 / Fraction(a)
        return pow(int(a), -1, self.fields[lane].p)


@dataclass
class MacaulayMatrix:
    """Rows with provenance (basis index, multiplier monomial id) and CSR data."""

    columns: np.ndarray  # column -> monomial id
    nleft: int  # number of pivot columns (width of blocks A and C)
    up_src: list = field(default_factory=list)
    lo_src: list = field(default_factory=list)
    up_ptr: np.ndarray = None
    up_cols: np.ndarray = None
    up_vals: np.ndarray = None
    lo_ptr: np.ndarray = None
    lo_cols: np.ndarray = None
    lo_vals: np.ndarray = None

    @property
    def ncols(self) -> int:
        return len(self.columns)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.up_ptr) - 1 + len(self.lo_ptr) - 1, self.ncols)

    @property
    def nnz(self) -> int:
        return len(self.up_cols) + len(self.lo_cols)

    def pivot_of_col(self) -> np.ndarray:
        piv = np.full(self.ncols, -1, dtype=np.int64)
        leads = self.up_cols[self.up_ptr[:-1]] if len(self.up_ptr) > 1 else np.empty(0, np.int64)
        piv[leads] = np.arange(len(leads), dtype=np.int64)
        return piv

    def dense(self, lane: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Dense (upper, lower) blocks of one lane, for inspection and tests."""

        def block(ptr, cols, vals):
            out = np.zeros((len(ptr) - 1, self.ncols), dtype=vals.dtype)
            for r in range(len(ptr) - 1):
                s, e = ptr[r], ptr[r + 1]
                out[r, cols[s:e]] = vals[s:e, lane]
            return out

        return (block(self.up_ptr, self.up_cols, self.up_vals),
                block(self.lo_ptr, self.lo_cols, self.lo_vals))


def csr(rows_cols, rows_vals, nlanes, dtype):
    """Stack per-row column arrays and (len, lanes) value arrays into CSR."""
    lens = [len(c) for c in rows_cols]
    ptr = np.zeros(len(lens) + 1, dtype=np.int64)
    np.cumsum(lens, out=ptr[1:])
    if rows_cols:
        cols = np.ascontiguousarray(np.concatenate(rows_cols).astype(np.int64, copy=False))
        vals = np.ascontiguousarray(np.concatenate(rows_vals).astype(dtype, copy=False))
    else:
        cols = np.empty(0, dtype=np.int64)
        vals = np.empty((0, nlanes), dtype=dtype)
    return ptr, cols, vals.reshape(-1, nlanes)


@dataclass
class Reduction:
    ptr: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    src: np.ndarray
    lane_bad: np.ndarray
    nzero: int

    def __len__(self):
        return len(self.ptr) - 1

    def row(self, i):
        s, e = self.ptr[i], self.ptr[i + 1]
        return self.cols[s:e], self.vals[s:e]


def lower_order(M: MacaulayMatrix) -> np.ndarray:
    """Process lower rows by leading column, sparsest first among equals."""
    n = len(M.lo_ptr) - 1
    if n == 0:
        return np.empty(0, dtype=np.int64)
    lens = np.diff(M.lo_ptr)
    firsts = np.array(
        [M.lo_cols[M.lo_ptr[r]:M.lo_ptr[r + 1]].min() if lens[r] else M.ncols for r in range(n)]
    )
    return np.lexsort((np.arange(n), lens, firsts)).astype(np.int64)


def reduce_matrix(M: MacaulayMatrix, lanes: Lanes, *, probabilistic=False, seed=0,
                  new_pivots=True, skip_lead=False, interreduce=True, order=None) -> Reduction:
    """Reduce the lower rows of ``M`` by its upper rows (and by each other
    when ``new_pivots``), returning the resulting rows."""
    if order is None:
        order = lower_order(M) if new_pivots else np.arange(len(M.lo_ptr) - 1, dtype=np.int64)
    piv = M.pivot_of_col()
    if lanes.machine:
        primes, mags, shs, code, dlimit = lanes.kernel_args()
        nlow = len(order)
        block = max(1, int(np.ceil(np.sqrt(nlow)))) if nlow else 1
        out = _kernels.reduce_rows(
            M.ncols, primes, mags, shs, code, dlimit,
            M.up_ptr, M.up_cols, M.up_vals, piv,
            M.lo_ptr, M.lo_cols, M.lo_vals, np.ascontiguousarray(order, dtype=np.int64),
            new_pivots, skip_lead, interreduce, probabilistic, seed, block,
        )
        return Reduction(*out)
    return _reduce_python(M, lanes, piv, order, new_pivots, skip_lead, interreduce)


# --------------------------------------------------------- Python fallback


def _reduce_python(M, lanes, piv, order, new_pivots, skip_lead, interreduce):
    """Object-coefficient version of the kernel for wide primes and Q.

    Same elimination order; one lane only; deterministic mode only.
    """
    if lanes.n != 1:
        raise ValueError("the Python reduction path handles a single lane")
    p = None if lanes.is_rational else lanes.fields[0].p
    ncols = M.ncols
    up_rows = [
        (M.up_cols[M.up_ptr[i]:M.up_ptr[i + 1]].tolist(), M.up_vals[M.up_ptr[i]:M.up_ptr[i + 1], 0].tolist())
        for i in range(len(M.up_ptr) - 1)
    ]
    pivots = {int(c): up_rows[i] for c, i in enumerate(piv) if i >= 0}

    def norm(x):
        return x % p if p is not None else x

    def eliminate(acc, start):
        for k in range(start, ncols):
            a = acc[k]
            if not a or k not in pivots:
                continue
            cols, vals = pivots[k]
            for c, v in zip(cols, vals):
                acc[c] = norm(acc[c] - a * v)
            acc[k] = 0

    def load(cols, vals):
        acc = [0] * ncols
        for c, v in zip(cols, vals):
            acc[int(c)] = v
        return acc

    def gather(acc, start):
        cols = [c for c in range(start, ncols) if acc[c]]
        return cols, [acc[c] for c in cols]

    out_rows, src, nzero = [], [], 0
    new = []
    for r in order:
        s, e = M.lo_ptr[r], M.lo_ptr[r + 1]
        if s == e:
            nzero += 1
            if not new_pivots:
                out_rows.append(([], []))
                src.append(r)
            continue
        rc = M.lo_cols[s:e].tolist()
        acc = load(rc, M.lo_vals[s:e, 0].tolist())
        first = min(rc)
        eliminate(acc, first + 1 if skip_lead else first)
        cols, vals = gather(acc, first)
        if not new_pivots:
            out_rows.append((cols, vals))
            src.append(r)
            nzero += not cols
            continue
        if not cols:
            nzero += 1
            continue
        inv = lanes.inv(0, vals[0])
        vals = [norm(v * inv) for v in vals]
        pivots[cols[0]] = (cols, vals)
        new.append((cols[0], r))
    if new_pivots:
        new.sort()
        if interreduce:
            for lead, _ in reversed(new):
                cols, vals = pivots[lead]
                acc = load(cols, vals)
                eliminate(acc, lead + 1)
                pivots[lead] = gather(acc, lead)
        out_rows = [pivots[lead] for lead, _ in new]
        src = [r for _, r in new]
    ptr, cols, vals = csr([np.array(c, dtype=np.int64) for c, _ in out_rows],
                          [np.array(v, dtype=object).reshape(-1, 1) for _, v in out_rows], 1, object)
    return Reduction(ptr, cols, vals, np.array(src, dtype=np.int64),
                     np.zeros(1, dtype=bool), nzero)
