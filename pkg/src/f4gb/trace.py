"""Learn/apply tracing for repeated modular F4 runs.

Learning runs classic F4 once and keeps, for every round, the structure of
the rows that matter: the upper rows reachable from useful lower rows, the
lower rows that did not reduce to zero (in processing order), the column
patterns of all of them, and the leads and supports of the rows produced.
Applying replays that structure with coefficients from another prime, or a
batch of primes at once, without any monomial arithmetic.

Basis element coefficients are kept aligned to their learned support, so
a coefficient that vanishes modulo the new prime stays as an explicit zero.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Sequence

import numpy as np

from .f4 import Divergence, F4Engine, F4Error, make_monic
from .linalg import Lanes, MacaulayMatrix, lower_order, reduce_matrix
from .monomials import MonomialOrdering, PackedOverflow
from .stats import NullStats, Stats

MAGIC = b"F4TR"
VERSION = 1
BATCH_SIZES = (1, 2, 4, 8)


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Round:
    """One recorded matrix.  Column indices are local to the round."""

    kind: str  # "f4" or "auto"
    ncols: int
    up_src: np.ndarray  # basis index per upper row
    up_ptr: np.ndarray
    up_cols: np.ndarray
    lo_src: np.ndarray  # basis index per kept lower row, in processing order
    lo_ptr: np.ndarray
    lo_cols: np.ndarray
    out_idx: np.ndarray  # basis index given to each output row
    out_ptr: np.ndarray
    out_cols: np.ndarray  # learned support of each output row
    pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2), np.int64))
    nlower: int = 0  # lower rows in the classic matrix
    nzero: int = 0  # of which reduced to zero

    @property
    def leads(self) -> np.ndarray:
        return self.out_cols[self.out_ptr[:-1]]

    def nleft(self) -> int:
        return len(self.up_src)

    _ARRAYS = ("up_src", "up_ptr", "up_cols", "lo_src", "lo_ptr", "lo_cols",
               "out_idx", "out_ptr", "out_cols", "pairs")

    def to_npz(self) -> bytes:
        buf = io.BytesIO()
        meta = np.array([self.ncols, self.nlower, self.nzero, self.kind == "auto"], dtype=np.int64)
        np.savez(buf, meta=meta, **{k: getattr(self, k) for k in self._ARRAYS})
        return buf.getvalue()

    @classmethod
    def from_npz(cls, data: bytes) -> "Round":
        with np.load(io.BytesIO(data), allow_pickle=False) as z:
            meta = z["meta"]
            arrays = {k: z[k].astype(np.int64) for k in cls._ARRAYS}
        return cls(kind="auto" if meta[3] else "f4", ncols=int(meta[0]),
                   nlower=int(meta[1]), nzero=int(meta[2]), **arrays)


@dataclass(frozen=True)
class Trace:
    """What a learned F4 run leaves behind for replays.

    ``input_order`` lists the original input positions in the order the
    engine loaded them (basis indices 0..k-1); ``input_supports`` and
    ``final_supports`` hold exponent matrices, everything else refers to
    round-local columns.
    """

    nvars: int
    ordering: str
    prime: int
    ninputs: int
    input_order: tuple[int, ...]
    input_supports: tuple[np.ndarray, ...]
    rounds: tuple[Round, ...]
    final_supports: tuple[np.ndarray, ...]
    nbasis: int

    @property
    def nrounds(self) -> int:
        """F4 rounds, not counting the final auto-reduction."""
        return sum(r.kind == "f4" for r in self.rounds)

    @property
    def zero_rows(self) -> int:
        return sum(r.nzero for r in self.rounds if r.kind == "f4")

    @property
    def kept_rows(self) -> int:
        return sum(len(r.lo_src) for r in self.rounds if r.kind == "f4")

    @cached_property
    def final_keys(self) -> list[list[tuple[int, ...]]]:
        return [list(map(tuple, s.tolist())) for s in self.final_supports]

    @property
    def leading_monomials(self) -> list[tuple[int, ...]]:
        return [tuple(int(x) for x in s[0]) for s in self.final_supports]

    # ---------------------------------------------------------- files

    def to_bytes(self) -> bytes:
        meta = {
            "nvars": self.nvars, "ordering": self.ordering, "prime": self.prime,
            "ninputs": self.ninputs, "input_order": list(self.input_order),
            "nbasis": self.nbasis, "nrounds": len(self.rounds),
        }
        sections = [(b"META", json.dumps(meta, sort_keys=True).encode())]
        sections.append((b"INPT", _pack_supports(self.input_supports)))
        sections += [(b"ROUN", r.to_npz()) for r in self.rounds]
        sections.append((b"BASE", _pack_supports(self.final_supports)))
        out = [MAGIC, struct.pack("<H", VERSION)]
        for tag, payload in sections:
            out.append(tag + struct.pack("<Q", len(payload)) + payload)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Trace":
        if data[:4] != MAGIC:
            raise TraceFormatError("not a trace file (bad magic)")
        if len(data) < 6:
            raise TraceFormatError("truncated trace header")
        (version,) = struct.unpack_from("<H", data, 4)
        if version != VERSION:
            raise TraceFormatError(f"unsupported trace version {version}")
        pos, sections = 6, []
        while pos < len(data):
            if pos + 12 > len(data):
                raise TraceFormatError("truncated section header")
            tag = data[pos:pos + 4]
            (n,) = struct.unpack_from("<Q", data, pos + 4)
            pos += 12
            if pos + n > len(data):
                raise TraceFormatError(f"truncated section {tag!r}")
            sections.append((tag, data[pos:pos + n]))
            pos += n
        tags = [t for t, _ in sections]
        if tags[:2] != [b"META", b"INPT"] or tags[-1] != b"BASE":
            raise TraceFormatError("unexpected section layout")
        meta = json.loads(sections[0][1])
        rounds = tuple(Round.from_npz(p) for t, p in sections[2:-1])
        if len(rounds) != meta["nrounds"]:
            raise TraceFormatError("round count does not match header")
        return cls(
            nvars=meta["nvars"], ordering=meta["ordering"], prime=meta["prime"],
            ninputs=meta["ninputs"], input_order=tuple(meta["input_order"]),
            input_supports=_unpack_supports(sections[1][1]), rounds=rounds,
            final_supports=_unpack_supports(sections[-1][1]), nbasis=meta["nbasis"],
        )

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Trace":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _pack_supports(supports) -> bytes:
    buf = io.BytesIO()
    lens = np.array([len(s) for s in supports], dtype=np.int64)
    flat = np.concatenate(supports) if supports else np.empty((0, 0), np.int64)
    np.savez(buf, lens=lens, flat=flat.astype(np.int64))
    return buf.getvalue()


def _unpack_supports(data: bytes):
    with np.load(io.BytesIO(data), allow_pickle=False) as z:
        lens, flat = z["lens"], z["flat"]
    bounds = np.concatenate([[0], np.cumsum(lens)])
    return tuple(flat[bounds[i]:bounds[i + 1]] for i in range(len(lens)))


# ------------------------------------------------------------- learning


def _closure(M: MacaulayMatrix, start_cols) -> list[int]:
    """Upper rows reachable from ``start_cols`` through pivot columns."""
    piv = M.pivot_of_col()
    taken = np.zeros(len(M.up_ptr) - 1, dtype=bool)
    seen = np.zeros(M.ncols, dtype=bool)
    stack = list(np.unique(start_cols))
    seen[stack] = True
    while stack:
        c = stack.pop()
        r = piv[c]
        if r < 0 or taken[r]:
            continue
        taken[r] = True
        cols = M.up_cols[M.up_ptr[r]:M.up_ptr[r + 1]]
        fresh = cols[~seen[cols]]
        seen[fresh] = True
        stack.extend(fresh.tolist())
    return np.flatnonzero(taken)


def _sub_csr(ptr, cols, rows):
    lens = ptr[rows + 1] - ptr[rows]
    out_ptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum(lens, out=out_ptr[1:])
    parts = [cols[ptr[r]:ptr[r + 1]] for r in rows]
    flat = np.concatenate(parts) if parts else np.empty(0, np.int64)
    return out_ptr, flat.astype(np.int64)


class Recorder:
    """Collects rounds from an F4Engine run (deterministic linear algebra)."""

    def __init__(self):
        self.rounds: list[Round] = []
        self.order: list[int] = []
        self.G: list[int] = []

    def inputs(self, order):
        self.order = list(order)

    def _round(self, kind, M, lo_rows, out_rows, out_idx, pairs, nzero, skip_lead_starts):
        lo_ptr, lo_cols = _sub_csr(M.lo_ptr, M.lo_cols, lo_rows)
        start = lo_cols if skip_lead_starts is None else skip_lead_starts
        up_rows = _closure(M, start)
        up_ptr, up_cols = _sub_csr(M.up_ptr, M.up_cols, up_rows)
        out_ptr, out_cols = out_rows
        used = np.unique(np.concatenate([up_cols, lo_cols, out_cols]))
        remap = np.full(M.ncols, -1, dtype=np.int64)
        remap[used] = np.arange(len(used), dtype=np.int64)
        self.rounds.append(Round(
            kind=kind, ncols=len(used),
            up_src=np.array([M.up_src[r][0] for r in up_rows], dtype=np.int64),
            up_ptr=up_ptr, up_cols=remap[up_cols],
            lo_src=np.array([M.lo_src[r][0] for r in lo_rows], dtype=np.int64),
            lo_ptr=lo_ptr, lo_cols=remap[lo_cols],
            out_idx=np.asarray(out_idx, dtype=np.int64), out_ptr=out_ptr, out_cols=remap[out_cols],
            pairs=np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
            nlower=len(M.lo_src), nzero=nzero,
        ))

    def f4_round(self, eng, M, red, new):
        useful = set(red.src.tolist())
        lo_rows = np.array([r for r in lower_order(M).tolist() if r in useful], dtype=np.int64)
        pairs = sorted({(i, j) for (i, j) in _round_pairs(eng)})
        self._round("f4", M, lo_rows, (red.ptr.astype(np.int64), red.cols.astype(np.int64)),
                    new, pairs, red.nzero, None)

    def autoreduce_round(self, eng, M, red, G):
        self.G = list(G)
        n = len(M.lo_src)
        lo_rows = np.arange(n, dtype=np.int64)
        tails = np.concatenate([M.lo_cols[M.lo_ptr[r] + 1:M.lo_ptr[r + 1]] for r in range(n)]
                               + [np.empty(0, np.int64)])
        self._round("auto", M, lo_rows, (red.ptr.astype(np.int64), red.cols.astype(np.int64)),
                    G, [], 0, tails)


def _round_pairs(eng):
    return getattr(eng, "last_pairs", [])


def _learn_core(polys, ring, table, stats):
    from .api import to_rows

    lanes = Lanes.of([ring.characteristic])
    kept = [i for i, f in enumerate(polys) if f]
    if not kept:
        raise F4Error("the input system has no nonzero polynomial")
    rows = to_rows(table, [polys[i] for i in kept], lanes)
    rec = Recorder()
    eng = F4Engine(table, lanes, stats=stats, recorder=rec)
    out = eng.run(rows)
    order = [kept[k] for k in rec.order]
    input_supports = tuple(
        np.array([table.exps[m] for m in rows[k][0]], dtype=np.int64).reshape(-1, ring.nvars)
        for k in rec.order
    )
    final_supports = tuple(
        np.array([table.exps[m] for m in mons], dtype=np.int64).reshape(-1, ring.nvars)
        for mons, _ in out
    )
    trace = Trace(
        nvars=ring.nvars, ordering=str(ring.ordering), prime=ring.characteristic,
        ninputs=len(polys), input_order=tuple(order), input_supports=input_supports,
        rounds=tuple(rec.rounds), final_supports=final_supports, nbasis=len(eng.mons),
    )
    return out, trace, eng


def f4_learn(polys: Sequence[dict], ring, *, seed: int = 0, stats: Stats | None = None):
    """Classic F4 modulo ``ring.characteristic`` that also returns a Trace."""
    from .api import from_rows, make_table

    if ring.characteristic == 0:
        raise F4Error("learning needs a prime characteristic")
    polys = [ring.poly(f) for f in polys]
    stats = stats if stats is not None else NullStats()
    try:
        table = make_table(ring, seed)
        out, trace, _ = _learn_core(polys, ring, table, stats)
    except PackedOverflow:
        table = make_table(ring, seed, packed=False)
        out, trace, _ = _learn_core(polys, ring, table, stats)
    return from_rows(table, out), trace


# ------------------------------------------------------------- applying


def _residue(c, p):
    if isinstance(c, Fraction):
        if c.denominator % p == 0:
            raise ZeroDivisionError
        return c.numerator * pow(c.denominator, -1, p) % p
    return int(c) % p


def align_inputs(trace: Trace, polys: Sequence[dict], lanes: Lanes):
    """Input coefficients on the learned supports, monic per lane."""
    if len(polys) != trace.ninputs:
        raise Divergence(f"expected {trace.ninputs} input polynomials, got {len(polys)}")
    primes = lanes.primes
    out = []
    bad = set()
    for k, i in enumerate(trace.input_order):
        f = polys[i]
        sup = trace.input_supports[k]
        keys = [tuple(int(x) for x in e) for e in sup]
        arr = np.zeros((len(keys), lanes.n), dtype=lanes.dtype)
        for r, e in enumerate(keys):
            c = f.get(e, 0)
            for l, p in enumerate(primes):
                try:
                    arr[r, l] = _residue(c, p)
                except ZeroDivisionError:
                    bad.add(l)
        extra = set(f) - set(keys)
        for e in extra:
            for l, p in enumerate(primes):
                try:
                    if _residue(f[e], p):
                        bad.add(l)
                except ZeroDivisionError:
                    bad.add(l)
        for l in range(lanes.n):
            if l not in bad and arr[0, l] == 0:
                bad.add(l)
        out.append(arr)
    skipped = set(range(len(polys))) - set(trace.input_order)
    for i in skipped:
        for e, c in polys[i].items():
            for l, p in enumerate(primes):
                try:
                    if _residue(c, p):
                        bad.add(l)
                except ZeroDivisionError:
                    bad.add(l)
    if bad:
        raise Divergence("input system does not match the trace", lanes=bad)
    return [make_monic(a, lanes) for a in out]


def _aligned(cols, vals, support, lanes, what):
    if len(cols) == len(support) and np.array_equal(cols, support):
        return np.ascontiguousarray(vals)
    pos = np.searchsorted(support, cols)
    ok = pos < len(support)
    ok[ok] = support[pos[ok]] == cols[ok]
    if not ok.all():
        nz = vals[~ok] != 0
        raise Divergence(f"{what}: support left the learned pattern",
                         lanes=np.flatnonzero(nz.any(axis=0)).tolist())
    out = np.zeros((len(support), lanes.n), dtype=lanes.dtype)
    out[pos] = vals
    return out


def _matrix(rnd: Round, basis, lanes) -> MacaulayMatrix:
    def vals(src):
        if len(src) == 0:
            return np.empty((0, lanes.n), dtype=lanes.dtype)
        return np.ascontiguousarray(np.concatenate([basis[g] for g in src]))

    M = MacaulayMatrix(np.arange(rnd.ncols, dtype=np.int64), rnd.nleft())
    M.up_ptr, M.up_cols, M.up_vals = rnd.up_ptr, rnd.up_cols, vals(rnd.up_src)
    M.lo_ptr, M.lo_cols, M.lo_vals = rnd.lo_ptr, rnd.lo_cols, vals(rnd.lo_src)
    return M


def _replay(trace: Trace, inputs, lanes: Lanes, stats: Stats):
    basis: list = [None] * trace.nbasis
    for k, arr in enumerate(inputs):
        basis[k] = arr
    final = None
    for n, rnd in enumerate(trace.rounds):
        auto = rnd.kind == "auto"
        with stats.phase("symbolic"):
            M = _matrix(rnd, basis, lanes)
        with stats.phase("autoreduce" if auto else "linalg"):
            order = np.arange(len(rnd.lo_src), dtype=np.int64)
            red = reduce_matrix(M, lanes, order=order, new_pivots=not auto, skip_lead=auto)
        with stats.phase("update"):
            if red.lane_bad.any():
                raise Divergence(f"round {n}: a pivot vanished",
                                 lanes=np.flatnonzero(red.lane_bad).tolist())
            nout = len(rnd.out_idx)
            if len(red) != nout:
                raise Divergence(f"round {n}: {len(red)} new rows, {nout} learned")
            rows = []
            for q in range(nout):
                cols, vals = red.row(q)
                sup = rnd.out_cols[rnd.out_ptr[q]:rnd.out_ptr[q + 1]]
                if len(cols) == 0 or cols[0] != sup[0]:
                    raise Divergence(f"round {n}: leading monomial differs")
                lead = vals[0]
                if auto and (lead == 0).any():
                    raise Divergence(f"round {n}: leading coefficient vanished",
                                     lanes=np.flatnonzero(lead == 0).tolist())
                rows.append(_aligned(cols, vals, sup, lanes, f"round {n}"))
            if auto:
                final = rows
            else:
                for h, arr in zip(rnd.out_idx.tolist(), rows):
                    basis[h] = arr
    return final


def apply_arrays(trace: Trace, polys: Sequence[dict], primes: Sequence[int], *,
                 arith=None, stats: Stats | None = None):
    """Replay over the batch ``primes``; coefficient arrays (len, N) per basis element.

    Raises Divergence naming the offending lanes when it can tell them apart.
    """
    stats = stats if stats is not None else NullStats()
    lanes = Lanes.of(primes, arith)
    if not lanes.machine and lanes.n > 1:
        raise F4Error("batched apply needs primes below 2^31")
    with stats.phase("other"):
        inputs = align_inputs(trace, polys, lanes)
    return _replay(trace, inputs, lanes, stats)


def to_polys(trace: Trace, arrays, lane: int = 0) -> list[dict]:
    out = []
    for keys, arr in zip(trace.final_keys, arrays):
        col = arr[:, lane]
        nz = np.flatnonzero(col)
        vals = col[nz].tolist()
        if len(nz) == len(keys):
            out.append(dict(zip(keys, vals)))
        else:
            out.append({keys[i]: int(v) for i, v in zip(nz.tolist(), vals)})
    return out


def f4_apply(trace: Trace, polys: Sequence[dict], p: int, *, arith=None,
             stats: Stats | None = None) -> list[dict]:
    """Basis of the traced system modulo p, or Divergence."""
    return to_polys(trace, apply_arrays(trace, polys, [p], arith=arith, stats=stats))


def apply_batched_arrays(trace: Trace, polys, primes, *, arith=None, stats=None):
    """Like apply_arrays, but returns (arrays or None per lane, diverged lanes).

    A batch that diverges structurally is retried lane by lane to find the
    unlucky primes; the remaining lanes keep their results.
    """
    primes = list(primes)
    try:
        arrays = apply_arrays(trace, polys, primes, arith=arith, stats=stats)
        return [[a[:, l:l + 1] for a in arrays] for l in range(len(primes))], []
    except Divergence:
        if len(primes) == 1:
            return [None], [0]
    results, bad = [], []
    for l, p in enumerate(primes):
        try:
            results.append(apply_arrays(trace, polys, [p], arith=arith, stats=stats))
        except Divergence:
            results.append(None)
            bad.append(l)
    return results, bad


def f4_apply_batched(trace: Trace, polys: Sequence[dict], primes: Sequence[int], *,
                     arith=None, stats: Stats | None = None) -> list[list[dict]]:
    """One replay over N primes glued into coefficient tuples.

    Raises Divergence with ``lanes`` set to the diverging positions; its
    ``results`` attribute keeps the bases of the other lanes.
    """
    if len(primes) not in BATCH_SIZES:
        raise F4Error(f"batch size must be one of {BATCH_SIZES}")
    results, bad = apply_batched_arrays(trace, polys, primes, arith=arith, stats=stats)
    bases = [None if r is None else to_polys(trace, r) for r in results]
    if bad:
        err = Divergence(f"lanes {bad} diverged", lanes=bad)
        err.results = bases
        raise err
    return bases


def ordering_of(trace: Trace) -> MonomialOrdering:
    return MonomialOrdering.parse(trace.ordering)
