"""The F4 loop over prime fields: pairs, selection, symbolic preprocessing,
linear algebra, pair update and final auto-reduction.

Polynomials inside the engine are a list of monomial ids (descending) and a
coefficient array of shape (len, lanes).
"""

from __future__ import annotations

from itertools import chain

import numpy as np

from .linalg import Lanes, MacaulayMatrix, csr, reduce_matrix
from .monomials import MonomialTable
from .stats import NullStats, Stats


class F4Error(ValueError):
    """Bad input to a computation (empty system, wrong field, ...)."""


class Divergence(RuntimeError):
    """A replayed computation left the recorded structure.

    ``lanes`` lists the batch positions whose primes are unlucky.
    """

    def __init__(self, msg, lanes=None):
        super().__init__(msg)
        self.lanes = sorted(set(lanes)) if lanes is not None else None


class F4Engine:
    """One F4 computation over ``lanes`` with monomials interned in ``table``.

    ``recorder``, when given, receives every matrix and its reduction so a
    trace can be learned from this run.
    """

    def __init__(self, table: MonomialTable, lanes: Lanes, *, probabilistic=False,
                 seed=0, stats: Stats | None = None, recorder=None):
        self.table = table
        self.lanes = lanes
        self.probabilistic = probabilistic
        self.seed = seed
        self.stats = stats if stats is not None else NullStats()
        self.recorder = recorder
        self.mons: list[list[int]] = []
        self.coeffs: list[np.ndarray] = []
        self.lead: list[int] = []
        self.redundant: list[bool] = []
        self.active: list[int] = []
        self.pairs: list[tuple] = []
        self.round = 0
        self.zero_rows = 0
        self.last_pairs: list[tuple[int, int]] = []

    # ------------------------------------------------------------ basis

    def add(self, mons, coeffs) -> int:
        i = len(self.mons)
        self.mons.append(mons)
        self.coeffs.append(coeffs)
        self.lead.append(mons[0])
        self.redundant.append(False)
        return i

    def update(self, h: int) -> None:
        """Gebauer-Moeller update of the pair set and the active basis for new element h."""
        T = self.table
        exps, masks, degs, keys = T.exps, T.masks, T.degs, T.keys
        lead = self.lead
        lh = lead[h]
        eh = exps[lh]
        mh = masks[lh]

        cand = []
        for g in self.active:
            lg = lead[g]
            cand.append((g, T.lcm(lg, lh), T.coprime(lg, lh)))
        kept = []
        for a, (g1, l1, cop) in enumerate(cand):
            if not cop:
                if any(T.divides(c[1], l1) for c in cand[a + 1:]) or any(
                    T.divides(c[1], l1) for c in kept
                ):
                    continue
            kept.append((g1, l1, cop))
        new_pairs = [(degs[l], keys[l], l, g, h) for g, l, cop in kept if not cop]

        survivors = []
        for pr in self.pairs:
            L = pr[2]
            if (~masks[L] & mh) == 0 and all(x <= y for x, y in zip(eh, exps[L])):
                e = exps[L]
                if (tuple(map(max, exps[lead[pr[3]]], eh)) != e
                        and tuple(map(max, exps[lead[pr[4]]], eh)) != e):
                    continue
            survivors.append(pr)
        self.pairs = survivors + new_pairs

        active = []
        for g in self.active:
            if T.divides(lh, lead[g]):
                self.redundant[g] = True
            else:
                active.append(g)
        active.append(h)
        self.active = active

    def select(self) -> list[tuple]:
        """Normal strategy: every pair of minimal lcm degree, ordered by lcm."""
        if not self.pairs:
            raise F4Error("no critical pairs to select from")
        dmin = min(p[0] for p in self.pairs)
        chosen = sorted(p for p in self.pairs if p[0] == dmin)
        self.pairs = [p for p in self.pairs if p[0] != dmin]
        return chosen

    # ---------------------------------------------------- preprocessing

    def _reducer_candidates(self, elements):
        T = self.table
        cand = [(T.masks[self.lead[g]], T.exps[self.lead[g]], g)
                for g in sorted(elements, key=lambda g: (len(self.mons[g]), g))]
        return cand

    def _close(self, up, todo, seen, pivot, reducers):
        """Add one reducer row for every reducible monomial reached from the rows."""
        T = self.table
        masks, exps = T.masks, T.exps
        while todo:
            u = todo.pop()
            if u in pivot:
                continue
            mu, eu = masks[u], exps[u]
            for mg, eg, g in reducers:
                if (~mu & mg) == 0 and all(a <= b for a, b in zip(eg, eu)):
                    mult = T.div(u, self.lead[g])
                    mons = T.mul_many(mult, self.mons[g])
                    up.append((g, mult, mons))
                    pivot.add(u)
                    for v in mons:
                        if v not in seen:
                            seen.add(v)
                            todo.append(v)
                    break

    def preprocess(self, S) -> MacaulayMatrix:
        T = self.table
        by_lcm: dict[int, list[int]] = {}
        for _, _, L, i, j in S:
            gens = by_lcm.setdefault(L, [])
            for g in (i, j):
                if g not in gens:
                    gens.append(g)
        up, lo = [], []
        pivot, seen, todo = set(), set(), []
        for L in T.sort_desc(by_lcm):
            gens = sorted(by_lcm[L], key=lambda g: (len(self.mons[g]), g))
            for k, g in enumerate(gens):
                mult = T.div(L, self.lead[g])
                mons = T.mul_many(mult, self.mons[g])
                (lo if k else up).append((g, mult, mons))
                for v in mons:
                    if v not in seen:
                        seen.add(v)
                        todo.append(v)
            pivot.add(L)
        self._close(up, todo, seen, pivot, self._reducer_candidates(self.active))
        return self.assemble(up, lo)

    def assemble(self, up, lo) -> MacaulayMatrix:
        T = self.table
        pivots = [r[2][0] for r in up]
        pset = set(pivots)
        allm = set()
        for r in chain(up, lo):
            allm.update(r[2])
        left = T.sort_desc(pivots)
        right = T.sort_desc(allm - pset)
        columns = np.array(left + right, dtype=np.int64)
        lookup = np.empty(len(T), dtype=np.int64)
        lookup[columns] = np.arange(len(columns), dtype=np.int64)
        N, dtype = self.lanes.n, self.lanes.dtype

        def block(rows):
            lens = [len(r[2]) for r in rows]
            ptr = np.zeros(len(rows) + 1, dtype=np.int64)
            np.cumsum(lens, out=ptr[1:])
            flat = np.fromiter(chain.from_iterable(r[2] for r in rows), dtype=np.int64,
                               count=int(ptr[-1]))
            cols = lookup[flat]
            if rows:
                vals = np.ascontiguousarray(np.concatenate([self.coeffs[r[0]] for r in rows]))
            else:
                vals = np.empty((0, N), dtype=dtype)
            return ptr, cols, vals

        M = MacaulayMatrix(columns, len(left))
        M.up_src = [(r[0], r[1]) for r in up]
        M.lo_src = [(r[0], r[1]) for r in lo]
        M.up_ptr, M.up_cols, M.up_vals = block(up)
        M.lo_ptr, M.lo_cols, M.lo_vals = block(lo)
        return M

    # ------------------------------------------------------------ rounds

    def _log(self, kind, M, nzero):
        rows, ncols = M.shape
        self.stats.log_matrix(
            round=self.round, kind=kind, upper=len(M.up_src), lower=len(M.lo_src),
            columns=ncols, left=M.nleft, nnz=M.nnz,
            density=f"{M.nnz / max(1, rows * ncols):.5f}", zero_rows=nzero,
        )

    def step(self) -> list[int]:
        """One F4 round; returns the indices of the new basis elements."""
        st = self.stats
        self.round += 1
        with st.phase("select"):
            S = self.select()
            self.last_pairs = [(pr[3], pr[4]) for pr in S]
        with st.phase("symbolic"):
            M = self.preprocess(S)
        with st.phase("linalg"):
            red = reduce_matrix(M, self.lanes, probabilistic=self.probabilistic,
                                seed=self.seed + self.round)
        self.zero_rows += red.nzero
        st.count("zero_rows", red.nzero)
        self._log("f4", M, red.nzero)
        with st.phase("update"):
            new = []
            for k in reversed(range(len(red))):
                cols, vals = red.row(k)
                new.append(self.add(M.columns[cols].tolist(), vals.copy()))
            for h in new:
                self.update(h)
        if self.recorder is not None:
            self.recorder.f4_round(self, M, red, new[::-1])
        return new

    def load(self, inputs) -> None:
        """Insert normalized input polynomials, smallest leading monomial first."""
        keys = self.table.keys
        order = sorted(range(len(inputs)), key=lambda i: (keys[inputs[i][0][0]], i))
        with self.stats.phase("update"):
            for i in order:
                mons, coeffs = inputs[i]
                h = self.add(list(mons), coeffs)
                self.update(h)
        if self.recorder is not None:
            self.recorder.inputs(order)

    def autoreduce(self):
        """Reduce every tail of the active basis; returns (indices, rows) by ascending lead."""
        T = self.table
        G = sorted(self.active, key=lambda g: T.keys[self.lead[g]])
        # an element added later may still have a lead divisible by an earlier one
        minimal = []
        for g in G:
            if not any(T.divides(self.lead[h], self.lead[g]) for h in minimal):
                minimal.append(g)
            else:
                self.redundant[g] = True
        G = self.active = minimal
        one = T.one
        rows = [(g, one, self.mons[g]) for g in G]
        up = list(rows)
        pivot = {self.lead[g] for g in G}
        seen, todo = set(), []
        for g in G:
            for v in self.mons[g][1:]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        seen.update(pivot)
        self._close(up, todo, seen, pivot, self._reducer_candidates(self.active))
        M = self.assemble(up, rows)
        red = reduce_matrix(M, self.lanes, new_pivots=False, skip_lead=True)
        self._log("autoreduce", M, 0)
        out = []
        for k in range(len(red)):
            cols, vals = red.row(k)
            out.append((M.columns[cols].tolist(), vals.copy()))
        if self.recorder is not None:
            self.recorder.autoreduce_round(self, M, red, G)
        return G, out

    def run(self, inputs):
        st = self.stats
        with st.phase("other"):
            inputs = normalize_inputs(inputs, self.lanes)
        if not inputs:
            raise F4Error("the input system has no nonzero polynomial")
        self.load(inputs)
        while self.pairs:
            self.step()
        with st.phase("autoreduce"):
            _, out = self.autoreduce()
        return out


def normalize_inputs(inputs, lanes: Lanes):
    """Drop zero terms and zero polynomials, make each polynomial monic.

    Single-lane only: the surviving support depends on the prime.
    """
    if lanes.n != 1:
        raise F4Error("input normalization runs on one lane")
    out = []
    for mons, coeffs in inputs:
        c = np.asarray(coeffs).reshape(-1, 1)
        nz = np.flatnonzero(c[:, 0] != 0)
        if len(nz) == 0:
            continue
        mons = [mons[i] for i in nz]
        c = c[nz]
        out.append((mons, make_monic(c, lanes)))
    return out


def make_monic(c: np.ndarray, lanes: Lanes) -> np.ndarray:
    """Divide each lane of a coefficient array by its leading entry."""
    c = c.copy()
    if lanes.is_rational:
        inv = lanes.inv(0, c[0, 0])
        c[:, 0] = [x * inv for x in c[:, 0]]
        return c
    for l, f in enumerate(lanes.fields):
        lc = int(c[0, l])
        if lc % f.p == 0:
            raise Divergence("leading coefficient vanishes", lanes=[l])
        if lc != 1:
            inv = pow(lc, -1, f.p)
            c[:, l] = c[:, l] * inv % f.p if lanes.machine else [x * inv % f.p for x in c[:, l]]
    return c


def sort_poly(table: MonomialTable, mons, coeffs):
    """Sort terms descending and merge duplicate monomials (coeffs as a list)."""
    acc = {}
    for m, c in zip(mons, coeffs):
        acc[m] = acc.get(m, 0) + c
    ms = table.sort_desc(acc)
    return ms, [acc[m] for m in ms]


# ----------------------------------------------------- reduction helpers


def normal_forms(table: MonomialTable, lanes: Lanes, polys, G):
    """Fully reduce each poly (mons, coeffs) by the leading terms of G.

    G elements must be monic.  Returns (mons, coeffs) remainders, possibly empty.
    """
    eng = F4Engine(table, lanes)
    for mons, coeffs in G:
        eng.add(list(mons), coeffs)
    rows = []
    keep = []
    for k, (mons, coeffs) in enumerate(polys):
        if len(mons):
            keep.append(k)
            idx = eng.add(list(mons), coeffs)
            rows.append((idx, table.one, list(mons)))
    results = [([], np.empty((0, lanes.n), dtype=lanes.dtype)) for _ in polys]
    if not rows:
        return results
    up, pivot, seen, todo = [], set(), set(), []
    for _, _, mons in rows:
        for v in mons:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    eng._close(up, todo, seen, pivot, eng._reducer_candidates(range(len(G))))
    M = eng.assemble(up, rows)
    red = reduce_matrix(M, lanes, new_pivots=False)
    for k, i in zip(keep, range(len(red))):
        cols, vals = red.row(i)
        results[k] = (M.columns[cols].tolist(), vals.copy())
    return results


def spoly_rows(table: MonomialTable, lanes: Lanes, f, g):
    """S-polynomial of two monic polynomials as (mons, coeffs), single lane."""
    lf, lg = f[0][0], g[0][0]
    L = table.lcm(lf, lg)
    mf = table.mul_many(table.div(L, lf), f[0])
    mg = table.mul_many(table.div(L, lg), g[0])
    acc = {}
    for m, c in zip(mf, f[1][:, 0]):
        acc[m] = c
    p = None if lanes.is_rational else lanes.fields[0].p
    for m, c in zip(mg, g[1][:, 0]):
        v = acc.get(m, 0) - c
        acc[m] = v % p if p is not None else v
    ms = [m for m in table.sort_desc(acc) if acc[m] != 0]
    vals = np.array([acc[m] for m in ms], dtype=lanes.dtype if lanes.machine else object)
    return ms, vals.reshape(-1, 1)


def check_groebner(table: MonomialTable, lanes: Lanes, G) -> bool:
    """Every S-polynomial of non-coprime leads reduces to zero by G (monic)."""
    if len(G) <= 1:
        return True
    sp = []
    for i in range(len(G)):
        for j in range(i + 1, len(G)):
            if table.coprime(G[i][0][0], G[j][0][0]):
                continue
            sp.append(spoly_rows(table, lanes, G[i], G[j]))
    return all(len(m) == 0 for m, _ in normal_forms(table, lanes, sp, G))
