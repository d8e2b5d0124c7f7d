"""Command line driver: groebner, isgroebner, normalform, learn, apply, benchmark.

Exit codes: 0 success, 2 parse error, 3 usage error, 4 divergence (unlucky
prime or mismatched trace), 5 resource budget exhausted.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import api, io
from .arith import FieldError
from .f4 import Divergence, F4Error
from .monomials import MonomialError, MonomialOrdering
from .multimodular import RationalRun, ResourceError
from .stats import Stats
from .systems import FAMILIES, family
from .trace import Trace, TraceFormatError, f4_apply, f4_learn

EXIT_PARSE, EXIT_USAGE, EXIT_DIVERGENCE, EXIT_RESOURCE = 2, 3, 4, 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--input", "-i", required=True, help="system file, '-' for stdin")
    p.add_argument("--output", "-o", help="write the result here instead of stdout")
    p.add_argument("--ordering", default="degrevlex",
                   help="lex, deglex, degrevlex or wdegrevlex:w1,...")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stats", action="store_true", help="per-phase timings (TSV, stderr)")
    p.add_argument("--matrix-log", action="store_true", help="per-matrix sizes (TSV, stderr)")


def _compute(p):
    p.add_argument("--linalg", choices=("det", "prob"), default="det")
    p.add_argument("--arith", choices=("auto", "generic", "signed", "delayed"), default="auto")
    p.add_argument("--certificate", action="store_true", help="also print the SHA-256 certificate")


def build_parser():
    ap = _Parser(prog="f4gb", description="F4 Groebner bases over GF(p) and Q")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("groebner", help="reduced Groebner basis")
    _common(g)
    _compute(g)
    g.add_argument("--batch", type=int, default=4, choices=(1, 2, 4, 8),
                   help="primes per batched apply (Q only)")
    g.add_argument("--prime-budget", type=int, default=512)
    g.add_argument("--trace", help="also write the learned trace here (prime characteristic)")

    s = sub.add_parser("isgroebner", help="test whether the input is a Groebner basis")
    _common(s)

    n = sub.add_parser("normalform", help="normal forms of polynomials w.r.t. the input basis")
    _common(n)
    n.add_argument("--poly", action="append", default=[], help="polynomial (repeatable)")
    n.add_argument("--polys", help="file with one polynomial per line")

    le = sub.add_parser("learn", help="run F4 modulo a prime and save its trace")
    _common(le)
    _compute(le)
    le.add_argument("--trace", required=True)
    le.add_argument("--characteristic", type=int, help="prime to learn with (default: file's)")

    a = sub.add_parser("apply", help="replay a trace modulo another prime")
    _common(a)
    _compute(a)
    a.add_argument("--trace", required=True)
    a.add_argument("--characteristic", type=int, help="prime to apply with (default: file's)")

    b = sub.add_parser("benchmark", help="time the bundled generators")
    b.add_argument("--family", choices=sorted(FAMILIES), required=True)
    b.add_argument("--from", dest="lo", type=int, required=True)
    b.add_argument("--to", dest="hi", type=int, required=True)
    b.add_argument("--characteristic", type=int, default=2**30 + 3)
    b.add_argument("--ordering", default="degrevlex")
    b.add_argument("--mode", choices=("classic", "apply"), default="classic")
    b.add_argument("--seed", type=int, default=0)
    return ap


# -------------------------------------------------------------- helpers


def _read_input(path, **kw):
    if path == "-":
        return io.parse_system(sys.stdin.buffer.read(), **kw)
    try:
        return io.read_system(path, **kw)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _ordering(text):
    try:
        return MonomialOrdering.parse(text)
    except MonomialError as exc:
        raise UsageError(str(exc)) from None


def _emit(args, data: bytes):
    if args.output:
        with open(args.output, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _report(args, stats: Stats):
    if getattr(args, "stats", False):
        sys.stderr.write(stats.phases_tsv())
    if getattr(args, "matrix_log", False):
        sys.stderr.write(stats.matrices_tsv())


def _arith(args):
    return None if getattr(args, "arith", "auto") == "auto" else args.arith


def _finish_basis(args, G, ring):
    _emit(args, io.write_basis(G, ring))
    if getattr(args, "certificate", False):
        sys.stdout.write(f"sha256 {io.certificate(G, ring)}\n")


def _prime_ring(args, system):
    p = args.characteristic if args.characteristic is not None else system.characteristic
    if p == 0:
        raise UsageError("a prime characteristic is required (--characteristic)")
    return api.Ring(system.variables, p, _ordering(args.ordering))


# -------------------------------------------------------------- commands


def cmd_groebner(args):
    system = _read_input(args.input)
    ring = system.ring(_ordering(args.ordering))
    stats = Stats()
    if args.trace:
        if ring.characteristic == 0:
            raise UsageError("--trace with groebner needs a prime characteristic")
        with stats.timed():
            G, trace = f4_learn(system.polys, ring, seed=args.seed, stats=stats)
        trace.save(args.trace)
    else:
        G = api.groebner(system.polys, ring, linalg=args.linalg, arith=_arith(args),
                         seed=args.seed, stats=stats, batch=args.batch,
                         prime_budget=args.prime_budget, run=RationalRun())
    _finish_basis(args, G, ring)
    _report(args, stats)
    return 0


def cmd_isgroebner(args):
    system = _read_input(args.input)
    ring = system.ring(_ordering(args.ordering))
    stats = Stats()
    with stats.timed(), stats.phase("other"):
        ok = api.is_groebner(list(system.polys), ring)
    _emit(args, b"true\n" if ok else b"false\n")
    _report(args, stats)
    return 0


def cmd_normalform(args):
    system = _read_input(args.input)
    ring = system.ring(_ordering(args.ordering))
    texts = list(args.poly)
    if args.polys:
        with open(args.polys, encoding="utf-8") as fh:
            texts += [l for l in fh.read().split("\n") if io._strip(l).strip()]
    if not texts:
        raise UsageError("give polynomials with --poly or --polys")
    header = f"{','.join(system.variables)}\n{system.characteristic}\n"
    fs = io.parse_system(header + "\n".join(texts)).polys
    stats = Stats()
    with stats.timed(), stats.phase("other"):
        out = api.normal_form_many(list(fs), list(system.polys), ring)
    _emit(args, "".join(io.format_poly(r, ring) + "\n" for r in out).encode())
    _report(args, stats)
    return 0


def cmd_learn(args):
    system = _read_input(args.input, coefficients_over_q=args.characteristic is not None)
    ring = _prime_ring(args, system)
    stats = Stats()
    with stats.timed():
        G, trace = f4_learn(system.polys, ring, seed=args.seed, stats=stats)
    trace.save(args.trace)
    _finish_basis(args, G, ring)
    _report(args, stats)
    return 0


def cmd_apply(args):
    system = _read_input(args.input, coefficients_over_q=args.characteristic is not None)
    ring = _prime_ring(args, system)
    try:
        trace = Trace.load(args.trace)
    except OSError as exc:
        raise UsageError(f"cannot read {args.trace}: {exc.strerror}") from None
    if trace.nvars != ring.nvars or trace.ordering != str(ring.ordering):
        raise Divergence("trace was learned for a different ring")
    stats = Stats()
    with stats.timed():
        G = f4_apply(trace, system.polys, ring.characteristic, arith=_arith(args), stats=stats)
    _finish_basis(args, G, ring)
    _report(args, stats)
    return 0


def cmd_benchmark(args):
    if args.lo > args.hi:
        raise UsageError("--from must not exceed --to")
    ordering = _ordering(args.ordering)
    rows = ["family\tn\tnvars\tbasis\tseconds"]
    for n in range(args.lo, args.hi + 1):
        names, F = family(args.family, n)
        ring = api.Ring(names, args.characteristic, ordering)
        if args.mode == "apply":
            _, trace = f4_learn(F, ring, seed=args.seed)
            t0 = time.perf_counter()
            G = f4_apply(trace, F, args.characteristic)
        else:
            t0 = time.perf_counter()
            G = api.groebner(F, ring, seed=args.seed)
        dt = time.perf_counter() - t0
        rows.append(f"{args.family}\t{n}\t{len(names)}\t{len(G)}\t{dt:.4f}")
    sys.stdout.write("\n".join(rows) + "\n")
    return 0


COMMANDS = {
    "groebner": cmd_groebner, "isgroebner": cmd_isgroebner, "normalform": cmd_normalform,
    "learn": cmd_learn, "apply": cmd_apply, "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (io.ParseError, TraceFormatError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except Divergence as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, F4Error, FieldError, MonomialError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
