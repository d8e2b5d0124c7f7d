from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from f4gb import Ring, Stats, groebner
from f4gb.arith import is_prime
from f4gb.f4 import Divergence, F4Error
from f4gb.systems import family
from f4gb.trace import Trace, TraceFormatError, f4_apply, f4_apply_batched, f4_learn
from oracle import canonical

P = 2**30 + 3


def primes_below(start, k, skip=()):
    out, q = [], start
    while len(out) < k:
        q -= 1
        if is_prime(q) and q not in skip:
            out.append(q)
    return out


@pytest.fixture(scope="module")
def cyclic5():
    names, F = family("cyclic", 5)
    R = Ring(names, P)
    G, tr = f4_learn(F, R)
    return names, F, G, tr


def test_learn_matches_classic(cyclic5):
    names, F, G, tr = cyclic5
    assert canonical(G) == canonical(groebner(F, Ring(names, P)))
    assert len(tr.final_supports) == len(G) <= tr.nbasis
    assert tr.ninputs == len(F)
    assert tr.nrounds > 0


def test_zero_rows_match_classic_counter():
    names, F = family("katsura", 5)
    st_ = Stats()
    groebner(F, Ring(names, P), stats=st_)
    _, tr = f4_learn(F, Ring(names, P))
    assert tr.zero_rows == st_.counters.get("zero_rows", 0)
    assert tr.kept_rows > 0


def test_apply_on_learning_prime_is_identical(cyclic5):
    _, F, G, tr = cyclic5
    assert canonical(f4_apply(tr, F, P)) == canonical(G)


def test_apply_over_fresh_primes(cyclic5):
    names, F, _, tr = cyclic5
    for q in primes_below(2**31 - 1, 6):
        assert canonical(f4_apply(tr, F, q)) == canonical(groebner(F, Ring(names, q)))


def test_batched_equals_lanewise(cyclic5):
    names, F, _, tr = cyclic5
    primes = primes_below(2**31 - 1, 8)
    for n in (1, 2, 4, 8):
        batch = f4_apply_batched(tr, F, primes[:n])
        for q, B in zip(primes[:n], batch):
            assert canonical(B) == canonical(f4_apply(tr, F, q))


@settings(max_examples=5)
@given(st.permutations(list(range(4))))
def test_batched_lane_order_is_irrelevant(perm):
    names, F = family("katsura", 4)
    _, tr = f4_learn(F, Ring(names, P))
    primes = primes_below(2**31 - 1, 4)
    ref = f4_apply_batched(tr, F, primes)
    out = f4_apply_batched(tr, F, [primes[i] for i in perm])
    for k, i in enumerate(perm):
        assert canonical(out[k]) == canonical(ref[i])


def unlucky_system(q):
    # x + y and x - (1 + q')y - 1 with q' = q - 2: over Q the difference is
    # q*y + 1, which degenerates to the constant 1 modulo q
    return [{(1, 0): 1, (0, 1): 1}, {(1, 0): 1, (0, 1): -(q - 1), (0, 0): -1}]


def test_unlucky_prime_diverges():
    q = 2**31 - 1
    F = unlucky_system(q)
    R = Ring(("x", "y"), P)
    G, tr = f4_learn(F, R)
    assert len(G) == 2
    assert groebner(F, Ring(("x", "y"), q)) == [{(0, 0): 1}]
    with pytest.raises(Divergence):
        f4_apply(tr, F, q)


def test_unlucky_lane_is_isolated():
    q = 2**31 - 1
    F = unlucky_system(q)
    _, tr = f4_learn(F, Ring(("x", "y"), P))
    primes = primes_below(q, 3)
    primes.insert(2, q)
    with pytest.raises(Divergence) as info:
        f4_apply_batched(tr, F, primes)
    assert info.value.lanes == [2]
    res = info.value.results
    assert res[2] is None
    for k in (0, 1, 3):
        assert canonical(res[k]) == canonical(groebner(F, Ring(("x", "y"), primes[k])))


def test_wrong_input_count_diverges(cyclic5):
    _, F, _, tr = cyclic5
    with pytest.raises(Divergence):
        f4_apply(tr, F[:-1], P)


def test_support_outside_pattern_diverges():
    names, F = family("katsura", 3)
    _, tr = f4_learn(F, Ring(names, P))
    G = [dict(f) for f in F]
    G[0][(0, 0, 0, 3)] = 1
    with pytest.raises(Divergence):
        f4_apply(tr, G, P)


def test_serialization_round_trip(tmp_path, cyclic5):
    _, F, G, tr = cyclic5
    path = tmp_path / "c5.trace"
    tr.save(path)
    assert path.read_bytes()[:4] == b"F4TR"
    back = Trace.load(path)
    assert back.to_bytes() == tr.to_bytes()
    assert back.nrounds == tr.nrounds and back.ordering == tr.ordering
    q = primes_below(2**31 - 1, 1)[0]
    assert canonical(f4_apply(back, F, q)) == canonical(f4_apply(tr, F, q))


def test_corrupt_files_are_rejected(cyclic5):
    tr = cyclic5[3]
    data = tr.to_bytes()
    with pytest.raises(TraceFormatError):
        Trace.from_bytes(b"XXXX" + data[4:])
    with pytest.raises(TraceFormatError):
        Trace.from_bytes(data[: len(data) // 2])
    with pytest.raises(TraceFormatError):
        Trace.from_bytes(data[:4] + b"\x09\x00" + data[6:])


def test_batch_size_is_validated(cyclic5):
    _, F, _, tr = cyclic5
    with pytest.raises(F4Error):
        f4_apply_batched(tr, F, primes_below(2**31 - 1, 3))


def test_learning_needs_a_prime():
    with pytest.raises(F4Error):
        f4_learn([{(1,): 1}], Ring(("x",), 0))


def test_learn_falls_back_to_unpacked():
    R = Ring(("x", "y"), P)
    F = [{(130, 0): 1, (0, 1): 1}, {(1, 1): 1, (0, 0): 1}]
    G, tr = f4_learn(F, R)
    assert canonical(G) == canonical(groebner(F, R))
    assert canonical(f4_apply(tr, F, 2**31 - 1)) == canonical(groebner(F, Ring(("x", "y"), 2**31 - 1)))


def test_rational_inputs_apply():
    R = Ring(("x", "y"), P)
    F = [{(2, 0): 1, (0, 1): Fraction(1, 3)}, {(1, 1): Fraction(2, 5), (0, 0): 1}]
    G, tr = f4_learn(F, R)
    q = 2**31 - 1
    assert canonical(f4_apply(tr, F, q)) == canonical(groebner(F, Ring(("x", "y"), q)))
