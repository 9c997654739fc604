import math
import random

import pytest

from chcalc.coeff import Ring, TruncationPolicy
from chcalc.graded import (
    GradedBasis, GradedElement, LinOp, canonical_word, is_shuffle, koszul_sign,
    shuffles, suspend,
)


def test_identity_and_transposition():
    assert koszul_sign((0, 1, 2), [1, 1, 0]) == 1
    assert koszul_sign((1, 0), [1, 1]) == -1
    assert koszul_sign((1, 0), [1, 2]) == 1


def test_three_cycle_matches_transposition_decomposition():
    # 3-cycle on shifted degrees (1,1,0): decompose into transpositions
    degs = [1, 1, 0]
    cycle = (1, 2, 0)
    # (1,2,0) = apply swap(0,1) then swap(1,2) step by step on the word
    s1 = koszul_sign((1, 0, 2), degs)                     # word -> x2 x1 x3
    degs_after = [degs[1], degs[0], degs[2]]
    s2 = koszul_sign((0, 2, 1), degs_after)               # -> x2 x3 x1
    assert koszul_sign(cycle, degs) == s1 * s2


def test_composition_law_random():
    rnd = random.Random(3)
    from itertools import permutations

    for k in (2, 3, 4):
        perms = list(permutations(range(k)))
        for _ in range(20):
            degs = [rnd.randint(-2, 3) for _ in range(k)]
            for sigma in perms:
                for tau in perms:
                    composed = tuple(tau[sigma[i]] for i in range(k))
                    lhs = koszul_sign(composed, degs)
                    degs_tau = [degs[tau[i]] for i in range(k)]
                    rhs = koszul_sign(sigma, degs_tau) * koszul_sign(tau, degs)
                    assert lhs == rhs


def test_shuffle_counts():
    assert len(list(shuffles(1, 1))) == 2
    assert len(list(shuffles(2, 1))) == 3
    for p in range(0, 5):
        for q in range(0, 8 - p):
            assert len(list(shuffles(p, q))) == math.comb(p + q, p)
    assert len(list(shuffles(1, 1, 1))) == 6


def test_shuffle_membership_partition():
    from itertools import permutations

    blocks = (2, 2)
    sh = set(shuffles(*blocks))
    allp = set(permutations(range(4)))
    assert sh == {p for p in allp if is_shuffle(p, blocks)}
    assert len(sh) < len(allp)


def test_canonical_word():
    w, s = canonical_word(("b", "a"), [1, 1])
    assert w == ("a", "b") and s == -1
    w, s = canonical_word(("b", "a"), [2, 1])
    assert w == ("a", "b") and s == 1
    _, s = canonical_word(("a", "a"), [1, 1])
    assert s == 0
    w, s = canonical_word(("a", "a"), [2, 2])
    assert s == 1


def test_canonicalization_idempotent():
    rnd = random.Random(5)
    slots = ["a", "b", "c", "d"]
    degs = {"a": 1, "b": 2, "c": 3, "d": 0}
    for _ in range(50):
        word = tuple(rnd.choice(slots) for _ in range(rnd.randint(1, 5)))
        ds = [degs[g] for g in word]
        cw, sign = canonical_word(word, ds)
        if sign == 0:
            continue
        cw2, sign2 = canonical_word(cw, [degs[g] for g in cw])
        assert cw2 == cw and sign2 == 1


@pytest.fixture
def ring():
    return Ring(TruncationPolicy(z_order=3, energy_cut=2, t_order=2, e_window=(-2, 2)))


def test_suspend_roundtrip(ring):
    basis = GradedBasis([("v", 3)])
    x = GradedElement(ring, {("v",): ring.e(1, coeff=2)})
    up, b1 = suspend(x, basis, "up")
    assert b1.sdeg("v") == 2
    down, b0 = suspend(up, b1, "down")
    assert down == x and b0.sdeg("v") == 3


def test_linop_algebra(ring):
    a = LinOp(ring, {"x": {"y": ring.one()}}, degree=1)
    b = LinOp(ring, {"y": {"x": ring.one()}}, degree=1)
    ab = a.compose(b)
    assert ab.apply_gen("y") == {"y": ring.one()}
    comm = a.commutator(b)     # odd-odd: ab + ba
    assert comm.apply_gen("x") == {"x": ring.one()}
    assert comm.apply_gen("y") == {"y": ring.one()}
    even = LinOp(ring, {"x": {"x": ring.one()}}, degree=0)
    assert even.commutator(even).is_zero()
    assert (a - a).is_zero()
    vec = {"x": ring.T(1), "y": ring.one()}
    assert a.apply(vec) == {"y": ring.T(1)}
