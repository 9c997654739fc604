import random
from fractions import Fraction

import pytest

from chcalc.coeff import Ring, TruncationPolicy
from chcalc.colang import (
    LInf, MultiMap, Space, comodule_morphism, counit_component, dgla_module_to_maps,
    dgla_to_linf, exp_extend, hat_extend, linf_from_tables, module_coderivation,
    restrict_module, verify_algebra, verify_module, verify_module_morphism,
    verify_morphism,
)


@pytest.fixture
def ring():
    return Ring(TruncationPolicy(z_order=3, energy_cut=2, t_order=2, e_window=(-4, 4)))


def one(ring):
    return ring.one()


def upper_triangular(ring) -> LInf:
    """Commutator DGLA of 2x2 upper-triangular matrices, zero differential."""
    gens = [("E11", 0), ("E12", 0), ("E22", 0)]
    table = {
        ("E11", "E12"): {"E12": ring.one()},
        ("E12", "E22"): {"E12": ring.one()},
    }

    def bracket(a, b):
        if (a, b) in table:
            return table[(a, b)]
        if (b, a) in table:
            return {h: s.scale(-1) for h, s in table[(b, a)].items()}
        return {}

    return dgla_to_linf(ring, gens, {}, bracket)


def test_abelian_passes(ring):
    L = linf_from_tables(ring, [("a", 1), ("b", 2)], {}, max_arity=2)
    assert L.verify(4).passed


def test_upper_triangular_dgla_passes(ring):
    assert upper_triangular(ring).verify(4).passed


def test_broken_bracket_fails_with_named_word(ring):
    gens = [("a", 1), ("b", 2), ("c", 3)]
    # non-Lie bracket: [a,b] = c, [a,c] = b violates Jacobi/antisymmetry data
    def bracket(g1, g2):
        if {g1, g2} == {"a", "b"}:
            return {"c": ring.one()}
        if {g1, g2} == {"a", "c"}:
            return {"b": ring.one()}
        if g1 == g2 == "a":
            return {"b": ring.one()}
        return {}

    L = dgla_to_linf(ring, gens, {}, bracket)
    rep = L.verify(4)
    assert not rep.passed
    assert any(len(word) == 3 for word, _ in rep.failures)


def test_hat_extend_single_map(ring):
    # maps with only f1 on a word (y1 . y2): f1(y1) . y2 + sign y1 . f1(y2)
    space = Space({"x": 1, "y": 2})
    f1 = MultiMap(space, 1, ring, table={1: {("x",): {"y": ring.one()}}})
    act = hat_extend(f1)
    out = act(("x", "x"))
    # both slots odd: x.x would be zero word; use mixed word
    out = act(("x", "y"))
    assert out == {("y", "y"): ring.one()}


def test_hat_extend_arity2_on_length3(ring):
    space = Space({"a": 0, "b": 0, "c": 0})
    table = {2: {
        ("a", "b"): {"c": ring.one()},
        ("a", "c"): {"b": ring.one()},
        ("b", "c"): {"a": ring.one()},
    }}
    maps = MultiMap(space, 1, ring, table=table)
    act = hat_extend(maps)
    out = act(("a", "b", "c"))
    # three (2,1)-shuffles, all signs +1 on even slots
    assert out == {("c", "c"): ring.one(), ("b", "b"): ring.one(), ("a", "a"): ring.one()}


def test_zero_multimap_extends_to_zero(ring):
    space = Space({"x": 0})
    maps = MultiMap(space, 1, ring, table={}, max_arity=2)
    assert hat_extend(maps)(("x", "x")) == {}


def test_exp_extend_identity(ring):
    space = Space({"x": 0, "y": 1})
    ident = MultiMap(space, 0, ring,
                     table={1: {("x",): {"x": ring.one()}, ("y",): {"y": ring.one()}}})
    act = exp_extend(ident)
    for word in [(), ("x",), ("x", "y"), ("x", "x", "y")]:
        assert act(word) == {word: ring.one()}, word


def test_exp_extend_f1_power(ring):
    space = Space({"x": 0})
    f = MultiMap(space, 0, ring, table={1: {("x",): {"x": ring.monomial(2)}}})
    act = exp_extend(f)
    assert act(("x", "x")) == {("x", "x"): ring.monomial(4)}


def test_module_coderivation_degenerate_cases(ring):
    L = upper_triangular(ring)
    # adjoint module: d = 0, action = bracket
    def action(g):
        out = {}
        for m in ("E11", "E12", "E22"):
            img = {}
            for (w), vec in L.maps.table.get(2, {}).items():
                pass
            out[m] = {}
        return out

    # use the honest adjoint action via the packaged l2
    def adjoint(g):
        cols = {}
        for m in ("E11", "E12", "E22"):
            img = L.maps.apply((g, m))
            sign = -1 if L.basis.deg(g) % 2 else 1
            cols[m] = {h: s.scale(sign) for h, s in img.items()}
        return cols

    mmaps = dgla_module_to_maps(ring, L, [("E11", 0), ("E12", 0), ("E22", 0)],
                                {}, adjoint)
    # k = 0 word: only l0 acts
    act = module_coderivation(L.maps, mmaps)
    out = act((), "E12")
    assert out == {}
    rep = verify_module(L.maps, mmaps, mmaps.mspace, 3)
    assert rep.passed


def test_comodule_roundtrip(ring):
    space = Space({"y": 0})
    mspace = Space({"m": -1, "n": 0})
    table = {0: {((), "m"): {"n": ring.one()}},
             1: {(("y",), "m"): {"m": ring.T(1)}}}
    f = MultiMap(space, 0, ring, table=table, module=True, mspace=mspace, min_arity=0)
    act = comodule_morphism(f)
    # extraction recovers the family
    for k, tab in table.items():
        for (w, m), out in tab.items():
            assert counit_component(act(w, m)) == out
    # f0-only morphism acts as id (x) f0 on every word
    f0 = MultiMap(space, 0, ring, table={0: {((), "m"): {"n": ring.one()}}},
                  module=True, mspace=mspace, min_arity=0)
    act0 = comodule_morphism(f0)
    out = act0(("y", "y"), "m")
    assert out == {(("y", "y"), "n"): ring.one()}


def random_dgla_3dim(ring, rnd):
    """Random antisymmetric structure constants on a 3-dim graded space;
    usually not a DGLA (Jacobi or Leibniz fails)."""
    gens = [("a", 0), ("b", 0), ("c", 1)]
    deg = dict(gens)
    names = [g for g, _ in gens]

    def rand_vec(target_deg):
        out = {}
        for h in names:
            if deg[h] == target_deg and rnd.random() < 0.6:
                c = Fraction(rnd.randint(-2, 2))
                if c:
                    out[h] = ring.monomial(c)
        return out

    delta = {g: rand_vec(deg[g] + 1) for g in names}
    pairs = {}
    for i, g1 in enumerate(names):
        for g2 in names[i:]:
            if g1 == g2 and deg[g1] % 2 == 0:
                continue
            pairs[(g1, g2)] = rand_vec(deg[g1] + deg[g2])

    def bracket(g1, g2):
        if (g1, g2) in pairs:
            return pairs[(g1, g2)]
        if (g2, g1) in pairs:
            sign = -1 if (deg[g1] * deg[g2]) % 2 == 0 else 1
            return {h: s.scale(sign) for h, s in pairs[(g2, g1)].items()}
        return {}

    return gens, deg, delta, bracket


def dgla_axioms_hold(ring, gens, deg, delta, bracket):
    """Direct check: delta^2 = 0, delta a bracket derivation, graded Jacobi."""
    names = [g for g, _ in gens]

    def app_delta(vec):
        out = {}
        for g, s in vec.items():
            for h, s2 in delta.get(g, {}).items():
                out[h] = out.get(h, ring.zero()) + s2 * s
        return {h: s for h, s in out.items() if s}

    def brk(vec1, vec2):
        out = {}
        for g1, s1 in vec1.items():
            for g2, s2 in vec2.items():
                for h, s3 in bracket(g1, g2).items():
                    out[h] = out.get(h, ring.zero()) + s3 * s1 * s2
        return {h: s for h, s in out.items() if s}

    def unit(g):
        return {g: ring.one()}

    for g in names:
        if app_delta(app_delta(unit(g))):
            return False
    for g1 in names:
        for g2 in names:
            lhs = app_delta(bracket(g1, g2))
            sign = -1 if deg[g1] % 2 else 1
            rhs = brk(app_delta(unit(g1)), unit(g2))
            for h, s in brk(unit(g1), app_delta(unit(g2))).items():
                rhs[h] = rhs.get(h, ring.zero()) + s.scale(sign)
            if any((lhs.get(h, ring.zero()) - rhs.get(h, ring.zero()))
                   for h in set(lhs) | set(rhs)):
                return False
    for g1 in names:
        for g2 in names:
            for g3 in names:
                lhs = brk(unit(g1), bracket(g2, g3))
                t1 = brk(bracket(g1, g2), unit(g3))
                sign = -1 if (deg[g1] * deg[g2]) % 2 else 1
                t2 = brk(unit(g2), bracket(g1, g3))
                for h, s in t1.items():
                    lhs[h] = lhs.get(h, ring.zero()) - s
                for h, s in t2.items():
                    lhs[h] = lhs.get(h, ring.zero()) - s.scale(sign)
                if any(lhs.values()):
                    return False
    return True


def test_dgla_packaging_iff_axioms(ring):
    rnd = random.Random(21)
    seen = {True: 0, False: 0}
    for _ in range(40):
        gens, deg, delta, bracket = random_dgla_3dim(ring, rnd)
        ok = dgla_axioms_hold(ring, gens, deg, delta, bracket)
        L = dgla_to_linf(ring, gens, delta, bracket)
        assert L.verify(3).passed == ok
        seen[ok] += 1
    assert seen[False] > 0  # the sample must actually exercise failures


def test_identity_morphism(ring):
    L = upper_triangular(ring)
    ident = MultiMap(L.space, 0, ring,
                     table={1: {(g,): {g: ring.one()} for g in L.space.slots()}})
    assert verify_morphism(L.maps, L.maps, ident, 3).passed


def test_scaling_morphism_and_restriction(ring):
    L = upper_triangular(ring)
    # conjugation by diag scaling: E12 -> 2 E12 is a DGLA automorphism here
    scale = {"E11": 1, "E12": 2, "E22": 1}
    f = MultiMap(L.space, 0, ring,
                 table={1: {(g,): {g: ring.monomial(scale[g])} for g in L.space.slots()}})
    assert verify_morphism(L.maps, L.maps, f, 3).passed

    # restriction along the identity leaves a module unchanged
    def adjoint(g):
        cols = {}
        for m in ("E11", "E12", "E22"):
            img = L.maps.apply((g, m))
            cols[m] = dict(img)
        return cols

    mmaps = dgla_module_to_maps(ring, L, [("E11", 0), ("E12", 0), ("E22", 0)], {}, adjoint)
    ident = MultiMap(L.space, 0, ring,
                     table={1: {(g,): {g: ring.one()} for g in L.space.slots()}})
    restricted = restrict_module(ident, L.maps, L.maps, mmaps, max_arity=3)
    for k in (0, 1, 2):
        for w in L.space.words(k, min_len=k):
            for m in mmaps.mspace.slots():
                assert restricted.apply(w, m) == mmaps.apply(w, m)
    # restriction along the scaling automorphism still yields a module
    restricted2 = restrict_module(f, L.maps, L.maps, mmaps, max_arity=3)
    rep = verify_module(L.maps, restricted2, mmaps.mspace, 2)
    assert rep.passed


def test_module_morphism_identity(ring):
    L = upper_triangular(ring)

    def adjoint(g):
        return {m: dict(L.maps.apply((g, m))) for m in ("E11", "E12", "E22")}

    mmaps = dgla_module_to_maps(ring, L, [("E11", 0), ("E12", 0), ("E22", 0)], {}, adjoint)
    fid = MultiMap(L.space, 0, ring,
                   table={0: {((), m): {m: ring.one()} for m in mmaps.mspace.slots()}},
                   module=True, mspace=mmaps.mspace, min_arity=0)
    rep = verify_module_morphism(L.maps, mmaps, mmaps, fid, mmaps.mspace, 2)
    assert rep.passed
