"""Cone algebras, Cartan-homotopy module structures, and Maurer-Cartan
twisting.

The cone carrier doubles each shifted algebra slot with an odd marker: slots
are (0, g) for plain inputs and (1, g) for marked ones, the marker adding one
to the slot degree.  The decreasing filtration used throughout counts markers;
"valid at depth n" means the square of the structure coderivation kills every
counit component on words with fewer than n markers.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

from .coeff import Norm, Ring, Scalar
from .colang import (
    LInf, MultiMap, Report, Space, add_into, comodule_morphism, counit_component,
    module_coderivation, scale_vec, verify_algebra, verify_module,
    verify_module_morphism, verify_morphism,
)
from .graded import GradedBasis, LinOp, canonical_word


def eps_count(word) -> int:
    return sum(slot[0] for slot in word)


def cone_space(linf: LInf) -> Space:
    degs = {}
    for g in linf.space.slots():
        d = linf.space.deg(g)
        degs[(0, g)] = d
        degs[(1, g)] = d + 1
    return Space(degs)


def build_cone(L: LInf, verified=True, word_bound=4) -> LInf:
    """The mapping cone of multiplication by z, as an L-infinity algebra.

    On plain words the base brackets act; one marked slot produces a marked
    output with sign -(-1)^{sum of earlier slot degrees}, and a single marked
    input additionally emits z times its plain copy; two or more marked slots
    vanish.
    """
    if verified and not L.verify(word_bound).passed:
        raise ValueError("base structure fails its own verification")
    space = cone_space(L)
    ring = L.ring
    zscal = ring.z(1)

    def maps(k, word):
        marks = eps_count(word)
        if marks >= 2:
            return {}
        if marks == 0:
            base = L.maps.apply(tuple(g for _, g in word))
            return {(0, h): s for h, s in base.items()}
        out = {}
        i = next(j for j, slot in enumerate(word) if slot[0] == 1)
        prefix = sum(space.deg(word[j]) for j in range(i)) % 2
        sign = -1 if prefix == 0 else 1
        stripped = tuple(g for _, g in word)
        for h, s in L.maps.apply(stripped).items():
            add_into(out, (1, h), s.scale(sign))
        if k == 1:
            add_into(out, (0, word[0][1]), zscal)
        return out

    cone = LInf(ring, L.basis, MultiMap(space, 1, ring, func=maps,
                                        max_arity=L.maps.max_arity))
    return cone


def lift_morphism(f: MultiMap, src_cone_space: Space, dst_cone_space: Space) -> MultiMap:
    """Lift a morphism family to the cones: plain part unchanged, one marked
    slot passes through with sign +(-1)^{sum of earlier slot degrees}."""
    if f.degree != 0:
        raise ValueError("only degree-0 families lift")

    def maps(k, word):
        marks = eps_count(word)
        if marks >= 2:
            return {}
        stripped = tuple(g for _, g in word)
        if marks == 0:
            return {(0, h): s for h, s in f.apply(stripped).items()}
        i = next(j for j, slot in enumerate(word) if slot[0] == 1)
        prefix = sum(src_cone_space.deg(word[j]) for j in range(i)) % 2
        sign = 1 if prefix == 0 else -1
        return {(1, h): s.scale(sign) for h, s in f.apply(stripped).items()}

    return MultiMap(src_cone_space, 0, f.ring, func=maps, max_arity=f.max_arity)


class CHModule:
    """A module over a cone algebra, valid modulo marker-depth `depth`.

    `L` is the base algebra, `cone` its cone, `mmaps` the module family over
    cone words, `mbasis` the module generators with unshifted degrees.
    """

    def __init__(self, L: LInf, cone: LInf, mbasis: GradedBasis, mmaps: MultiMap,
                 depth=2):
        self.L = L
        self.cone = cone
        self.mbasis = mbasis
        self.mmaps = mmaps
        self.depth = depth
        self.ring = L.ring

    @property
    def mspace(self) -> Space:
        return self.mmaps.mspace

    def module_keys(self):
        return self.mspace.slots()


def check_mod_epsilon(chm: CHModule, n: int, word_bound=3, slot_filter=None,
                      mslot_filter=None) -> Report:
    """Depth-n check: the squared coderivation has no counit component on
    words carrying at most n-1 markers.

    `slot_filter` restricts which algebra slots are quantified over (carriers
    built from an operator algebra need headroom above the enumerated slots);
    `mslot_filter` keeps module generators inside the validity window of a
    length-truncated carrier.
    """
    def keep(w):
        if eps_count(w) > n - 1:
            return False
        return slot_filter is None or all(slot_filter(s) for s in w)

    rep = verify_module(chm.cone.maps, chm.mmaps, chm.mspace, word_bound,
                        eps_filter=keep, counit_only=True,
                        mslot_filter=mslot_filter, name=f"mod-eps-{n}")
    rep.window["depth"] = n
    return rep


# ---------------------------------------------------------------------------
# operator extraction and the converse assembly
# ---------------------------------------------------------------------------
class ShapeError(ValueError):
    """The structure does not have the two-bracket operator shape."""


def _column(vec: dict) -> dict:
    return {m: s for m, s in vec.items() if s}


def extract_operators(chm: CHModule, check_shape=True, word_bound=3):
    """Recover (d, L, I, rho) from a module with the two-bracket shape:
    d = -l0, L_y = (-1)^{|y|} l1(y|.), I_y = (-1)^{|y|+1} l1(eps y|.),
    rho_{y1,y2} = (-1)^{|y1|+|y2|} l2(y1, eps y2|.)."""
    ring = chm.ring
    L = chm.L
    if check_shape:
        if chm.L.maps.max_arity > 2 and _has_entries_beyond(chm.L.maps, 2, L.space, word_bound):
            raise ShapeError("algebra brackets above arity 2")
        if chm.mmaps.max_arity > 2 and _has_module_entries_beyond(chm, 2, word_bound):
            raise ShapeError("module maps above arity 2")
        for w in L.space.words(2, min_len=2):
            cw = tuple((0, g) for g in w)
            for m in chm.module_keys():
                if chm.mmaps.apply(cw, m):
                    raise ShapeError(f"unmarked arity-2 module map on {cw}")

    mkeys = chm.module_keys()

    def d_op() -> LinOp:
        cols = {m: _column(scale_vec(chm.mmaps.apply((), m), -1)) for m in mkeys}
        return LinOp(ring, cols, degree=1)

    def L_op(y) -> LinOp:
        sign = -1 if L.basis.deg(y) % 2 else 1
        cols = {m: _column(scale_vec(chm.mmaps.apply(((0, y),), m), sign)) for m in mkeys}
        return LinOp(ring, cols, degree=L.basis.deg(y))

    def I_op(y) -> LinOp:
        sign = 1 if L.basis.deg(y) % 2 else -1
        cols = {m: _column(scale_vec(chm.mmaps.apply(((1, y),), m), sign)) for m in mkeys}
        return LinOp(ring, cols, degree=L.basis.deg(y) + 1)

    def rho_op(y1, y2) -> LinOp:
        sign = -1 if (L.basis.deg(y1) + L.basis.deg(y2)) % 2 else 1
        cols = {m: _column(scale_vec(chm.mmaps.apply(((0, y1), (1, y2)), m), sign))
                for m in mkeys}
        return LinOp(ring, cols, degree=L.basis.deg(y1) + L.basis.deg(y2))

    return d_op(), L_op, I_op, rho_op


def _has_entries_beyond(maps: MultiMap, arity, space, word_bound):
    for k in range(arity + 1, min(maps.max_arity, word_bound) + 1):
        for w in space.words(k, min_len=k):
            if maps.apply(w):
                return True
    return False


def _has_module_entries_beyond(chm: CHModule, arity, word_bound):
    space = chm.cone.maps.space
    for k in range(arity + 1, min(chm.mmaps.max_arity, word_bound) + 1):
        for w in space.words(k, min_len=k):
            for m in chm.module_keys():
                if chm.mmaps.apply(w, m):
                    return True
    return False


def _vec_op(op_of_gen, vec: dict, ring: Ring, degree) -> LinOp:
    """Linear extension of a generator-indexed operator to a vector subscript."""
    out = LinOp.zero(ring, degree=degree)
    for g, c in vec.items():
        out = out + op_of_gen(g).scale_scalar(c)
    out.degree = degree
    return out


def ch_relations_report(chm: CHModule, triples=True) -> Report:
    """The three operator identities tying d, L, I, rho together, checked for
    every generator tuple of the base algebra."""
    ring = chm.ring
    L = chm.L
    d, L_op, I_op, rho_op = extract_operators(chm)
    gens = list(L.space.slots())
    deg = {g: L.basis.deg(g) for g in gens}
    zs = ring.z(1)

    def delta_vec(y) -> dict:
        return scale_vec(L.maps.apply((y,)), -1)

    def bracket_vec(y1, y2) -> dict:
        sign = -1 if deg[y1] % 2 else 1
        return scale_vec(L.maps.apply((y1, y2)), sign)

    def I_vec(vec, degree):
        return _vec_op(I_op, vec, ring, degree)

    def rho_left(vec, y2, degree):
        return _vec_op(lambda g: rho_op(g, y2), vec, ring, degree)

    def rho_right(y1, vec, degree):
        return _vec_op(lambda g: rho_op(y1, g), vec, ring, degree)

    rep = Report("ch-relations")
    for y in gens:
        res = d.commutator(I_op(y)) + I_vec(delta_vec(y), deg[y] + 2) \
            + L_op(y).scale_scalar(zs)
        rep.record(("3.4", y), _op_residual(res))
    for y1 in gens:
        s1 = -1 if deg[y1] % 2 else 1
        for y2 in gens:
            res = (I_vec(bracket_vec(y1, y2), deg[y1] + deg[y2] + 1)
                   - L_op(y1).commutator(I_op(y2)).scale(s1)
                   + d.commutator(rho_op(y1, y2))
                   - rho_left(delta_vec(y1), y2, deg[y1] + deg[y2] + 1)
                   - rho_right(y1, delta_vec(y2), deg[y1] + deg[y2] + 1).scale(s1))
            rep.record(("3.5", y1, y2), _op_residual(res))
    if triples:
        for y1 in gens:
            for y2 in gens:
                s12 = -1 if (deg[y1] * deg[y2]) % 2 else 1
                for y3 in gens:
                    res = (rho_left(bracket_vec(y1, y2), y3, deg[y1] + deg[y2] + deg[y3])
                           - rho_right(y1, bracket_vec(y2, y3), deg[y1] + deg[y2] + deg[y3])
                           + rho_right(y2, bracket_vec(y1, y3),
                                       deg[y1] + deg[y2] + deg[y3]).scale(s12)
                           - L_op(y1).commutator(rho_op(y2, y3))
                           + L_op(y2).commutator(rho_op(y1, y3)).scale(s12))
                    rep.record(("3.6", y1, y2, y3), _op_residual(res))
    return rep


def _op_residual(op: LinOp) -> dict:
    return {(src, dst): s for src, dst, s in op.entries()}


def assemble_from_dgla(ring: Ring, L: LInf, mbasis: GradedBasis, d: LinOp,
                       L_op, I_op, rho_op, eps2=None, check=True,
                       word_bound=3) -> CHModule:
    """Build the module family from the operator package (the converse
    direction); relations are re-checked unless `check` is off."""
    cone = build_cone(L, verified=check, word_bound=word_bound)
    mspace = Space({m: mbasis.deg(m) - 1 for m in mbasis})
    deg = {g: L.basis.deg(g) for g in L.space.slots()}

    def maps(k, word, m):
        marks = eps_count(word)
        if k == 0:
            return _column({h: s.scale(-1) for h, s in d.apply_gen(m).items()})
        if k == 1:
            ((mark, y),) = word
            if mark == 0:
                sign = -1 if deg[y] % 2 else 1
                return _column(scale_vec(L_op(y).apply_gen(m), sign))
            sign = 1 if deg[y] % 2 else -1
            return _column(scale_vec(I_op(y).apply_gen(m), sign))
        if k == 2:
            if marks == 1:
                (m1, y1), (m2, y2) = word
                if m1 == 1:                       # canonical order puts plain first
                    (m1, y1), (m2, y2) = (m2, y2), (m1, y1)
                sign = -1 if (deg[y1] + deg[y2]) % 2 else 1
                return _column(scale_vec(rho_op(y1, y2).apply_gen(m), sign))
            if marks == 2 and eps2 is not None:
                return _column(eps2(word[0][1], word[1][1], m))
        return {}

    mmaps = MultiMap(cone.maps.space, 1, ring, func=maps, module=True,
                     mspace=mspace, max_arity=2, min_arity=0)
    chm = CHModule(L, cone, mbasis, mmaps, depth=2)
    if check:
        rep = ch_relations_report(chm)
        if not rep.passed:
            label, res = rep.failures[0]
            raise ShapeError(f"operator relations fail at {label}: {res}")
    return chm


# ---------------------------------------------------------------------------
# Maurer-Cartan elements and twisting
# ---------------------------------------------------------------------------
class MCElement:
    """A degree-one element with norm below one and vanishing curvature sum."""

    def __init__(self, vec: dict, norm: Norm, residual_checked=True):
        self.vec = {g: s for g, s in vec.items() if s}
        self.norm = norm
        self.residual_checked = residual_checked

    def is_zero(self):
        return not self.vec

    def __repr__(self):
        return f"MCElement({sorted(self.vec)}, norm={self.norm!r})"


class MCError(ValueError):
    pass


def gamma_powers(gamma: dict, i: int):
    """Divided power expansion: multisets of support generators of size i with
    coefficient prod c^m / m!."""
    support = sorted(gamma, key=repr)
    for combo in itertools.combinations_with_replacement(support, i):
        coeff = None
        mult = {}
        for g in combo:
            mult[g] = mult.get(g, 0) + 1
        q = Fraction(1)
        for g, m in mult.items():
            for j in range(1, m + 1):
                q /= j
        for g in combo:
            coeff = gamma[g] if coeff is None else coeff * gamma[g]
        if coeff is not None:
            coeff = coeff.scale(q)
        yield combo, coeff


def mc_residual(gamma: dict, L: LInf) -> dict:
    out = {}
    for k in range(1, L.maps.max_arity + 1):
        for combo, coeff in gamma_powers(gamma, k):
            if coeff is None or not coeff:
                continue
            for h, s in L.maps.apply(combo).items():
                add_into(out, h, s * coeff)
    return out


def mc_check(gamma: dict, L: LInf) -> MCElement:
    """Validate degree, norm, and the curvature sum of a candidate element."""
    for g, c in gamma.items():
        if not c:
            continue
        d = c.degree()
        if d is None or L.basis.deg(g) + d != 1:
            raise MCError(f"component at {g} is not homogeneous of degree one")
    norm = Norm.zero(L.ring.norm_constant)
    for g, c in gamma.items():
        norm = max(norm, c.norm())
    if not norm.lt_one():
        raise MCError("norm is not below one")
    res = mc_residual(gamma, L)
    if any(res.values()):
        lead = sorted((s.norm().lam, repr(g)) for g, s in res.items() if s)[0]
        raise MCError(f"curvature sum does not vanish; leading energy {lead[0]} at {lead[1]}")
    return MCElement(gamma, norm)


def twist_algebra(L: LInf, mc: MCElement) -> LInf:
    gamma = mc.vec

    def maps(k, word):
        out = {}
        for i in range(0, L.maps.max_arity - k + 1):
            for combo, coeff in gamma_powers(gamma, i):
                if i and (coeff is None or not coeff):
                    continue
                img = L.maps.apply(combo + word)
                for h, s in img.items():
                    add_into(out, h, s if coeff is None else s * coeff)
        return out

    return LInf(L.ring, L.basis, MultiMap(L.space, 1, L.ring, func=maps,
                                          max_arity=L.maps.max_arity))


def twist_module(chm: CHModule, mc: MCElement) -> CHModule:
    """Twisted module family over the twisted base: marked slots untouched,
    plain copies of the element absorbed with divided powers."""
    gamma = mc.vec
    mmaps = chm.mmaps

    def maps(k, word, m):
        out = {}
        for i in range(0, mmaps.max_arity - k + 1):
            for combo, coeff in gamma_powers(gamma, i):
                if i and (coeff is None or not coeff):
                    continue
                cone_combo = tuple((0, g) for g in combo)
                img = mmaps.apply(cone_combo + word, m)
                for h, s in img.items():
                    add_into(out, h, s if coeff is None else s * coeff)
        return out

    Lg = twist_algebra(chm.L, mc)
    cone = build_cone(Lg, verified=False)
    new = MultiMap(cone.maps.space, 1, chm.ring, func=maps, module=True,
                   mspace=chm.mspace, max_arity=mmaps.max_arity, min_arity=0)
    return CHModule(Lg, cone, chm.mbasis, new, depth=chm.depth)


def twist_comodule_maps(f: MultiMap, mc: MCElement) -> MultiMap:
    """Conjugate a module-morphism family by the group-like element."""
    gamma = mc.vec

    def maps(k, word, m):
        out = {}
        for i in range(0, f.max_arity - k + 1):
            for combo, coeff in gamma_powers(gamma, i):
                if i and (coeff is None or not coeff):
                    continue
                cone_combo = tuple((0, g) for g in combo)
                img = f.apply(cone_combo + word, m)
                for h, s in img.items():
                    add_into(out, h, s if coeff is None else s * coeff)
        return out

    return MultiMap(f.space, 0, f.ring, func=maps, module=True, mspace=f.mspace,
                    max_arity=f.max_arity, min_arity=0)


def pushforward(f: MultiMap, mc: MCElement, dst: LInf) -> MCElement:
    """Image element sum f_k(gamma,...,gamma)/k! with its norm certificate."""
    out = {}
    for k in range(1, f.max_arity + 1):
        for combo, coeff in gamma_powers(mc.vec, k):
            if coeff is None or not coeff:
                continue
            for h, s in f.apply(combo).items():
                add_into(out, h, s * coeff)
    return mc_check(out, dst)


# ---------------------------------------------------------------------------
# morphisms of CH modules
# ---------------------------------------------------------------------------
def check_ch_morphism(f: MultiMap, src: CHModule, dst: CHModule, word_bound=3) -> Report:
    """Defect of the comodule morphism must drop marker depth by two."""
    rep = verify_module_morphism(
        src.cone.maps, src.mmaps, dst.mmaps, f, src.mspace, word_bound,
        eps_filter=lambda w: eps_count(w) <= 1, counit_only=True,
        name="ch-morphism")
    return rep


def morphism_components(f: MultiMap, src: CHModule, dst: CHModule):
    """The two operator families of a module morphism:
    F_y = (-1)^{|y|} f1(y|.), Feps_y = (-1)^{|y|+1} f1(eps y|.)."""
    ring = src.ring
    deg = {g: src.L.basis.deg(g) for g in src.L.space.slots()}
    mkeys = src.module_keys()

    def f0() -> LinOp:
        cols = {m: _column(f.apply((), m)) for m in mkeys}
        return LinOp(ring, cols, degree=0)

    def F_op(y) -> LinOp:
        sign = -1 if deg[y] % 2 else 1
        cols = {m: _column(scale_vec(f.apply(((0, y),), m), sign)) for m in mkeys}
        return LinOp(ring, cols, degree=deg[y])

    def Feps_op(y) -> LinOp:
        sign = 1 if deg[y] % 2 else -1
        cols = {m: _column(scale_vec(f.apply(((1, y),), m), sign)) for m in mkeys}
        return LinOp(ring, cols, degree=deg[y] + 1)

    return f0(), F_op, Feps_op


def ch_morphism_identity_report(f: MultiMap, src: CHModule, dst: CHModule) -> Report:
    """For each generator y: I_y f0 - f0 I_y = d Feps_y - (-1)^{|y|} Feps_y d
    - Feps_{delta y} - z F_y."""
    ring = src.ring
    d_src, _, I_src, _ = extract_operators(src, check_shape=False)
    d_dst, _, I_dst, _ = extract_operators(dst, check_shape=False)
    f0, F_op, Feps_op = morphism_components(f, src, dst)
    zs = ring.z(1)
    rep = Report("ch-morphism-identity")
    for y in src.L.space.slots():
        dy = src.L.basis.deg(y)
        delta_y = scale_vec(src.L.maps.apply((y,)), -1)
        lhs = I_dst(y).compose(f0) - f0.compose(I_src(y))
        rhs = d_dst.compose(Feps_op(y)) \
            - Feps_op(y).compose(d_src).scale(-1 if dy % 2 else 1) \
            - _vec_op(Feps_op, delta_y, ring, dy + 2) \
            - F_op(y).scale_scalar(zs)
        rep.record(("chmo", y), _op_residual(lhs - rhs))
    return rep


# ---------------------------------------------------------------------------
# contractivity
# ---------------------------------------------------------------------------
def check_contractive(maps: MultiMap, word_bound=3, name="contractive") -> Report:
    """Outputs on basis words must not exceed norm one (basis slots are
    normalized, so the input norm product is one)."""
    rep = Report(name, window={"word_bound": word_bound})
    one = Norm.one(maps.ring.norm_constant)

    def out_norm(vec):
        n = Norm.zero(maps.ring.norm_constant)
        for s in vec.values():
            n = max(n, s.norm())
        return n

    if maps.func is None:
        for k in sorted(maps.table):
            for key, vec in sorted(maps.table[k].items(), key=repr):
                n = out_norm(vec)
                rep.record(key, {} if n <= one else {key: f"norm {n!r}"})
        return rep
    words = maps.space.words(min(word_bound, maps.max_arity), min_len=maps.min_arity)
    for w in words:
        if maps.module:
            for m in maps.mspace.slots():
                n = out_norm(maps.apply(w, m))
                rep.record((w, m), {} if n <= one else {(w, m): f"norm {n!r}"})
        else:
            n = out_norm(maps.apply(w))
            rep.record(w, {} if n <= one else {w: f"norm {n!r}"})
    return rep
