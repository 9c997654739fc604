"""Finite A-infinity categories, reduced Hochschild chains and cochains, and
the operator zoo acting on them: the cup-style composition and bracket on
cochains, the Lie action, the two-index contraction, the rotation operator and
its one-cochain variant, and the induced differentials.

All chain-level formulas run on the shifted complexes: a chain word
(x_0, ..., x_k) carries degree sum |x_i|' and cochains carry their shifted
degree.  Words longer than the configured slot bound are dropped; reports
state the resulting validity window.
"""
from __future__ import annotations

import itertools
from contextlib import contextmanager
from fractions import Fraction

from .coeff import Norm, Ring, Scalar
from .colang import LInf, MultiMap, Report, Space, add_into, scale_vec
from .chmod import CHModule, build_cone, eps_count
from .graded import GradedBasis, LinOp

# named sign mutations used by the mutation-detection checks
_SIGN_MUTATIONS: set = set()


@contextmanager
def inject_sign_bug(name: str):
    """Deliberately corrupt one formula sign inside the context (tests only)."""
    _SIGN_MUTATIONS.add(name)
    try:
        yield
    finally:
        _SIGN_MUTATIONS.discard(name)


class AInfCategory:
    """Finite object set, finite graded hom bases, a strictly unital structure
    cochain, and an optional energy-positive deformation."""

    def __init__(self, ring: Ring, objects, gens, units, name="category",
                 max_slots=6):
        self.ring = ring
        self.objects = tuple(objects)
        self.gens = dict(gens)            # name -> (src, tgt, degree)
        self.units = dict(units)          # object -> unit gen name
        self.name = name
        self.max_slots = max_slots
        self.m: Cochain | None = None
        self.m_plus: Cochain | None = None
        for X, u in self.units.items():
            src, tgt, d = self.gens[u]
            if src != X or tgt != X or d != 0:
                raise ValueError(f"unit of {X} must be a degree-0 endomorphism")

    def src(self, g):
        return self.gens[g][0]

    def tgt(self, g):
        return self.gens[g][1]

    def deg(self, g):
        return self.gens[g][2]

    def sdeg(self, g):
        return self.gens[g][2] - 1

    def is_unit(self, g):
        return g in self.units.values()

    def word_sdeg(self, word):
        return sum(self.sdeg(g) for g in word)

    def composable_cyclic(self, word) -> bool:
        k = len(word)
        return all(self.tgt(word[i]) == self.src(word[(i + 1) % k]) for i in range(k))

    def reduced_word(self, word) -> bool:
        return all(not self.is_unit(g) for g in word[1:])

    def chain_words(self, max_slots=None):
        """Reduced cyclic basis words, shortest first, deterministic order."""
        bound = max_slots or self.max_slots
        out = []
        nonunits = [g for g in sorted(self.gens) if not self.is_unit(g)]
        heads = sorted(self.gens)
        for n in range(1, bound + 1):
            for head in heads:
                for tail in itertools.product(nonunits, repeat=n - 1):
                    word = (head,) + tail
                    if self.composable_cyclic(word):
                        out.append(word)
        return out

    def set_structure(self, entries):
        self.m = Cochain(self, 1, entries)
        return self.m

    def set_deformation(self, entries):
        self.m_plus = Cochain(self, 1, entries)
        return self.m_plus

    def total_structure(self) -> "Cochain":
        return self.m + self.m_plus if self.m_plus is not None else self.m


class Cochain:
    """A homogeneous multilinear cochain with finite support.

    entries: {(arity, input word): {output gen: Scalar}}; the shifted degree
    of every entry must equal `sdeg` (coefficient degrees included).
    """

    def __init__(self, cat: AInfCategory, sdeg: int, entries, reduced=None,
                 check=True):
        self.cat = cat
        self.sdeg = sdeg
        data = {}
        for (k, word), out in entries.items():
            word = tuple(word)
            if len(word) != k:
                raise ValueError("arity mismatch in cochain entry")
            vec = {}
            for g, s in out.items():
                if s:
                    vec[g] = vec[g] + s if g in vec else s
            vec = {g: s for g, s in vec.items() if s}
            if not vec:
                continue
            key = (k, word)
            if key in data:
                vec = _merge(data[key], vec)
            if vec:
                data[key] = vec
        self.entries = data
        if check:
            self._validate()
        if reduced is None:
            reduced = all(not cat.is_unit(g) for (k, w) in self.entries for g in w)
        self.reduced = reduced

    def _validate(self):
        cat = self.cat
        for (k, word), out in self.entries.items():
            for i in range(k - 1):
                if cat.tgt(word[i]) != cat.src(word[i + 1]):
                    raise ValueError(f"non-composable cochain input {word}")
            for g, s in out.items():
                if k and (cat.src(g) != cat.src(word[0]) or cat.tgt(g) != cat.tgt(word[-1])):
                    raise ValueError(f"cochain output {g} has wrong hom type for {word}")
                if k == 0 and cat.src(g) != cat.tgt(g):
                    raise ValueError("arity-0 components must be endomorphisms")
                d = s.degree()
                if d is None:
                    raise ValueError("cochain coefficients must be homogeneous")
                if cat.sdeg(g) + d - cat.word_sdeg(word) != self.sdeg:
                    raise ValueError(
                        f"entry {word}->{g} breaks homogeneity of degree {self.sdeg}")

    def apply(self, word) -> dict:
        return dict(self.entries.get((len(word), tuple(word)), {}))

    def is_zero(self):
        return not self.entries

    def __add__(self, other):
        if other.sdeg != self.sdeg:
            raise ValueError("cannot add cochains of different degrees")
        data = {k: dict(v) for k, v in self.entries.items()}
        for key, out in other.entries.items():
            data[key] = _merge(data.get(key, {}), out)
            if not data[key]:
                del data[key]
        return Cochain(self.cat, self.sdeg, data, check=False)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, q):
        return Cochain(self.cat, self.sdeg,
                       {k: {g: s.scale(q) for g, s in v.items()}
                        for k, v in self.entries.items()}, check=False,
                       reduced=self.reduced)

    def scale_scalar(self, s: Scalar):
        d = s.degree()
        if d is None:
            raise ValueError("need a homogeneous scalar")
        return Cochain(self.cat, self.sdeg + d,
                       {k: {g: s * v for g, v in out.items()}
                        for k, out in self.entries.items()}, check=False,
                       reduced=self.reduced)

    def max_arity(self):
        return max((k for k, _ in self.entries), default=0)

    def unit_entries(self):
        cat = self.cat
        return {key: out for key, out in self.entries.items()
                if any(cat.is_unit(g) for g in key[1])}

    def norm(self) -> Norm:
        n = Norm.zero(self.cat.ring.norm_constant)
        for out in self.entries.values():
            for s in out.values():
                n = max(n, s.norm())
        return n

    def __repr__(self):
        return f"Cochain(sdeg={self.sdeg}, {len(self.entries)} entries)"


def _merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for g, s in b.items():
        tot = out[g] + s if g in out else s
        if tot:
            out[g] = tot
        elif g in out:
            del out[g]
    return out


def elementary_cochain(cat: AInfCategory, k, word, out_gen, coeff=None) -> Cochain:
    coeff = coeff if coeff is not None else cat.ring.one()
    sdeg = cat.sdeg(out_gen) + (coeff.degree() or 0) - cat.word_sdeg(word)
    return Cochain(cat, sdeg, {(k, tuple(word)): {out_gen: coeff}})


def basis_cochains(cat: AInfCategory, max_arity: int, reduced=True):
    """Elementary reduced cochains up to the arity bound, as (name, k, word, out)."""
    items = []
    nonunits = [g for g in sorted(cat.gens) if not cat.is_unit(g)]
    source = nonunits if reduced else sorted(cat.gens)
    for k in range(max_arity + 1):
        for word in itertools.product(source, repeat=k):
            if any(cat.tgt(word[i]) != cat.src(word[i + 1]) for i in range(k - 1)):
                continue
            for g in sorted(cat.gens):
                if k and (cat.src(g) != cat.src(word[0]) or cat.tgt(g) != cat.tgt(word[-1])):
                    continue
                if k == 0 and cat.src(g) != cat.tgt(g):
                    continue
                name = f"c{k}[{','.join(word)}]>{g}"
                items.append((name, k, word, g))
    return items


# ---------------------------------------------------------------------------
# cochain operations
# ---------------------------------------------------------------------------
def circ(phi: Cochain, psi: Cochain) -> Cochain:
    """Insertion composition: sum over one slot of phi fed with psi, the sign
    being |psi|' times the shifted degrees passed over."""
    cat = phi.cat
    data = {}
    for (a, w), outs in phi.entries.items():
        for i in range(a):
            prefix = cat.word_sdeg(w[:i]) % 2
            sign = -1 if (psi.sdeg % 2 and prefix) else 1
            for (b, v), pouts in psi.entries.items():
                for mid, c_mid in pouts.items():
                    if mid != w[i]:
                        continue
                    new_word = w[:i] + v + w[i + 1:]
                    key = (a + b - 1, new_word)
                    vec = {}
                    for g, c in outs.items():
                        vec[g] = (c * c_mid).scale(sign)
                    data_key = data.setdefault(key, {})
                    for g, c in vec.items():
                        tot = data_key[g] + c if g in data_key else c
                        if tot:
                            data_key[g] = tot
                        elif g in data_key:
                            del data_key[g]
    data = {k: v for k, v in data.items() if v}
    return Cochain(cat, phi.sdeg + psi.sdeg, data, check=False)


def cbracket(phi: Cochain, psi: Cochain) -> Cochain:
    sign = -1 if (phi.sdeg % 2 and psi.sdeg % 2) else 1
    return circ(phi, psi) - circ(psi, phi).scale(sign)


def delta(cat: AInfCategory, phi: Cochain, use_deformation=False) -> Cochain:
    m = cat.total_structure() if use_deformation else cat.m
    return cbracket(m, phi)


# ---------------------------------------------------------------------------
# chain operations (single basis word -> chain vector)
# ---------------------------------------------------------------------------
def _emit(cat, out, word, coeff, max_slots):
    if len(word) > max_slots:
        return
    if not cat.reduced_word(word):
        return
    add_into(out, word, coeff)


def lie(phi: Cochain, cat: AInfCategory, word, max_slots=None) -> dict:
    """Lie action: interior insertions plus wrap-around applications."""
    bound = max_slots or cat.max_slots
    k = len(word) - 1
    sd = [cat.sdeg(g) for g in word]
    out = {}
    # interior insertions: phi eats x_{i+1}..x_j
    for i in range(0, k + 1):
        head = sum(sd[: i + 1]) % 2
        sign1 = -1 if (phi.sdeg % 2 and head) else 1
        for j in range(i, k + 1):
            seg = word[i + 1: j + 1]
            for g, c in phi.apply(seg).items():
                if seg == () and cat.src(g) != cat.tgt(word[i]):
                    continue
                new = word[: i + 1] + (g,) + word[j + 1:]
                _emit(cat, out, new, c.scale(sign1), bound)
    # wrap-around: phi eats x_{j+1}..x_k, x_0..x_i
    for i in range(0, k + 1):
        for j in range(i, k + 1):
            tail = word[j + 1:] + word[: i + 1]
            front = sum(sd[: j + 1]) % 2
            back = sum(sd[j + 1:]) % 2
            sign2 = -1 if (front and back) else 1
            if "lie-rotation" in _SIGN_MUTATIONS:
                sign2 = -sign2
            for g, c in phi.apply(tail).items():
                new = (g,) + word[i + 1: j + 1]
                _emit(cat, out, new, c.scale(sign2), bound)
    return out


def rho(phi: Cochain, psi: Cochain, cat: AInfCategory, word, max_slots=None) -> dict:
    """Two-cochain contraction: psi inside phi, phi wrapping the head."""
    bound = max_slots or cat.max_slots
    k = len(word) - 1
    sd = [cat.sdeg(g) for g in word]
    out = {}
    for i in range(0, k + 1):
        for j in range(i, k + 1):
            front = sum(sd[: j + 1]) % 2
            back = sum(sd[j + 1:]) % 2
            rot_sign = -1 if (front and back) else 1
            for s in range(j, k + 1):
                mid = sum(sd[j + 1: s + 1]) % 2
                psi_sign = -1 if (psi.sdeg % 2 and mid) else 1
                for t in range(s, k + 1):
                    seg = word[s + 1: t + 1]
                    for g_mid, c_mid in psi.apply(seg).items():
                        if seg == () and cat.src(g_mid) != cat.tgt(word[s]):
                            continue
                        phi_word = word[j + 1: s + 1] + (g_mid,) + word[t + 1:] \
                            + word[: i + 1]
                        for g, c in phi.apply(phi_word).items():
                            new = (g,) + word[i + 1: j + 1]
                            _emit(cat, out, new,
                                  (c * c_mid).scale(rot_sign * psi_sign), bound)
    return out


def connes_B(cat: AInfCategory, word, max_slots=None) -> dict:
    """Rotation with unit insertion; lands in the reduced complex."""
    bound = max_slots or cat.max_slots
    k = len(word) - 1
    sd = [cat.sdeg(g) for g in word]
    out = {}
    for i in range(0, k + 1):
        front = sum(sd[: i + 1]) % 2
        back = sum(sd[i + 1:]) % 2
        sign = -1 if (front and back) else 1
        obj = cat.src(word[(i + 1) % (k + 1)])
        unit = cat.units[obj]
        new = (unit,) + word[i + 1:] + word[: i + 1]
        _emit(cat, out, new, cat.ring.one().scale(sign), bound)
    return out


def connes_B1(phi: Cochain, cat: AInfCategory, word, max_slots=None) -> dict:
    bound = max_slots or cat.max_slots
    k = len(word) - 1
    sd = [cat.sdeg(g) for g in word]
    out = {}
    for i in range(0, k + 1):
        front = sum(sd[: i + 1]) % 2
        back = sum(sd[i + 1:]) % 2
        sign1 = -1 if (front and back) else 1
        for j in range(i, k + 1):
            mid = sum(sd[i + 1: j + 1]) % 2
            sign2 = -1 if (phi.sdeg % 2 and mid) else 1
            for s in range(j, k + 1):
                seg = word[j + 1: s + 1]
                for g, c in phi.apply(seg).items():
                    if seg == () and cat.src(g) != cat.tgt(word[j]):
                        continue
                    body = word[i + 1: j + 1] + (g,) + word[s + 1:] + word[: i + 1]
                    unit = cat.units[cat.src(body[0])]
                    new = (unit,) + body
                    _emit(cat, out, new, c.scale(sign1 * sign2), bound)
    return out


def hoch_b(cat: AInfCategory, word, max_slots=None, use_deformation=False) -> dict:
    return lie(cat.total_structure() if use_deformation else cat.m,
               cat, word, max_slots)


def b1(cat: AInfCategory, phi: Cochain, word, max_slots=None,
       use_deformation=False) -> dict:
    return rho(cat.total_structure() if use_deformation else cat.m,
               phi, cat, word, max_slots)


def chain_apply(opfn, vec: dict) -> dict:
    out = {}
    for word, c in vec.items():
        for w2, s in opfn(word).items():
            add_into(out, w2, s * c)
    return out


def chain_op(cat: AInfCategory, opfn, words, degree=0) -> LinOp:
    """Materialize a word-level operator as a sparse matrix on given words."""
    cols = {}
    for w in words:
        col = opfn(w)
        if col:
            cols[w] = col
    return LinOp(cat.ring, cols, degree=degree)


# ---------------------------------------------------------------------------
# structure checks
# ---------------------------------------------------------------------------
def ainf_check(cat: AInfCategory) -> Report:
    """Strict unit axioms, the squared structure map, and (when present) the
    deformation's flatness equation with its energy gap."""
    rep = Report(f"ainf:{cat.name}")
    m = cat.m
    if m is None:
        raise ValueError("category has no structure cochain")
    if m.sdeg != 1:
        rep.record("structure-degree", {"sdeg": f"{m.sdeg}"})
    sq = circ(m, m)
    rep.record("m-square", _cochain_residual(sq))
    # strict unitality
    for X, u in cat.units.items():
        for g in sorted(cat.gens):
            if cat.src(g) == X:
                lhs = m.apply((u, g))
                rhs = m.apply((g, cat.units[cat.tgt(g)]))
                sign = -1 if cat.deg(g) % 2 else 1
                diff = _merge(lhs, {h: s.scale(-sign) for h, s in rhs.items()})
                rep.record(("unit-sym", g), {h: str(s) for h, s in diff.items()})
    for (k, w), out in m.entries.items():
        if k != 2 and any(cat.is_unit(g) for g in w):
            rep.record(("unit-vanish", k, w), {h: str(s) for h, s in out.items()})
    if cat.m_plus is not None:
        mp = cat.m_plus
        if not mp.norm().lt_one():
            rep.record("deformation-norm", {"norm": repr(mp.norm())})
        for key, out in mp.entries.items():
            for g, s in out.items():
                if any(term[0] <= 0 for term, _ in s.terms):
                    rep.record(("deformation-gap", key), {g: str(s)})
        curv = delta(cat, mp) + circ(mp, mp)
        rep.record("deformation-flatness", _cochain_residual(curv))
    return rep


def _cochain_residual(c: Cochain) -> dict:
    return {(k, w, g): str(s) for (k, w), out in c.entries.items()
            for g, s in out.items()}


# ---------------------------------------------------------------------------
# shipped categories
# ---------------------------------------------------------------------------
def trivial_category(ring: Ring, max_slots=6) -> AInfCategory:
    """One object, hom spanned by its unit."""
    cat = AInfCategory(ring, ["*"], {"1": ("*", "*", 0)}, {"*": "1"},
                       name="trivial", max_slots=max_slots)
    cat.set_structure({(2, ("1", "1")): {"1": ring.one()}})
    return cat


def dual_numbers_category(ring: Ring, x_degree=2, max_slots=6) -> AInfCategory:
    """One object with hom Q[x]/(x^2), x in even degree; binary product only."""
    if x_degree % 2:
        raise ValueError("the nilpotent generator must sit in even degree")
    gens = {"1": ("*", "*", 0), "x": ("*", "*", x_degree)}
    cat = AInfCategory(ring, ["*"], gens, {"*": "1"}, name="dual-numbers",
                       max_slots=max_slots)
    one = ring.one()
    # m2(a, b) = (-1)^{|a|} a.b with x.x = 0
    cat.set_structure({
        (2, ("1", "1")): {"1": one},
        (2, ("1", "x")): {"x": one},
        (2, ("x", "1")): {"x": one},
    })
    return cat


def two_object_category(ring: Ring, arrow_degree=1, max_slots=6) -> AInfCategory:
    """Two objects with a single arrow between them."""
    gens = {
        "1P": ("P", "P", 0),
        "1Q": ("Q", "Q", 0),
        "a": ("P", "Q", arrow_degree),
    }
    cat = AInfCategory(ring, ["P", "Q"], gens, {"P": "1P", "Q": "1Q"},
                       name="two-object", max_slots=max_slots)
    one = ring.one()
    sign = -1 if arrow_degree % 2 else 1
    cat.set_structure({
        (2, ("1P", "1P")): {"1P": one},
        (2, ("1Q", "1Q")): {"1Q": one},
        (2, ("1P", "a")): {"a": one},
        (2, ("a", "1Q")): {"a": one.scale(sign)},
    })
    return cat


SHIPPED_CATEGORIES = {
    "trivial": trivial_category,
    "dual-numbers": dual_numbers_category,
    "two-object": two_object_category,
}


# ---------------------------------------------------------------------------
# random cochains and the identity suite
# ---------------------------------------------------------------------------
def random_homogeneous_cochain(cat: AInfCategory, rnd, max_arity=3) -> Cochain:
    """Seeded random reduced cochain concentrated in one shifted degree."""
    by_sdeg = {}
    for _name, k, w, g in basis_cochains(cat, max_arity):
        c = elementary_cochain(cat, k, w, g)
        by_sdeg.setdefault(c.sdeg, []).append(c)
    d = rnd.choice(sorted(by_sdeg))
    out = None
    for c in by_sdeg[d]:
        q = Fraction(rnd.randint(-2, 2))
        if q:
            out = c.scale(q) if out is None else out + c.scale(q)
    return out if out is not None else by_sdeg[d][0].scale(0)


def _vadd(a: dict, b: dict, s=1) -> dict:
    out = dict(a)
    for k, v in b.items():
        add_into(out, k, v.scale(s))
    return out


def _comm(op1, d1, op2, d2):
    """Graded commutator of word-level chain operators."""
    sign = -1 if (d1 % 2 and d2 % 2) else 1

    def c(w):
        out = chain_apply(op1, op2(w))
        for k, v in chain_apply(op2, op1(w)).items():
            add_into(out, k, v.scale(-sign))
        return out

    return c


def identity_suite(cat: AInfCategory, trials=50, seed=0, max_arity=3,
                   safe_slots=None) -> Report:
    """Evaluate the operator identities of the Hochschild calculus on seeded
    random cochain tuples, with the two brace-expansion cross-checks.

    Inputs are restricted to words short enough that no truncation can touch
    the residuals (two rotation operators may lengthen a word).
    """
    from . import brace

    rnd = _random(seed)
    W = cat.max_slots
    safe = safe_slots if safe_slots is not None else W - 2
    words = cat.chain_words(safe)
    rep = Report(f"hoch-identities:{cat.name}",
                 window={"max_slots": W, "safe_slots": safe, "trials": trials,
                         "seed": seed})
    B = lambda w: connes_B(cat, w, W)
    b = lambda w: hoch_b(cat, w, W)

    def zero_on(label, op):
        for w in words:
            res = op(w)
            rep.record((label, w), res)
            if res and any(res.values()):
                return

    zero_on(("eq-6.1", "-"), _comm(B, 1, B, 1))
    for t in range(trials):
        p1 = random_homogeneous_cochain(cat, rnd, max_arity)
        p2 = random_homogeneous_cochain(cat, rnd, max_arity)
        ps = random_homogeneous_cochain(cat, rnd, max_arity)
        L1 = lambda w: lie(p1, cat, w, W)
        L2 = lambda w: lie(p2, cat, w, W)
        R12 = lambda w: rho(p1, p2, cat, w, W)
        R1s = lambda w: rho(p1, ps, cat, w, W)
        R2s = lambda w: rho(p2, ps, cat, w, W)
        B1_1 = lambda w: connes_B1(p1, cat, w, W)
        B1_s = lambda w: connes_B1(ps, cat, w, W)
        b1_s = lambda w: b1(cat, ps, w, W)
        s12 = -1 if (p1.sdeg % 2 and p2.sdeg % 2) else 1
        s1 = -1 if p1.sdeg % 2 else 1

        # graded Jacobi for the cochain bracket
        jac = cbracket(cbracket(p1, p2), ps) - cbracket(p1, cbracket(p2, ps)) \
            + cbracket(p2, cbracket(p1, ps)).scale(s12)
        rep.record(("prop-6.1-jacobi", t), _cochain_residual(jac))

        # Lie module property
        br12 = cbracket(p1, p2)
        def lie_mod(w):
            out = lie(br12, cat, w, W)
            return _vadd(out, _comm(L1, p1.sdeg, L2, p2.sdeg)(w), -1)
        zero_on(("prop-6.1-module", t), lie_mod)

        # contraction coherence
        def prop62(w):
            out = rho(cbracket(p1, p2), ps, cat, w, W)
            out = _vadd(out, rho(p1, cbracket(p2, ps), cat, w, W), -1)
            out = _vadd(out, rho(p2, cbracket(p1, ps), cat, w, W), s12)
            out = _vadd(out, _comm(L1, p1.sdeg, R2s, p2.sdeg + ps.sdeg)(w), -1)
            out = _vadd(out, _comm(L2, p2.sdeg, R1s, p1.sdeg + ps.sdeg)(w), s12)
            return out
        zero_on(("prop-6.2", t), prop62)

        # rotation versus contraction
        def prop64(w):
            out = _comm(B, 1, R1s, p1.sdeg + ps.sdeg)(w)
            out = _vadd(out, connes_B1(cbracket(p1, ps), cat, w, W))
            out = _vadd(out, _comm(L1, p1.sdeg, B1_s, ps.sdeg + 1)(w), -s1)
            return out
        zero_on(("prop-6.4", t), prop64)

        zero_on(("eq-6.2", t), _comm(B, 1, L1, p1.sdeg))
        zero_on(("eq-6.3", t), _comm(B, 1, B1_1, p1.sdeg + 1))

        dp1, dps = delta(cat, p1), delta(cat, ps)
        def eq64(w):
            out = rho(dp1, ps, cat, w, W)
            out = _vadd(out, b1(cat, cbracket(p1, ps), w, W), -1)
            out = _vadd(out, rho(p1, dps, cat, w, W), s1)
            out = _vadd(out, _comm(b, 1, R1s, p1.sdeg + ps.sdeg)(w), -1)
            out = _vadd(out, _comm(L1, p1.sdeg, b1_s, ps.sdeg + 1)(w), s1)
            return out
        zero_on(("eq-6.4", t), eq64)

        def eq65(w):
            out = b1(cat, dps, w, W)
            return _vadd(out, _comm(b, 1, b1_s, ps.sdeg + 1)(w))
        zero_on(("eq-6.5", t), eq65)

        def eq66(w):
            out = _comm(B, 1, lambda u: b1(cat, p1, u, W), p1.sdeg + 1)(w)
            out = _vadd(out, _comm(b, 1, B1_1, p1.sdeg + 1)(w))
            out = _vadd(out, connes_B1(dp1, cat, w, W))
            out = _vadd(out, lie(p1, cat, w, W))
            return out
        zero_on(("eq-6.6", t), eq66)

        # brace-expansion cross-checks
        bind = {"f1": p1, "f2": p2, "ps": ps}
        exA1 = brace.parse("{f1{f2{ps, in}}}")
        exA2 = brace.parse("{f2{f1{ps, in}}}")
        def lemmaA(w):
            lhs = rho(circ(p1, p2), ps, cat, w, W)
            lhs = _vadd(lhs, rho(p1, cbracket(p2, ps), cat, w, W), -1)
            lhs = _vadd(lhs, _comm(L2, p2.sdeg, R1s, p1.sdeg + ps.sdeg)(w), s12)
            rhs = _vadd(brace.eval_chain(exA1, bind, cat, w, W),
                        brace.eval_chain(exA2, bind, cat, w, W), s12)
            return _vadd(lhs, rhs, -1)
        zero_on(("brace-lemma-a", t), lemmaA)

        exB1 = brace.parse("{one, f1{ps, in}}")
        exB2 = brace.parse("{one, f1{ps}, in}")
        exB3 = brace.parse("{one, ps{f1}, in}")
        s1s = -1 if (p1.sdeg % 2 and ps.sdeg % 2) else 1
        def lemmaB(w):
            lhs = _comm(L1, p1.sdeg, B1_s, ps.sdeg + 1)(w)
            lhs = {k: v.scale(s1) for k, v in lhs.items()}
            rhs = _vadd(brace.eval_chain(exB1, bind, cat, w, W),
                        brace.eval_chain(exB2, bind, cat, w, W))
            rhs = _vadd(rhs, brace.eval_chain(exB3, bind, cat, w, W), -s1s)
            return _vadd(lhs, rhs, -1)
        zero_on(("brace-lemma-b", t), lemmaB)
    return rep


def _random(seed):
    import random

    return random.Random(seed)


# ---------------------------------------------------------------------------
# assembling the Cartan-homotopy module of a category
# ---------------------------------------------------------------------------
def cochain_to_coords(cat: AInfCategory, c: Cochain, names: dict) -> dict:
    """Expand an explicit cochain in the elementary reduced basis; entries on
    unit-carrying words must have cancelled, and the carrier must be wide
    enough, else this raises."""
    out = {}
    for (k, w), vec in c.entries.items():
        if any(cat.is_unit(g) for g in w):
            raise ValueError(f"unit-slot entry survives at {w}: not reduced")
        for g, s in vec.items():
            key = (k, w, g)
            if key not in names:
                raise ValueError(f"carrier too small for entry {key}")
            out[names[key]] = s
    return out


def hochschild_dgla(cat: AInfCategory, carrier_arity: int,
                    use_deformation=False) -> LInf:
    """The reduced-cochain bracket algebra on an elementary basis up to the
    carrier arity, with lazily expanded structure maps."""
    basis = basis_cochains(cat, carrier_arity)
    gens = []
    names = {}
    cochains = {}
    for name, k, w, g in basis:
        c = elementary_cochain(cat, k, w, g)
        gens.append((name, c.sdeg))
        names[(k, w, g)] = name
        cochains[name] = c
    gb = GradedBasis(gens)
    space = Space({n: d - 1 for n, d in gens})
    arities = {name: k for name, k, _w, _g in basis}

    def maps(k, word):
        if k == 1:
            img = delta(cat, cochains[word[0]], use_deformation=use_deformation)
            return cochain_to_coords(cat, img.scale(-1), names)
        if k == 2:
            c1, c2 = cochains[word[0]], cochains[word[1]]
            sign = -1 if c1.sdeg % 2 else 1
            img = cbracket(c1, c2).scale(sign)
            return cochain_to_coords(cat, img, names)
        return {}

    ring = cat.ring
    L = LInf(ring, gb, MultiMap(space, 1, ring, func=maps, max_arity=2))
    L.cochains = cochains
    L.coord_names = names
    L.arities = arities
    return L


def arity_slot_filter(chm, max_arity: int):
    """Restrict generic word enumeration to low-arity cochain slots, leaving
    the carrier headroom for bracket outputs."""
    arities = chm.L.arities

    def keep(slot):
        return arities[slot[1]] <= max_arity

    return keep


def assemble_hochschild_ch(cat: AInfCategory, carrier_arity=4, word_slots=None,
                           use_deformation=False, check=False) -> CHModule:
    """The cyclic-word module over the cochain bracket algebra, with
    differential b + zB and contraction b1 + zB1."""
    from .chmod import assemble_from_dgla

    rep = ainf_check(cat)
    if not rep.passed:
        raise ValueError(f"category fails its structure check: {rep.failures[:2]}")
    W = word_slots or cat.max_slots
    L = hochschild_dgla(cat, carrier_arity, use_deformation=use_deformation)
    ring = cat.ring
    words = cat.chain_words(W)
    mbasis = GradedBasis([(w, cat.word_sdeg(w) + 1) for w in words])
    zs = ring.z(1)

    def d_col(w):
        col = hoch_b(cat, w, W, use_deformation=use_deformation)
        return _vadd(col, {k: zs * v for k, v in connes_B(cat, w, W).items()})

    d = LinOp(ring, {w: d_col(w) for w in words}, degree=1)

    def L_op(name):
        phi = L.cochains[name]
        return chain_op(cat, lambda w: lie(phi, cat, w, W), words, degree=phi.sdeg)

    def I_op(name):
        phi = L.cochains[name]

        def col(w):
            out = b1(cat, phi, w, W, use_deformation=use_deformation)
            return _vadd(out, {k: zs * v
                               for k, v in connes_B1(phi, cat, w, W).items()})

        return chain_op(cat, col, words, degree=phi.sdeg + 1)

    def rho_op(n1, n2):
        phi, psi = L.cochains[n1], L.cochains[n2]
        return chain_op(cat, lambda w: rho(phi, psi, cat, w, W), words,
                        degree=phi.sdeg + psi.sdeg)

    chm = assemble_from_dgla(ring, L, mbasis, d, _memo1(L_op), _memo1(I_op),
                             _memo2(rho_op), check=check)
    chm.category = cat
    chm.word_slots = W
    return chm


def _memo1(fn):
    cache = {}

    def wrapped(x):
        if x not in cache:
            cache[x] = fn(x)
        return cache[x]

    return wrapped


def _memo2(fn):
    cache = {}

    def wrapped(x, y):
        if (x, y) not in cache:
            cache[(x, y)] = fn(x, y)
        return cache[(x, y)]

    return wrapped


def hochschild_ch_relations(cat: AInfCategory, arity_bound=3, word_slots=None,
                            pairs_only=False) -> Report:
    """The three operator relations for the assembled module, with explicit
    cochain subscripts (no carrier bound), quantified over the elementary
    basis up to the arity bound."""
    W = word_slots or cat.max_slots
    ring = cat.ring
    words = cat.chain_words(W)
    safe = [w for w in words if len(w) <= W - 2]
    zs = ring.z(1)

    def d_fn(w):
        return _vadd(hoch_b(cat, w, W),
                     {k: zs * v for k, v in connes_B(cat, w, W).items()})

    def I_fn(phi):
        def col(w):
            return _vadd(b1(cat, phi, w, W),
                         {k: zs * v for k, v in connes_B1(phi, cat, w, W).items()})
        return col

    def L_fn(phi):
        return lambda w: lie(phi, cat, w, W)

    def rho_fn(phi, psi):
        return lambda w: rho(phi, psi, cat, w, W)

    basis = [elementary_cochain(cat, k, w, g)
             for _n, k, w, g in basis_cochains(cat, arity_bound)]
    rep = Report(f"ch-relations:{cat.name}",
                 window={"max_slots": W, "safe_slots": W - 2,
                         "arity_bound": arity_bound})

    def zero_on(label, op):
        for w in safe:
            res = op(w)
            rep.record((label, w), res)
            if res and any(res.values()):
                return

    for i1, y in enumerate(basis):
        dy = delta(cat, y)
        def rel34(w, y=y, dy=dy):
            out = _comm(d_fn, 1, I_fn(y), y.sdeg + 1)(w)
            out = _vadd(out, I_fn(dy)(w))
            out = _vadd(out, {k: zs * v for k, v in lie(y, cat, w, W).items()})
            return out
        zero_on(("3.4", i1), rel34)
    for i1, y1 in enumerate(basis):
        s1 = -1 if y1.sdeg % 2 else 1
        dy1 = delta(cat, y1)
        for i2, y2 in enumerate(basis):
            br = cbracket(y1, y2)
            dy2 = delta(cat, y2)
            def rel35(w, y1=y1, y2=y2, br=br, dy1=dy1, dy2=dy2, s1=s1):
                out = I_fn(br)(w)
                out = _vadd(out, _comm(L_fn(y1), y1.sdeg, I_fn(y2), y2.sdeg + 1)(w), -s1)
                out = _vadd(out, _comm(d_fn, 1, rho_fn(y1, y2), y1.sdeg + y2.sdeg)(w))
                out = _vadd(out, rho_fn(dy1, y2)(w), -1)
                out = _vadd(out, rho_fn(y1, dy2)(w), -s1)
                return out
            zero_on(("3.5", i1, i2), rel35)
    if not pairs_only:
        for i1, y1 in enumerate(basis):
            for i2, y2 in enumerate(basis):
                s12 = -1 if (y1.sdeg % 2 and y2.sdeg % 2) else 1
                br12 = cbracket(y1, y2)
                for i3, y3 in enumerate(basis):
                    def rel36(w, y1=y1, y2=y2, y3=y3, br12=br12, s12=s12):
                        out = rho_fn(br12, y3)(w)
                        out = _vadd(out, rho_fn(y1, cbracket(y2, y3))(w), -1)
                        out = _vadd(out, rho_fn(y2, cbracket(y1, y3))(w), s12)
                        out = _vadd(out, _comm(L_fn(y1), y1.sdeg, rho_fn(y2, y3),
                                               y2.sdeg + y3.sdeg)(w), -1)
                        out = _vadd(out, _comm(L_fn(y2), y2.sdeg, rho_fn(y1, y3),
                                               y1.sdeg + y3.sdeg)(w), s12)
                        return out
                    zero_on(("3.6", i1, i2, i3), rel36)
    return rep


def safe_word_filter(chm, margin=2):
    """Module slots short enough that rotation operators cannot be truncated."""
    W = chm.word_slots

    def keep(m):
        return len(m) <= W - margin

    return keep


def check_hochschild_depth(chm, n=2, word_bound=3, enum_arity=2) -> "Report":
    """Generic depth check of the assembled module inside its honest window."""
    from .chmod import check_mod_epsilon

    rep = check_mod_epsilon(chm, n, word_bound,
                            slot_filter=arity_slot_filter(chm, enum_arity),
                            mslot_filter=safe_word_filter(chm))
    rep.window.update({"enum_arity": enum_arity, "word_slots": chm.word_slots,
                       "module_margin": 2})
    return rep
