"""Cofree-coalgebra calculus: extending symmetric map families to
coderivations, coalgebra morphisms, module coderivations and comodule
morphisms, plus the structural verifiers built on those expansions.

Elements of symmetric powers are dicts {word: Scalar}; words are sorted slot
tuples.  Module-carrying elements are dicts {(word, mgen): Scalar}.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

from .coeff import Ring, Scalar
from .graded import canonical_word, koszul_sign, shuffles


class Space:
    """A slot alphabet with degrees: the shifted basis a word machine runs on."""

    def __init__(self, degrees: dict):
        self.degrees = dict(degrees)

    def deg(self, slot) -> int:
        return self.degrees[slot]

    def slots(self):
        return sorted(self.degrees, key=repr)

    def words(self, max_len, min_len=0, predicate=None):
        """Canonical symmetric basis words up to max_len (odd repeats skipped)."""
        slots = self.slots()
        for k in range(min_len, max_len + 1):
            for combo in itertools.combinations_with_replacement(slots, k):
                degs = [self.deg(s) for s in combo]
                _, sign = canonical_word(combo, degs)
                if sign == 0:
                    continue
                if predicate is None or predicate(combo):
                    yield combo


def add_into(acc: dict, key, s: Scalar):
    if not s:
        return
    if key in acc:
        tot = acc[key] + s
        if tot:
            acc[key] = tot
        else:
            del acc[key]
    else:
        acc[key] = s


def scale_vec(vec: dict, q) -> dict:
    return {k: s.scale(q) for k, s in vec.items()}


def combine(*vecs) -> dict:
    out = {}
    for v in vecs:
        for k, s in v.items():
            add_into(out, k, s)
    return out


class MultiMap:
    """A sparse graded symmetric multilinear map family.

    `degree` is the declared operator degree (1 for bracket-type, 0 for
    morphism-type).  `table[k]` maps canonical input words to output vectors;
    `func(k, word)` is an optional lazy backing used where tables would be
    awkward.  Module-style families take words (slots, mgen) and return
    {mgen: Scalar} vectors.
    """

    def __init__(self, space: Space, degree: int, ring: Ring, table=None, func=None,
                 max_arity=None, module=False, mspace: Space | None = None,
                 min_arity=None):
        self.space = space
        self.degree = degree
        self.ring = ring
        self.table = {int(k): dict(v) for k, v in (table or {}).items()}
        self.func = func
        self.module = module
        self.mspace = mspace
        if max_arity is None:
            if func is not None:
                raise ValueError("func-backed families need an explicit max_arity")
            max_arity = max(self.table, default=0)
        self.max_arity = max_arity
        self.min_arity = min_arity if min_arity is not None else (0 if module else 1)
        self._cache = {}

    def canonical(self, slots):
        degs = [self.space.deg(s) for s in slots]
        return canonical_word(slots, degs)

    def apply(self, slots, mgen=None) -> dict:
        """Evaluate on a basis word (any slot order); returns an output vector."""
        k = len(slots)
        if k < self.min_arity or k > self.max_arity:
            return {}
        word, sign = self.canonical(slots)
        if sign == 0:
            return {}
        key = (word, mgen) if self.module else word
        if k in self.table and key in self.table[k]:
            out = self.table[k][key]
        elif self.func is not None:
            if key in self._cache:
                out = self._cache[key]
            else:
                out = self.func(k, word, mgen) if self.module else self.func(k, word)
                self._cache[key] = out
        else:
            out = {}
        return out if sign == 1 else scale_vec(out, -1)

    def entry_words(self):
        for k in sorted(self.table):
            for key in sorted(self.table[k], key=repr):
                yield key


# ---------------------------------------------------------------------------
# extensions
# ---------------------------------------------------------------------------
def hat_extend(maps: MultiMap):
    """Coderivation extension of a degree-1 family on symmetric words."""
    if maps.degree != 1:
        raise ValueError("coderivation extension needs a degree-1 family")
    space = maps.space

    def act(word) -> dict:
        k = len(word)
        degs = [space.deg(s) for s in word]
        out = {}
        for p in range(1, min(k, maps.max_arity) + 1):
            for perm in shuffles(p, k - p):
                sign = koszul_sign(perm, degs)
                if sign == 0:
                    continue
                head = [word[i] for i in perm[:p]]
                rest = tuple(word[i] for i in perm[p:])
                img = maps.apply(tuple(head))
                for g, s in img.items():
                    new, csign = canonical_word((g,) + rest,
                                                [space.deg(g)] + [space.deg(r) for r in rest])
                    if csign == 0:
                        continue
                    add_into(out, new, s.scale(sign * csign))
        return out

    return act


def exp_extend(maps: MultiMap, out_space: Space | None = None):
    """Coalgebra-morphism extension of a degree-0 family."""
    if maps.degree != 0:
        raise ValueError("coalgebra-morphism extension needs a degree-0 family")
    space = maps.space
    out_space = out_space or space

    def act(word) -> dict:
        k = len(word)
        degs = [space.deg(s) for s in word]
        if k == 0:
            return {(): maps.ring.one()}
        out = {}
        for sizes in _compositions(k, maps.max_arity):
            coeff = Fraction(1, _fact(len(sizes)))
            for perm in shuffles(*sizes):
                sign = koszul_sign(perm, degs)
                if sign == 0:
                    continue
                pos = 0
                factors = []
                for b in sizes:
                    factors.append(tuple(word[i] for i in perm[pos:pos + b]))
                    pos += b
                for slots, s in _product_images(maps, factors):
                    new, csign = canonical_word(slots, [out_space.deg(g) for g in slots])
                    if csign == 0:
                        continue
                    add_into(out, new, s.scale(sign * csign * coeff))
        return out

    return act


def _fact(l: int) -> int:
    f = 1
    for i in range(2, l + 1):
        f *= i
    return f


def _compositions(k, max_part):
    """Ordered compositions of k into parts of size 1..max_part."""
    if k == 0:
        yield ()
        return
    for first in range(1, min(k, max_part) + 1):
        for rest in _compositions(k - first, max_part):
            yield (first,) + rest


def _product_images(maps: MultiMap, factors):
    """Cartesian expansion of f(block_1) (.) ... (.) f(block_l)."""
    outs = []

    def rec(i, slots, scalar):
        if i == len(factors):
            outs.append((slots, scalar))
            return
        for g, s in maps.apply(factors[i]).items():
            rec(i + 1, slots + (g,), s if scalar is None else scalar * s)

    rec(0, (), None)
    for slots, s in outs:
        if s is not None and s:
            yield slots, s


def module_coderivation(alg_maps: MultiMap, mod_maps: MultiMap):
    """Coderivation on EL (x) M[1] from an algebra family and a module family.

    The module-map sum carries the extra sign (-1)^{deg(mod_maps) * (head
    degrees)} relative to the plain Koszul sign.
    """
    if mod_maps.degree % 2 != 1:
        raise ValueError("module coderivations need an odd module family")
    space = alg_maps.space

    def act(word, mgen) -> dict:
        k = len(word)
        degs = [space.deg(s) for s in word]
        out = {}
        # algebra-side insertions, leaving the module slot alone
        for p in range(1, min(k, alg_maps.max_arity) + 1):
            for perm in shuffles(p, k - p):
                sign = koszul_sign(perm, degs)
                if sign == 0:
                    continue
                head = tuple(word[i] for i in perm[:p])
                rest = tuple(word[i] for i in perm[p:])
                for g, s in alg_maps.apply(head).items():
                    new, csign = canonical_word((g,) + rest,
                                                [space.deg(g)] + [space.deg(r) for r in rest])
                    if csign == 0:
                        continue
                    add_into(out, (new, mgen), s.scale(sign * csign))
        # module-side applications
        for q in range(min(k, mod_maps.max_arity) + 1):
            p = k - q
            for perm in shuffles(p, q):
                sign = koszul_sign(perm, degs)
                if sign == 0:
                    continue
                head = tuple(word[i] for i in perm[:p])
                tail = tuple(word[i] for i in perm[p:])
                if sum(space.deg(word[i]) for i in perm[:p]) % 2:
                    sign = -sign
                new, csign = canonical_word(head, [space.deg(h) for h in head])
                if csign == 0:
                    continue
                for m2, s in mod_maps.apply(tail, mgen).items():
                    add_into(out, (new, m2), s.scale(sign * csign))
        return out

    return act


def comodule_morphism(f_maps: MultiMap):
    """Comodule-morphism extension of a degree-0 module family."""
    if f_maps.degree != 0:
        raise ValueError("comodule morphisms need a degree-0 family")
    space = f_maps.space

    def act(word, mgen) -> dict:
        k = len(word)
        degs = [space.deg(s) for s in word]
        out = {}
        for q in range(min(k, f_maps.max_arity) + 1):
            p = k - q
            for perm in shuffles(p, q):
                sign = koszul_sign(perm, degs)
                if sign == 0:
                    continue
                head = tuple(word[i] for i in perm[:p])
                tail = tuple(word[i] for i in perm[p:])
                new, csign = canonical_word(head, [space.deg(h) for h in head])
                if csign == 0:
                    continue
                for m2, s in f_maps.apply(tail, mgen).items():
                    add_into(out, (new, m2), s.scale(sign * csign))
        return out

    return act


def counit_component(vec: dict) -> dict:
    """Extract the word-length-zero part of a module-carrying vector."""
    out = {}
    for (word, mgen), s in vec.items():
        if len(word) == 0:
            add_into(out, mgen, s)
    return out


# ---------------------------------------------------------------------------
# structural verification
# ---------------------------------------------------------------------------
class Report:
    """Outcome of an identity check: named failures with machine residuals."""

    def __init__(self, name, window=None):
        self.name = name
        self.window = window or {}
        self.failures = []
        self.checked = 0

    def record(self, label, residual):
        self.checked += 1
        if _residual_nonzero(residual):
            self.failures.append((label, residual))

    @property
    def passed(self):
        return not self.failures

    def as_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "window": self.window,
            "failures": [
                {"input": repr(label), "residual": _residual_repr(res)}
                for label, res in self.failures
            ],
        }

    def __repr__(self):
        status = "pass" if self.passed else f"FAIL({len(self.failures)})"
        return f"Report({self.name}: {status}, checked={self.checked})"


def _residual_nonzero(res):
    if isinstance(res, dict):
        return any(bool(s) for s in res.values())
    return bool(res)


def _residual_repr(res):
    if isinstance(res, dict):
        return {repr(k): str(s) for k, s in sorted(res.items(), key=lambda p: repr(p[0])) if s}
    return str(res)


def verify_algebra(space: Space, maps: MultiMap, word_bound: int,
                   name="linf-algebra") -> Report:
    """Coderivation square vanishes on all basis words up to the bound."""
    hat = hat_extend(maps)
    rep = Report(name, window={"word_bound": word_bound})
    for w in space.words(word_bound, min_len=1):
        first = hat(w)
        residual = {}
        for w2, s in first.items():
            for w3, s2 in hat(w2).items():
                add_into(residual, w3, s2 * s)
        rep.record(w, residual)
    return rep


def verify_morphism(maps_src: MultiMap, maps_dst: MultiMap, f: MultiMap,
                    word_bound: int, out_space: Space | None = None,
                    name="linf-morphism") -> Report:
    hat_src = hat_extend(maps_src)
    hat_dst = hat_extend(maps_dst)
    ef = exp_extend(f, out_space=out_space or maps_dst.space)
    rep = Report(name, window={"word_bound": word_bound})
    for w in maps_src.space.words(word_bound, min_len=1):
        lhs = {}
        for w2, s in ef(w).items():
            for w3, s2 in hat_dst(w2).items():
                add_into(lhs, w3, s2 * s)
        for w2, s in hat_src(w).items():
            for w3, s2 in ef(w2).items():
                add_into(lhs, w3, (s2 * s).scale(-1))
        rep.record(w, lhs)
    return rep


def verify_module(alg_maps: MultiMap, mod_maps: MultiMap, mspace: Space,
                  word_bound: int, eps_filter=None, counit_only=False,
                  mslot_filter=None, name="linf-module") -> Report:
    """Square of the module coderivation on (word | m) inputs.

    With counit_only, only the word-length-zero component of the square is
    required to vanish (used for the filtration-truncated checks, where
    eps_filter restricts which basis words are quantified over and
    mslot_filter keeps module slots inside the validity window).
    """
    act = module_coderivation(alg_maps, mod_maps)
    rep = Report(name, window={"word_bound": word_bound})
    mslots = [m for m in mspace.slots() if mslot_filter is None or mslot_filter(m)]
    for w in alg_maps.space.words(word_bound, predicate=eps_filter):
        for m in mslots:
            first = act(w, m)
            sq = {}
            for (w2, m2), s in first.items():
                for key, s2 in act(w2, m2).items():
                    add_into(sq, key, s2 * s)
            residual = counit_component(sq) if counit_only else sq
            rep.record((w, m), residual)
    return rep


def verify_module_morphism(alg_maps: MultiMap, mod_src: MultiMap, mod_dst: MultiMap,
                           f: MultiMap, mspace_src: Space, word_bound: int,
                           eps_filter=None, counit_only=False,
                           name="module-morphism") -> Report:
    act_src = module_coderivation(alg_maps, mod_src)
    act_dst = module_coderivation(alg_maps, mod_dst)
    fcheck = comodule_morphism(f)
    rep = Report(name, window={"word_bound": word_bound})
    for w in alg_maps.space.words(word_bound, predicate=eps_filter):
        for m in mspace_src.slots():
            lhs = {}
            for (w2, m2), s in fcheck(w, m).items():
                for key, s2 in act_dst(w2, m2).items():
                    add_into(lhs, key, s2 * s)
            for (w2, m2), s in act_src(w, m).items():
                for key, s2 in fcheck(w2, m2).items():
                    add_into(lhs, key, (s2 * s).scale(-1))
            residual = counit_component(lhs) if counit_only else lhs
            rep.record((w, m), residual)
    return rep


def extract_components(act, space: Space, mspace: Space, max_arity: int,
                       degree: int, ring: Ring, module=True) -> MultiMap:
    """Counit extraction: recover the map family of a coderivation/morphism."""
    table = {}
    for k in range(max_arity + 1):
        tab = {}
        for w in space.words(k, min_len=k):
            for m in mspace.slots():
                out = counit_component(act(w, m))
                if out:
                    tab[(w, m)] = out
        if tab:
            table[k] = tab
    return MultiMap(space, degree, ring, table=table, module=True, mspace=mspace,
                    max_arity=max_arity, min_arity=0)


def restrict_module(f: MultiMap, alg_src: MultiMap, alg_dst: MultiMap,
                    mod_maps: MultiMap, max_arity: int) -> MultiMap:
    """Pull an L-infinity module structure back along a morphism f: L -> L'.

    Components of (e^{-f} (x) id) o lhat^M o (e^f (x) id), extracted lazily.
    """
    ef = exp_extend(f, out_space=alg_dst.space)
    neg_table = {}
    for k in range(1, f.max_arity + 1):
        tab = {}
        for w in f.space.words(k, min_len=k):
            img = f.apply(w)
            if img:
                tab[w] = scale_vec(img, -1)
        if tab:
            neg_table[k] = tab
    negf = MultiMap(f.space, 0, f.ring, table=neg_table, max_arity=f.max_arity)
    enegf = exp_extend(negf, out_space=alg_dst.space)
    act_dst = module_coderivation(alg_dst, mod_maps)

    def component(k, word, mgen):
        pushed = {}
        for w2, s in ef(word).items():
            add_into(pushed, (w2, mgen), s)
        moved = {}
        for (w2, m2), s in pushed.items():
            for key, s2 in act_dst(w2, m2).items():
                add_into(moved, key, s2 * s)
        back = {}
        for (w2, m2), s in moved.items():
            for w3, s2 in enegf(w2).items():
                add_into(back, (w3, m2), s2 * s)
        return counit_component(back)

    return MultiMap(f.space, 1, f.ring, func=component, module=True,
                    mspace=mod_maps.mspace, max_arity=max_arity, min_arity=0)


# ---------------------------------------------------------------------------
# containers and the DGLA packaging
# ---------------------------------------------------------------------------
class LInf:
    """An L-infinity algebra: generators with unshifted degrees plus the
    bracket family on shifted words."""

    def __init__(self, ring: Ring, basis, maps: MultiMap):
        self.ring = ring
        self.basis = basis
        self.maps = maps

    @property
    def space(self) -> Space:
        return self.maps.space

    def verify(self, word_bound=4) -> Report:
        return verify_algebra(self.space, self.maps, word_bound)

    def is_abelian(self) -> bool:
        return self.maps.func is None and not any(self.maps.table.values())


def linf_from_tables(ring: Ring, gens, tables, max_arity=None) -> LInf:
    """Build an L-infinity algebra from {arity: {word: {gen: Scalar}}} tables.

    Words use shifted degrees; table words must be canonical.
    """
    from .graded import GradedBasis

    basis = GradedBasis(gens)
    space = Space({g: d - 1 for g, d in gens})
    maps = MultiMap(space, 1, ring, table=tables, max_arity=max_arity)
    return LInf(ring, basis, maps)


def dgla_to_linf(ring: Ring, gens, delta, bracket) -> LInf:
    """Package (delta, [.,.]) as bracket families: l1 = -delta,
    l2(y1, y2) = (-1)^{|y1|} [y1, y2].

    `delta` maps a generator to an output vector; `bracket(g1, g2)` likewise.
    Both are given on unshifted generators.
    """
    from .graded import GradedBasis

    basis = GradedBasis(gens)
    deg = dict(gens)
    space = Space({g: d - 1 for g, d in gens})
    t1, t2 = {}, {}
    for g in sorted(deg, key=repr):
        img = delta(g) if callable(delta) else delta.get(g, {})
        out = {h: s.scale(-1) for h, s in img.items() if s}
        if out:
            t1[(g,)] = out
    for w in space.words(2, min_len=2):
        g1, g2 = w
        sign = -1 if deg[g1] % 2 else 1
        img = bracket(g1, g2)
        out = {h: s.scale(sign) for h, s in img.items() if s}
        if out:
            t2[w] = out
    tables = {}
    if t1:
        tables[1] = t1
    if t2:
        tables[2] = t2
    return LInf(ring, basis, MultiMap(space, 1, ring, table=tables, max_arity=2))


def dgla_module_to_maps(ring: Ring, linf: LInf, mgens, d, action) -> MultiMap:
    """Package a module over a packaged DGLA: l0^M = -d,
    l1^M(y|m) = (-1)^{|y|} L_y(m), zero beyond.

    `d` and `action(y)` are LinOp-like dicts {mgen: {mgen: Scalar}}.
    """
    mspace = Space({m: dd - 1 for m, dd in mgens})
    table = {0: {}, 1: {}}
    for m in mspace.slots():
        col = d.get(m, {}) if isinstance(d, dict) else d.apply_gen(m)
        out = {h: s.scale(-1) for h, s in col.items() if s}
        if out:
            table[0][((), m)] = out
    for g in linf.space.slots():
        sign = -1 if linf.basis.deg(g) % 2 else 1
        op = action(g)
        for m in mspace.slots():
            col = op.get(m, {}) if isinstance(op, dict) else op.apply_gen(m)
            out = {h: s.scale(sign) for h, s in col.items() if s}
            if out:
                table[1][((g,), m)] = out
    table = {k: v for k, v in table.items() if v}
    return MultiMap(linf.space, 1, ring, table=table, module=True, mspace=mspace,
                    max_arity=max(table, default=0), min_arity=0)
