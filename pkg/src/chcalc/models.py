"""Shipped model structures: a small contraction calculus, hypercommutative
algebras with their quadratic consistency equations, the two-line quantum
product of the projective line, and the flat-connection package built on it.

Every fixture re-validates its defining identities on load; nothing is
trusted from construction.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

from .coeff import Ring, Scalar
from .colang import LInf, MultiMap, Report, Space, add_into, dgla_to_linf, scale_vec
from .chmod import CHModule, assemble_from_dgla, build_cone, eps_count, mc_check
from .conn import ConnectionData, Derivation, GGM, euler_field
from .graded import GradedBasis, LinOp, canonical_word, koszul_sign


# ---------------------------------------------------------------------------
# contraction calculus
# ---------------------------------------------------------------------------
class CalculusData:
    """A graded commutative algebra acting on a module by contraction, with a
    square-zero boundary and Lie data tied together by the usual homotopy
    identities."""

    def __init__(self, ring: Ring, v_gens, w_gens, wedge, bracket, iota, lie, B,
                 name="calculus"):
        self.ring = ring
        self.v = GradedBasis(v_gens)
        self.w = GradedBasis(w_gens)
        self.wedge = wedge          # (g1, g2) sorted -> vec over V
        self.bracket = bracket      # (g1, g2) -> vec over V (may be callable)
        self.iota = iota            # vgen -> LinOp on W
        self.lie = lie              # vgen -> LinOp on W
        self.B = B                  # LinOp on W, degree -1
        self.name = name

    def wedge_vec(self, g1, g2) -> dict:
        key = (g1, g2)
        if key in self.wedge:
            return dict(self.wedge[key])
        sign = -1 if (self.v.deg(g1) % 2 and self.v.deg(g2) % 2) else 1
        rev = self.wedge.get((g2, g1), {})
        return {h: s.scale(sign) for h, s in rev.items()}

    def bracket_vec(self, g1, g2) -> dict:
        if callable(self.bracket):
            return self.bracket(g1, g2)
        if (g1, g2) in self.bracket:
            return dict(self.bracket[(g1, g2)])
        # antisymmetry in the shifted grading
        s1, s2 = self.v.deg(g1) - 1, self.v.deg(g2) - 1
        sign = 1 if (s1 % 2 and s2 % 2) else -1
        rev = self.bracket.get((g2, g1), {})
        return {h: s.scale(sign) for h, s in rev.items()}

    def l_on_w(self, g) -> LinOp:
        sign = 1 if (self.v.deg(g) - 1) % 2 == 0 else -1
        return self.lie[g].scale(sign) if g in self.lie \
            else LinOp.zero(self.ring, degree=self.v.deg(g) + 1)

    def validate(self) -> Report:
        rep = Report(f"calculus:{self.name}")
        ring = self.ring
        vg = list(self.v)
        # commutativity and associativity of the product
        for g1 in vg:
            for g2 in vg:
                lhs = self.wedge_vec(g1, g2)
                sign = -1 if (self.v.deg(g1) % 2 and self.v.deg(g2) % 2) else 1
                rhs = {h: s.scale(sign) for h, s in self.wedge_vec(g2, g1).items()}
                rep.record(("wedge-comm", g1, g2), _vdiff(lhs, rhs))
                for g3 in vg:
                    l = _lin(self, lambda a, b: self.wedge_vec(a, b),
                             self.wedge_vec(g1, g2), g3)
                    r = _lin(self, lambda a, b: self.wedge_vec(b, a),
                             self.wedge_vec(g2, g3), g1)
                    rep.record(("wedge-assoc", g1, g2, g3), _vdiff(l, r))
        # the bracket is a shifted Lie structure
        for g1 in vg:
            s1 = self.v.deg(g1) - 1
            for g2 in vg:
                s2 = self.v.deg(g2) - 1
                lhs = self.bracket_vec(g1, g2)
                sign = -1 if not (s1 % 2 and s2 % 2) else 1
                rhs = {h: s.scale(sign) for h, s in self.bracket_vec(g2, g1).items()}
                rep.record(("bracket-antisym", g1, g2), _vdiff(lhs, rhs))
                for g3 in vg:
                    jac = _lin(self, self.bracket_vec, self.bracket_vec(g1, g2), g3)
                    t1 = _lin(self, lambda a, b: self.bracket_vec(b, a),
                              self.bracket_vec(g2, g3), g1)
                    s12 = -1 if (s1 % 2 and s2 % 2) else 1
                    t2 = _lin(self, lambda a, b: self.bracket_vec(b, a),
                              self.bracket_vec(g1, g3), g2)
                    res = _vdiff(jac, _vadd(t1, {h: s.scale(-s12)
                                                 for h, s in t2.items()}))
                    rep.record(("bracket-jacobi", g1, g2, g3), res)
        # module structure of the contraction
        for g1 in vg:
            for g2 in vg:
                composed = LinOp.zero(ring, degree=0)
                for h, s in self.wedge_vec(g1, g2).items():
                    composed = composed + self.iota[h].scale_scalar(s)
                direct = self.iota[g1].compose(self.iota[g2])
                rep.record(("iota-module", g1, g2), _op_diff(composed, direct))
        # Lie module for the action
        for g1 in vg:
            for g2 in vg:
                acted = LinOp.zero(ring, degree=0)
                for h, s in self.bracket_vec(g1, g2).items():
                    acted = acted + self.lie.get(h, LinOp.zero(ring)).scale_scalar(s)
                comm = self.lie.get(g1, LinOp.zero(ring, degree=self.v.deg(g1) - 1)) \
                    .commutator(self.lie.get(g2, LinOp.zero(ring,
                                                            degree=self.v.deg(g2) - 1)))
                rep.record(("lie-module", g1, g2), _op_diff(acted, comm))
        # the four displayed identities
        rep.record(("B-square",), _op_diff(self.B.compose(self.B),
                                           LinOp.zero(ring)))
        for g in vg:
            lx = self.l_on_w(g)
            rep.record(("l-is-B-iota", g),
                       _op_diff(lx, self.B.commutator(self.iota[g])))
        for g1 in vg:
            sign = -1 if self.v.deg(g1) % 2 else 1
            for g2 in vg:
                lhs = LinOp.zero(ring)
                for h, s in self.wedge_vec(g1, g2).items():
                    lhs = lhs + self.l_on_w(h).scale_scalar(s)
                rhs = self.l_on_w(g1).compose(self.iota[g2]) \
                    + self.iota[g1].compose(self.l_on_w(g2)).scale(sign)
                rep.record(("l-wedge", g1, g2), _op_diff(lhs, rhs))
                lhs2 = LinOp.zero(ring)
                for h, s in _l_on_v(self, g1, g2).items():
                    lhs2 = lhs2 + self.iota[h].scale_scalar(s)
                rhs2 = self.l_on_w(g1).commutator(self.iota[g2])
                rep.record(("iota-of-l", g1, g2), _op_diff(lhs2, rhs2))
        return rep

    def to_ch(self, check=True) -> CHModule:
        """Package as a module over the shifted bracket algebra with boundary
        z times B, action as given, contraction signed by degree."""
        rep = self.validate()
        if not rep.passed:
            label, res = rep.failures[0]
            raise ValueError(f"calculus axiom {label} fails: {res}")
        ring = self.ring
        L = dgla_to_linf(ring, [(g, self.v.deg(g) - 1) for g in self.v],
                         {}, self.bracket_vec)
        mbasis = GradedBasis([(g, self.w.deg(g) - 1) for g in self.w])
        d = self.B.scale_scalar(ring.z(1))

        def L_op(g):
            return self.lie.get(g, LinOp.zero(ring, degree=self.v.deg(g) - 1))

        def I_op(g):
            sign = -1 if self.v.deg(g) % 2 else 1
            op = self.iota[g].scale(sign)
            op.degree = self.v.deg(g)
            return op

        def rho_op(g1, g2):
            return LinOp.zero(ring, degree=0)

        return assemble_from_dgla(ring, L, mbasis, d, L_op, I_op, rho_op,
                                  check=check)


def _l_on_v(c: CalculusData, g1, g2) -> dict:
    sign = 1 if (c.v.deg(g1) - 1) % 2 == 0 else -1
    return {h: s.scale(sign) for h, s in c.bracket_vec(g1, g2).items()}


def _vadd(a, b):
    out = dict(a)
    for k, v in b.items():
        add_into(out, k, v)
    return out


def _vdiff(a, b):
    out = dict(a)
    for k, v in b.items():
        add_into(out, k, v.scale(-1))
    return {k: str(v) for k, v in out.items() if v}


def _op_diff(a: LinOp, b: LinOp):
    return {(s, d): str(v) for s, d, v in (a - b).entries()}


def _lin(c, fn, vec, g3):
    out = {}
    for h, s in vec.items():
        for h2, s2 in fn(h, g3).items():
            add_into(out, h2, s2 * s)
    return out


def exterior_calculus(ring: Ring, twist_sign=True) -> CalculusData:
    """Contraction calculus on one odd generator acting on a rank-four module;
    the boundary anticommutes with the contraction, so the induced Lie data
    vanishes.  Dropping the boundary sign (twist_sign off) breaks the
    homotopy identity, which the validator reports."""
    one = ring.one()
    v_gens = [("1", 0), ("v", 1)]
    w_gens = [("u0p0", 0), ("u1p0", 1), ("u0p1", 1), ("u1p1", 2)]
    wedge = {
        ("1", "1"): {"1": one},
        ("1", "v"): {"v": one},
        ("v", "1"): {"v": one},
        ("v", "v"): {},
    }
    iota = {
        "1": LinOp.identity(ring, [g for g, _ in w_gens]),
        "v": LinOp(ring, {"u0p0": {"u1p0": one}, "u0p1": {"u1p1": one}},
                   degree=1),
    }
    bsign = ring.monomial(-1) if twist_sign else one
    B = LinOp(ring, {"u0p1": {"u0p0": one}, "u1p1": {"u1p0": bsign}}, degree=-1)
    lie = {}
    return CalculusData(ring, v_gens, w_gens, wedge, {}, iota, lie, B,
                        name="exterior-odd-line")


# ---------------------------------------------------------------------------
# hypercommutative algebras
# ---------------------------------------------------------------------------
class HypercomData:
    """A graded space with symmetric k-ary operations of degree 4 - 2k."""

    def __init__(self, ring: Ring, basis, ops, unit=None, c1=None,
                 arity_bound=5, name="hypercom"):
        self.ring = ring
        self.basis = GradedBasis(basis)
        self.arity_bound = arity_bound
        self.unit = unit
        self.c1 = dict(c1 or {})    # vec over basis
        self.name = name
        self.ops = {}
        for k, table in ops.items():
            tab = {}
            for word, out in table.items():
                cw, sign = canonical_word(tuple(word),
                                          [self.basis.deg(g) for g in word])
                if sign == 0:
                    continue
                vec = {h: (s if sign == 1 else s.scale(-1)) for h, s in out.items()}
                tab[cw] = _vadd(tab.get(cw, {}), vec)
            self.ops[k] = {w: {h: s for h, s in v.items() if s}
                           for w, v in tab.items() if any(v.values())}

    def op(self, args) -> dict:
        k = len(args)
        if k < 2 or k > self.arity_bound:
            return {}
        cw, sign = canonical_word(tuple(args), [self.basis.deg(g) for g in args])
        if sign == 0:
            return {}
        out = self.ops.get(k, {}).get(cw, {})
        return out if sign == 1 else {h: s.scale(-1) for h, s in out.items()}

    def op_vec(self, vec_args) -> dict:
        """Multilinear extension: arguments are vectors over the basis."""
        out = {}

        def rec(i, gens, coeff):
            if i == len(vec_args):
                for h, s in self.op(gens).items():
                    add_into(out, h, s * coeff if coeff is not None else s)
                return
            for g, c in vec_args[i].items():
                rec(i + 1, gens + (g,), c if coeff is None else coeff * c)

        rec(0, (), None)
        return out

    # -- validation ------------------------------------------------------------
    def validate(self, check_divisor=True) -> Report:
        rep = Report(f"hypercom:{self.name}",
                     window={"arity_bound": self.arity_bound})
        gens = list(self.basis)
        deg = {g: self.basis.deg(g) for g in gens}
        # operation degrees
        for k, table in self.ops.items():
            for word, out in table.items():
                want = sum(deg[g] for g in word) + 4 - 2 * k
                for h, s in out.items():
                    d = s.degree()
                    got = None if d is None else deg[h] + d
                    if got != want:
                        rep.record(("op-degree", k, word, h), {h: str(s)})
        rep.checked += 1
        # quadratic consistency equations: the two distinguished arguments,
        # the interior multiset, and the pinned last argument play different
        # roles, so they are quantified independently
        for k in range(3, self.arity_bound + 1):
            for pair in itertools.combinations_with_replacement(gens, 2):
                for mid in itertools.combinations_with_replacement(gens, k - 3):
                    for xk in gens:
                        tup = pair + mid + (xk,)
                        rep.record(("wdvv", tup), self.quad_residual(tup))
        if self.unit is not None:
            for g in gens:
                got = self.op((self.unit, g))
                want = {g: self.ring.one()}
                rep.record(("unit-binary", g), _vdiff(got, want))
            for k in range(3, self.arity_bound + 1):
                for tup in itertools.combinations_with_replacement(gens, k - 1):
                    got = self.op((self.unit,) + tup)
                    rep.record(("unit-higher", tup),
                               {h: str(s) for h, s in got.items() if s})
        if check_divisor and self.c1:
            for k in range(2, self.arity_bound):
                for tup in itertools.combinations_with_replacement(gens, k):
                    lhs = self.op_vec([self.c1] + [{g: self.ring.one()}
                                                   for g in tup])
                    rhs = {h: s.derivative("e")
                           for h, s in self.op(tup).items()}
                    rep.record(("divisor", tup), _vdiff(lhs, rhs))
        return rep

    def quad_residual(self, tup) -> dict:
        """The k-point consistency equation on a basis tuple: exchanging the
        roles of the two distinguished arguments must not change the nested
        sum, signs taken relative to the common reference order."""
        if len(tup) < 3:
            return {}
        x1, x2 = tup[0], tup[1]
        mid, xk = tup[2:-1], tup[-1]
        reference = [x1, x2] + list(mid) + [xk]
        lhs = self._nested(reference, x1, x2, mid, xk)
        rhs = self._nested(reference, x2, x1, mid, xk)
        return _vdiff(lhs, rhs)

    def _nested(self, reference, a, b, mid, xk) -> dict:
        deg = {g: self.basis.deg(g) for g in self.basis}
        out = {}
        n = len(mid)
        for chosen in itertools.chain.from_iterable(
                itertools.combinations(range(n), r) for r in range(n + 1)):
            s1 = [mid[i] for i in chosen]
            s2 = [mid[i] for i in range(n) if i not in chosen]
            final = [a] + s1 + [b] + s2 + [xk]
            sign = _rearrange_sign(reference, final, deg)
            inner = self.op(tuple([b] + s2 + [xk]))
            for h, s in inner.items():
                for h2, s2_ in self.op(tuple([a] + s1 + [h])).items():
                    add_into(out, h2, (s2_ * s).scale(sign))
        return out


def _rearrange_sign(seq, final, deg):
    # match occurrences left to right
    used = [False] * len(seq)
    perm = []
    for x in final:
        for i, y in enumerate(seq):
            if not used[i] and y == x:
                used[i] = True
                perm.append(i)
                break
    return koszul_sign(tuple(perm), [deg[g] for g in seq])


def hypercom_to_ch(h: HypercomData, extend_eps3=True, check=True) -> CHModule:
    """The module of the hypercommutative package: one marked slot feeds the
    operations, two or more marked slots act by zero."""
    if check:
        rep = h.validate()
        if not rep.passed:
            label, res = rep.failures[0]
            raise ValueError(f"hypercom axiom {label} fails: {res}")
    ring = h.ring
    gens = [(g, h.basis.deg(g) - 1) for g in h.basis]
    L = LInf(ring, GradedBasis(gens),
             MultiMap(Space({g: d - 1 for g, d in gens}), 1, ring, table={},
                      max_arity=max(2, h.arity_bound - 1)))
    cone = build_cone(L, verified=False)
    mbasis = GradedBasis([(g, h.basis.deg(g)) for g in h.basis])
    mspace = Space({g: h.basis.deg(g) - 1 for g in h.basis})
    space = cone.maps.space

    def maps(k, word, m):
        marks = eps_count(word)
        if k == 0 or marks == 0 or marks >= 2:
            return {}
        i = next(j for j, slot in enumerate(word) if slot[0] == 1)
        # move the marked slot to the front
        perm = (i,) + tuple(j for j in range(k) if j != i)
        degs = [space.deg(s) for s in word]
        sign = koszul_sign(tuple(_inverse_perm(perm)), degs)
        xs = [word[i][1]] + [word[j][1] for j in range(k) if j != i]
        total = sum(h.basis.deg(g) for g in xs)
        sign2 = -1 if (1 + total) % 2 else 1
        out = h.op(tuple(xs) + (m,))
        return {g: s.scale(sign * sign2) for g, s in out.items()}

    mmaps = MultiMap(space, 1, ring, func=maps, module=True, mspace=mspace,
                     max_arity=h.arity_bound - 1, min_arity=0)
    return CHModule(L, cone, mbasis, mmaps, depth=3 if extend_eps3 else 2)


def _inverse_perm(perm):
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return inv


# ---------------------------------------------------------------------------
# the projective-line model
# ---------------------------------------------------------------------------
def qh_p1(ring: Ring, line_energy=1, arity_bound=5, validate=True,
          mutate=None) -> HypercomData:
    """Rank-two quantum product: unit in degree zero, a degree-two class whose
    square costs one unit of energy and two units of the grading variable; all
    higher operations are forced by the divisor rule for twice the degree-two
    class.  `mutate` perturbs one stored operation (for failure tests)."""
    a = Fraction(line_energy)
    q = ring.monomial(lam=a, e=2)
    one = ring.one()
    ops = {2: {("T0", "T0"): {"T0": one},
               ("T0", "T1"): {"T1": one},
               ("T1", "T1"): {"T0": q}}}
    for k in range(3, arity_bound + 1):
        ops[k] = {("T1",) * k: {"T0": q}}
    h = HypercomData(ring, [("T0", 0), ("T1", 2)], ops, unit="T0",
                     c1={"T1": ring.monomial(2)}, arity_bound=arity_bound,
                     name="qh-p1")
    if mutate:
        k, word, out, scale = mutate
        cur = h.ops[k].get(tuple(word), {}).get(out)
        if cur is None:
            raise ValueError("mutation target missing")
        h.ops[k][tuple(word)][out] = cur.scale(scale)
    if validate:
        rep = h.validate()
        if not rep.passed:
            label, res = rep.failures[0]
            raise ValueError(f"model validation fails at {label}: {res}")
    return h


def dubrovin_ring(z_order=4, energy_cut=3, t_order=3, e_window=(-6, 6)) -> Ring:
    """Tower matching the rank-two model: t-degrees are two minus the basis
    degrees."""
    from .coeff import TruncationPolicy

    return Ring(TruncationPolicy(z_order=z_order, energy_cut=energy_cut,
                                 t_order=t_order, e_window=e_window),
                t_vars=[("t0", 2), ("t1", 0)])


class DubrovinModel:
    """The full package: hypercom module, linear twisting element, the
    degree-one assignment for the connection variant, and the operator
    context."""

    def __init__(self, h: HypercomData, extend_eps3=True, check=True):
        ring = h.ring
        if tuple(ring.t_degrees) != tuple(2 - h.basis.deg(g) for g in h.basis):
            raise ValueError("t-degrees must be two minus the basis degrees")
        self.h = h
        self.chm = hypercom_to_ch(h, extend_eps3=extend_eps3, check=check)
        gamma = {g: ring.t(i) for i, g in enumerate(h.basis)}
        self.mc = mc_check(gamma, self.chm.L)
        c1 = {("e",): dict(h.c1)}
        for i, g in enumerate(h.basis):
            sign = -1 if h.basis.deg(g) % 2 else 1
            c1[("t", i)] = {g: ring.monomial(sign)}
        self.data = ConnectionData(ring, c1=c1)
        self.ctx = GGM(self.chm, self.mc, self.data, variant=True, check=check)

    def quantum_product(self, vec: dict) -> LinOp:
        """Multiplication by an element in the twisted product."""
        return self.ctx.I_vec(vec).scale(-1)

    def euler_element(self) -> dict:
        return self.data.c1_of(euler_field(self.h.ring))
