"""Connections and their meromorphic extensions: derivation calculus on the
coefficient tower, connection checks on bracket structures, the twisted
Gauss-Manin-type operator in the base directions, its z-direction extension
through the grading operator, curvature in two independent ways, morphism
compatibility at chain level, and the primitive-element checker.

Operators are verified after flattening onto a Laurent-windowed rational
carrier: each operator carries (down, up) margins recording how far it can
shift z-powers, and residuals are asserted to vanish exactly on every source
item whose image provably stays inside the window.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

from .coeff import EnergyDomainError, Norm, Ring, Scalar
from .colang import LInf, MultiMap, Report, Space, add_into, scale_vec
from .chmod import CHModule, MCElement, _vec_op, extract_operators, morphism_components
from .graded import LinOp

# directions are keyed ('t', i), ('e',) for the degree derivation on e, and
# ('z',) for d/dz


def direction_degree(ring: Ring, key) -> int:
    if key[0] == "t":
        return -ring.t_degrees[key[1]]
    if key[0] == "e":
        return 0
    if key[0] == "z":
        return -2
    raise ValueError(f"unknown direction {key!r}")


def apply_direction(key, s: Scalar) -> Scalar:
    if key[0] == "t":
        return s.derivative("t", key[1])
    if key[0] == "e":
        return s.derivative("e")
    if key[0] == "z":
        return s.derivative("z")
    raise ValueError(f"unknown direction {key!r}")


class Derivation:
    """A coefficient-field combination of base directions (z excluded)."""

    def __init__(self, ring: Ring, coeffs: dict):
        self.ring = ring
        self.coeffs = {k: c for k, c in coeffs.items() if c}
        if any(k[0] == "z" for k in self.coeffs):
            raise ValueError("the z-direction is handled separately")

    @classmethod
    def basis(cls, ring, key):
        return cls(ring, {key: ring.one()})

    def degree(self):
        degs = set()
        for k, c in self.coeffs.items():
            d = c.degree()
            if d is None:
                return None
            degs.add(direction_degree(self.ring, k) + d)
        if not degs:
            return 0
        return degs.pop() if len(degs) == 1 else None

    def apply(self, s: Scalar) -> Scalar:
        out = self.ring.zero()
        for k, c in self.coeffs.items():
            out = out + c * apply_direction(k, s)
        return out

    def apply_vec(self, vec: dict) -> dict:
        return {g: self.apply(s) for g, s in vec.items() if self.apply(s)}

    def apply_linop(self, op: LinOp) -> LinOp:
        return op.map_entries(self.apply)

    def bracket(self, other: "Derivation") -> "Derivation":
        # basis directions commute; only the coefficients differentiate
        out = {}
        for k2, c2 in other.coeffs.items():
            d = self.apply(c2)
            if d:
                out[k2] = out.get(k2, self.ring.zero()) + d
        for k1, c1 in self.coeffs.items():
            d = other.apply(c1)
            if d:
                out[k1] = out.get(k1, self.ring.zero()) - d
        return Derivation(self.ring, out)

    def is_zero(self):
        return not self.coeffs

    def __repr__(self):
        return f"Derivation({ {k: str(c) for k, c in self.coeffs.items()} })"


def euler_field(ring: Ring) -> Derivation:
    """The grading field: e times the e-derivative plus half-degree-weighted
    t-directions."""
    coeffs = {("e",): ring.one()}
    for i, d in enumerate(ring.t_degrees):
        if d:
            coeffs[("t", i)] = ring.t(i, coeff=Fraction(d, 2))
    return Derivation(ring, coeffs)


def base_directions(ring: Ring):
    return [("t", i) for i in range(len(ring.t_names))] + [("e",)]


# ---------------------------------------------------------------------------
# connection data and structure-compatibility checks
# ---------------------------------------------------------------------------
class ConnectionData:
    """A connection given by coefficientwise derivatives plus matrix
    corrections, on the base algebra and on the module carrier."""

    def __init__(self, ring: Ring, nabla_L=None, nabla_M=None, c1=None):
        self.ring = ring
        self.nabla_L = dict(nabla_L or {})     # dir key -> LinOp on L gens
        self.nabla_M = dict(nabla_M or {})     # dir key -> LinOp on module gens
        self.c1 = dict(c1 or {})               # dir key -> vec over L gens

    def on_L(self, X: Derivation, vec: dict) -> dict:
        out = {}
        for g, s in vec.items():
            d = X.apply(s)
            if d:
                add_into(out, g, d)
            for key, c in X.coeffs.items():
                mat = self.nabla_L.get(key)
                if mat is None:
                    continue
                for h, m in mat.apply_gen(g).items():
                    add_into(out, h, m * c * s)
        return out

    def on_M(self, X: Derivation, vec: dict) -> dict:
        out = {}
        for g, s in vec.items():
            d = X.apply(s)
            if d:
                add_into(out, g, d)
            for key, c in X.coeffs.items():
                mat = self.nabla_M.get(key)
                if mat is None:
                    continue
                for h, m in mat.apply_gen(g).items():
                    add_into(out, h, m * c * s)
        return out

    def matrix_M(self, X: Derivation, ring) -> LinOp:
        out = LinOp.zero(ring, degree=0)
        for key, c in X.coeffs.items():
            mat = self.nabla_M.get(key)
            if mat is not None:
                out = out + mat.scale_scalar(c)
        return out

    def c1_of(self, X: Derivation) -> dict:
        out = {}
        for key, c in X.coeffs.items():
            for g, s in self.c1.get(key, {}).items():
                add_into(out, g, s * c)
        return out


def trivial_connection(ring: Ring) -> ConnectionData:
    return ConnectionData(ring)


def connection_residual_algebra(data: ConnectionData, X: Derivation, L: LInf,
                                word) -> dict:
    """(nabla_X of the bracket family) on a word; zero for a compatible
    connection.  Derivation directions here are even, so the prefix signs of
    the general rule are all one."""
    assert (X.degree() or 0) % 2 == 0
    img = L.maps.apply(word)
    out = data.on_L(X, img)
    for i, g in enumerate(word):
        moved = data.on_L(X, {g: L.ring.one()})
        for h, s in moved.items():
            sub = L.maps.apply(word[:i] + (h,) + word[i + 1:])
            for g2, s2 in sub.items():
                add_into(out, g2, (s2 * s).scale(-1))
    return out


def connection_residual_module(data: ConnectionData, X: Derivation,
                               chm: CHModule, word, mgen, variant_c1=False) -> dict:
    """(nabla_X of the module family) on (word | m); with `variant_c1` the
    expected value is the family fed with the distinguished element in front."""
    ring = chm.ring
    img = chm.mmaps.apply(word, mgen)
    out = data.on_M(X, img)
    for i, (mark, g) in enumerate(word):
        moved = data.on_L(X, {g: ring.one()})
        for h, s in moved.items():
            sub = chm.mmaps.apply(word[:i] + ((mark, h),) + word[i + 1:], mgen)
            for g2, s2 in sub.items():
                add_into(out, g2, (s2 * s).scale(-1))
    base = data.on_M(X, {mgen: ring.one()})
    for h, s in base.items():
        for g2, s2 in chm.mmaps.apply(word, h).items():
            add_into(out, g2, (s2 * s).scale(-1))
    if variant_c1:
        c1x = data.c1_of(X)
        for g, s in c1x.items():
            for g2, s2 in chm.mmaps.apply(((0, g),) + word, mgen).items():
                add_into(out, g2, (s2 * s).scale(-1))
    return out


def check_connection(data: ConnectionData, chm: CHModule, level="ch",
                     directions=None, word_bound=2, variant_c1=False,
                     eps_free_only=True) -> Report:
    """Compatibility of a connection with the structure maps.

    Levels: 'plain' checks only the Leibniz rule (built into the
    representation, so it records samples), 'linf' the base algebra, 'ch' also
    the module family.  With `variant_c1`, words are restricted to unmarked
    slots, which is the range the construction uses.
    """
    ring = chm.ring
    dirs = directions if directions is not None else base_directions(ring)
    rep = Report(f"connection-{level}" + ("-c1" if variant_c1 else ""),
                 window={"word_bound": word_bound})
    for key in dirs:
        X = Derivation.basis(ring, key)
        # Leibniz sample: nabla_X(r m) - (X r) m - r nabla_X m
        r = ring.t(0) if ring.t_names else ring.e(1)
        for m in list(chm.module_keys())[:2]:
            lhs = data.on_M(X, {m: r})
            rhs = {m: X.apply(r)}
            for h, s in data.on_M(X, {m: ring.one()}).items():
                add_into(rhs, h, r * s)
            diff = dict(lhs)
            for h, s in rhs.items():
                add_into(diff, h, s.scale(-1))
            rep.record(("leibniz", key, m), diff)
        if level == "plain":
            continue
        for w in chm.L.space.words(word_bound, min_len=1):
            res = connection_residual_algebra(data, X, chm.L, w)
            if variant_c1:
                c1x = data.c1_of(X)
                for g, s in c1x.items():
                    sub = chm.L.maps.apply((g,) + w)
                    for g2, s2 in sub.items():
                        add_into(res, g2, (s2 * s).scale(-1))
            rep.record(("linf", key, w), res)
        if level != "ch":
            continue
        for w in chm.cone.maps.space.words(word_bound):
            if eps_free_only and any(mark for mark, _ in w):
                continue
            for m in chm.module_keys():
                res = connection_residual_module(data, X, chm, w, m,
                                                 variant_c1=variant_c1)
                rep.record(("module", key, w, m), res)
    return rep


# ---------------------------------------------------------------------------
# symbolic meromorphic operators
#
# An operator is a sum of three kinds of parts, each exact in the truncation
# quotient:
#   dz2[p]  : rational multiples of (z^2 d/dz) / z^p,
#   dirs    : base directions with tower coefficients, acting coefficientwise,
#   mats[p] : matrices of tower scalars over the module basis, divided by z^p.
# Commutators expand by the Leibniz rule, so poles never need clearing and
# no Laurent carrier is required.  Entry derivatives in the t-directions are
# exact one order below the truncation; contexts are therefore built on rings
# with spare t-order when full-depth claims are wanted.
# ---------------------------------------------------------------------------
class ConnOp:
    """A meromorphic operator in symbolic derivation/matrix form.

    dz2[p] are rational multiples of (z^2 d/dz)/z^p; dirs[(key, p)] are tower
    coefficients of a base direction over z^p; mats[p] are matrices over z^p.
    """

    __slots__ = ("ring", "dz2", "dirs", "mats")

    def __init__(self, ring: Ring, dz2=None, dirs=None, mats=None):
        self.ring = ring
        self.dz2 = {int(p): Fraction(q) for p, q in (dz2 or {}).items() if q}
        self.dirs = {k: c for k, c in (dirs or {}).items() if c}
        self.mats = {int(p): m for p, m in (mats or {}).items()
                     if not m.is_zero()}

    @classmethod
    def matrix(cls, ring, op: LinOp, pole=0):
        return cls(ring, mats={pole: op})

    @classmethod
    def direction(cls, ring, X: Derivation, z_power=0, pole=0):
        zf = ring.z(z_power) if z_power else ring.one()
        return cls(ring, dirs={(k, pole): zf * c for k, c in X.coeffs.items()})

    def __add__(self, other):
        dz2 = dict(self.dz2)
        for p, q in other.dz2.items():
            dz2[p] = dz2.get(p, Fraction(0)) + q
        dirs = dict(self.dirs)
        for k, c in other.dirs.items():
            dirs[k] = dirs[k] + c if k in dirs else c
        mats = dict(self.mats)
        for p, m in other.mats.items():
            mats[p] = mats[p] + m if p in mats else m
        return ConnOp(self.ring, dz2, dirs, mats)

    def scale(self, q):
        q = Fraction(q)
        return ConnOp(self.ring,
                      {p: v * q for p, v in self.dz2.items()},
                      {k: c.scale(q) for k, c in self.dirs.items()},
                      {p: m.scale(q) for p, m in self.mats.items()})

    def __sub__(self, other):
        return self + other.scale(-1)

    def commutator(self, other: "ConnOp") -> "ConnOp":
        """Commutator of even operators, expanded by the Leibniz rule."""
        ring = self.ring
        out = ConnOp(ring)
        for a, qa in self.dz2.items():
            for b, qb in other.dz2.items():
                if a != b:
                    out = out + ConnOp(ring, dz2={a + b - 1: qa * qb * (a - b)})
        # z-derivative parts against direction parts
        for (pair, sign) in (((self, other), 1), ((other, self), -1)):
            one, two = pair
            for a, qa in one.dz2.items():
                for (k, b), c in two.dirs.items():
                    d = (c.derivative("z") * ring.z(2)).scale(sign * qa)
                    out = out + ConnOp(ring, dirs={(k, a + b): d})
                    if b:
                        out = out + ConnOp(
                            ring,
                            dirs={(k, a + b): (c * ring.z(1)).scale(-sign * qa * b)})
        # z-derivative parts against matrix parts
        for (pair, sign) in (((self, other), 1), ((other, self), -1)):
            one, two = pair
            for a, qa in one.dz2.items():
                for p, m in two.mats.items():
                    out = out + ConnOp.matrix(
                        ring, _z2dz_entries(m).scale(sign * qa), pole=a + p)
                    if p:
                        out = out + ConnOp.matrix(
                            ring, m.map_entries(lambda s: s * ring.z(1))
                                   .scale(-sign * qa * p), pole=a + p)
        # directions against directions
        for (k1, p1), c1 in self.dirs.items():
            for (k2, p2), c2 in other.dirs.items():
                d12 = c1 * apply_direction(k1, c2)
                d21 = c2 * apply_direction(k2, c1)
                out = out + ConnOp(ring, dirs={(k2, p1 + p2): d12})
                out = out + ConnOp(ring, dirs={(k1, p1 + p2): d21.scale(-1)})
        # directions against matrices (entrywise derivative)
        for (pair, sign) in (((self, other), 1), ((other, self), -1)):
            one, two = pair
            for (k, a), c in one.dirs.items():
                for p, m in two.mats.items():
                    moved = m.map_entries(
                        lambda s: (c * apply_direction(k, s)).scale(sign))
                    out = out + ConnOp.matrix(ring, moved, pole=a + p)
        for p1, m1 in self.mats.items():
            for p2, m2 in other.mats.items():
                out = out + ConnOp.matrix(ring, m1.compose(m2) - m2.compose(m1),
                                          pole=p1 + p2)
        return out

    def apply(self, vec: dict) -> dict:
        """Apply a pole-free operator to a module vector."""
        ring = self.ring
        out = {}
        for p, q in self.dz2.items():
            if p > 2:
                raise ValueError("pole in a z-derivative part")
            zf = ring.z(2 - p, coeff=q)
            for g, s in vec.items():
                add_into(out, g, zf * s.derivative("z"))
        for (k, p), c in self.dirs.items():
            if p:
                raise ValueError("pole in a direction part")
            for g, s in vec.items():
                add_into(out, g, c * apply_direction(k, s))
        for p, m in self.mats.items():
            if p:
                raise ValueError("pole in a matrix part")
            for g, s in vec.items():
                for h, e in m.cols.get(g, {}).items():
                    add_into(out, h, e * s)
        return out

    def normalized(self) -> "ConnOp":
        """Fold spare z-powers of matrix and direction parts into poles."""
        mats = {}
        for p, m in sorted(self.mats.items()):
            while p > 0 and not m.is_zero() and _divisible_by_z(m):
                m = m.map_entries(lambda s: _shift_z(s, -1))
                p -= 1
            if m.is_zero():
                continue
            mats[p] = mats[p] + m if p in mats else m
        dirs = {}
        for (k, p), c in self.dirs.items():
            while p > 0 and c and all(key[2] >= 1 for key, _ in c.terms):
                c = _shift_z(c, -1)
                p -= 1
            if not c:
                continue
            key = (k, p)
            dirs[key] = dirs[key] + c if key in dirs else c
        return ConnOp(self.ring, self.dz2, dirs, mats)

    def residual(self, t_claim=None) -> dict:
        """Nonzero content after pole normalization; `t_claim` restricts the
        record to components of t-total below the claimed order (entry
        derivatives in the t-directions are exact only below the ring's
        own truncation)."""
        norm = self.normalized()
        out = {}
        for p, q in norm.dz2.items():
            out[("dz", p)] = str(q)
        for (k, p), c in norm.dirs.items():
            c = _t_restrict(c, t_claim)
            if c:
                out[("dir", k, p)] = str(c)
        for p, m in norm.mats.items():
            for src, dst, sca in m.entries():
                sca = _t_restrict(sca, t_claim)
                if sca:
                    out[("mat", p, src, dst)] = str(sca)
        return out

    def is_zero(self, t_claim=None):
        return not self.residual(t_claim)


def _t_restrict(s: Scalar, t_claim):
    if t_claim is None or not s:
        return s
    return Scalar(s.ring, {k: q for k, q in s.terms if sum(k[3]) < t_claim},
                  tag=s.tag)


def _z2dz_entries(m: LinOp) -> LinOp:
    def f(s):
        return s.derivative("z") * s.ring.z(2)

    return m.map_entries(f)


def _divisible_by_z(m: LinOp) -> bool:
    return all(all(k[2] >= 1 for k, _ in s.terms)
               for _, _, s in m.entries())


def _shift_z(s: Scalar, dz: int):
    terms = {}
    for (lam, e, z, t), q in s.terms:
        if z + dz < 0:
            return None
        terms[(lam, e, z + dz, t)] = q
    return Scalar(s.ring, terms, tag=s.tag)


# ---------------------------------------------------------------------------
# the twisted Gauss-Manin-type operator context
# ---------------------------------------------------------------------------
class GGMError(ValueError):
    """A named precondition of the connection construction failed."""


class GGM:
    """Operator context for one twisted module with a connection.

    `variant` switches the subscript of the contraction correction from the
    derivative of the twisting element to the distinguished degree-one
    assignment carried by the connection data.
    """

    def __init__(self, chm: CHModule, mc: MCElement, data: ConnectionData,
                 variant=False, directions=None, check=True, t_claim=None):
        from .chmod import twist_algebra, twist_module

        self.ring = chm.ring
        self.data = data
        self.variant = variant
        self.t_claim = t_claim if t_claim is not None \
            else max(0, chm.ring.policy.t_order - 1)
        self.mc = mc
        self.base = chm
        self.alg_tw = twist_algebra(chm.L, mc)
        self.chm = twist_module(chm, mc)
        self.directions = directions if directions is not None \
            else base_directions(self.ring)
        d, L_op, I_op, rho_op = extract_operators(self.chm, check_shape=False)
        self.dgamma = d
        self._I = I_op
        self._L = L_op
        self._rho = rho_op
        self._subs = {}
        for key in self.directions:
            self._subs[key] = self.subscript(Derivation.basis(self.ring, key))
        self._subs[("E",)] = self.subscript(euler_field(self.ring))
        self.module_degrees = {m: chm.mbasis.deg(m) for m in chm.mbasis}
        if check:
            rep = self.lemma_report()
            if not rep.passed:
                raise GGMError(f"connection lemmas fail: {rep.failures[0][0]}")

    # -- ingredients ----------------------------------------------------------
    def subscript(self, X: Derivation) -> dict:
        if self.variant:
            return self.data.c1_of(X)
        return self.data.on_L(X, self.mc.vec)

    def I_vec(self, vec: dict) -> LinOp:
        return _vec_op(self._I, vec, self.ring, 2)

    def rho_vec(self, v1: dict, v2: dict) -> LinOp:
        out = LinOp.zero(self.ring, degree=0)
        for g1, c1 in v1.items():
            for g2, c2 in v2.items():
                out = out + self._rho(g1, g2).scale_scalar(c1 * c2)
        return out

    def l1_twisted(self, vec: dict) -> dict:
        out = {}
        for g, c in vec.items():
            for h, s in self.alg_tw.maps.apply((g,)).items():
                add_into(out, h, s * c)
        return out

    def l1_module_plain(self, vec: dict) -> LinOp:
        cols = {}
        for m in self.chm.module_keys():
            acc = {}
            for g, c in vec.items():
                for h, s in self.chm.mmaps.apply(((0, g),), m).items():
                    add_into(acc, h, s * c)
            if acc:
                cols[m] = acc
        return LinOp(self.ring, cols, degree=1)

    def nabla_op(self, X: Derivation) -> ConnOp:
        out = ConnOp.direction(self.ring, X)
        mat = self.data.matrix_M(X, self.ring)
        if not mat.is_zero():
            out = out + ConnOp.matrix(self.ring, mat)
        return out

    def degree_operator(self) -> ConnOp:
        """The grading operator: matrix part from generator degrees plus the
        coefficient grading derivation."""
        ring = self.ring
        diag = LinOp(ring, {m: {m: ring.monomial(d)}
                            for m, d in self.module_degrees.items() if d},
                     degree=0)
        dirs = {(("e",), 0): ring.monomial(2)}
        for i, td in enumerate(ring.t_degrees):
            if td:
                dirs[(("t", i), 0)] = ring.t(i, coeff=td)
        return ConnOp(ring, dz2={1: Fraction(2)}, dirs=dirs,
                      mats={0: diag} if not diag.is_zero() else {})

    # -- lemma gates ------------------------------------------------------------
    def lemma_report(self) -> Report:
        rep = Report("connection-lemmas")
        for key in self.directions:
            X = Derivation.basis(self.ring, key)
            sub = self._subs[key]
            rep.record(("first", key),
                       {g: str(s) for g, s in self.l1_twisted(sub).items() if s})
            lhs = self.nabla_op(X).commutator(
                ConnOp.matrix(self.ring, self.dgamma.scale(-1)))
            rhs = ConnOp.matrix(self.ring, self.l1_module_plain(sub))
            rep.record(("second", key), (lhs - rhs).residual())
        return rep

    # -- operators ----------------------------------------------------------------
    def ggm(self, X: Derivation, cleared=False) -> ConnOp:
        """The base-direction operator; `cleared` multiplies through by z."""
        d = X.degree()
        if d is None or d % 2:
            raise GGMError("directions must be homogeneous and even")
        sub = self.subscript(X)
        zpow = 1 if cleared else 0
        out = ConnOp.direction(self.ring, X, z_power=zpow)
        mat = self.data.matrix_M(X, self.ring)
        if not mat.is_zero():
            if cleared:
                mat = mat.scale_scalar(self.ring.z(1))
            out = out + ConnOp.matrix(self.ring, mat)
        if sub:
            out = out - ConnOp.matrix(self.ring, self.I_vec(sub),
                                      pole=0 if cleared else 1)
        return out

    def euler_op(self, cleared=False) -> ConnOp:
        """The z-direction operator; `cleared` multiplies through by z^2."""
        deg = self.degree_operator()
        half_z_deg = ConnOp(self.ring,
                            dz2={p - 1: q / 2 for p, q in deg.dz2.items()},
                            dirs={k: (self.ring.z(1) * c).scale(Fraction(1, 2))
                                  for k, c in deg.dirs.items()},
                            mats={p: m.scale_scalar(self.ring.z(1)).scale(Fraction(1, 2))
                                  for p, m in deg.mats.items()})
        zg = self.ggm(euler_field(self.ring), cleared=True)
        out = half_z_deg - zg
        if not cleared:
            out = _div_z2(out)
        return out.normalized()

    # -- chain-level commutation -----------------------------------------------
    def commutation_report(self) -> Report:
        rep = Report("ggm-commutation")
        dmat = ConnOp.matrix(self.ring, self.dgamma)
        for key in self.directions:
            X = Derivation.basis(self.ring, key)
            res = dmat.commutator(self.ggm(X, cleared=True))
            rep.record(("base-direction", key), res.residual(self.t_claim))
        half_zd = ConnOp.matrix(
            self.ring,
            self.dgamma.scale_scalar(self.ring.z(1, coeff=Fraction(1, 2))))
        res = self.euler_op(cleared=True).commutator(dmat) - half_zd
        rep.record(("z-direction",), res.residual(self.t_claim))
        return rep

    # -- curvature -----------------------------------------------------------------
    def curvature_direct(self, X: Derivation, Y: Derivation) -> ConnOp:
        out = self.ggm(X).commutator(self.ggm(Y))
        bracket = X.bracket(Y)
        if not bracket.is_zero():
            out = out - self.ggm(bracket)
        return out

    def curvature_formula(self, X: Derivation, Y: Derivation) -> ConnOp:
        """The closed curvature expression built from the operator package."""
        ring = self.ring
        dx, dy = X.degree() % 2, Y.degree() % 2
        sxy = -1 if (dx + dy) % 2 else 1
        sy = -1 if dy else 1
        sxxy = -1 if (dx + dx * dy) % 2 else 1
        nx, ny = self.nabla_op(X), self.nabla_op(Y)
        out = nx.commutator(ny)
        bracket = X.bracket(Y)
        if not bracket.is_zero():
            out = out - self.nabla_op(bracket)
        gamma = self.mc.vec
        r_gamma = self.data.on_L(X, self.data.on_L(Y, gamma))
        for g, s in self.data.on_L(Y, self.data.on_L(X, gamma)).items():
            add_into(r_gamma, g, s.scale(-1))
        if not bracket.is_zero():
            for g, s in self.data.on_L(bracket, gamma).items():
                add_into(r_gamma, g, s.scale(-1))
        sx_vec, sy_vec = self.subscript(X), self.subscript(Y)
        mid = self.I_vec(r_gamma).scale(sxy) \
            + self.rho_vec(sx_vec, sy_vec).scale(sy) \
            - self.rho_vec(sy_vec, sx_vec).scale(sxxy)
        out = out - ConnOp.matrix(ring, mid, pole=1)
        last = self.I_vec(sx_vec).commutator(self.I_vec(sy_vec)).scale(sxy)
        out = out + ConnOp.matrix(ring, last, pole=2)
        return out

    def flatness_report(self, include_proof_identities=True) -> Report:
        rep = Report("flatness", window={"t_claim": self.t_claim})
        dirs = [Derivation.basis(self.ring, k) for k in self.directions]
        for i, X in enumerate(dirs):
            for j in range(i, len(dirs)):
                res = self.curvature_direct(X, dirs[j])
                rep.record(("pair", self.directions[i], self.directions[j]),
                           res.residual(self.t_claim))
        ez = self.euler_op()
        for i, X in enumerate(dirs):
            res = self.ggm(X).commutator(ez)
            rep.record(("pair-z", self.directions[i]),
                       res.residual(self.t_claim))
        if include_proof_identities:
            E = euler_field(self.ring)
            deg_op = self.degree_operator()
            for i, X in enumerate(dirs):
                d = X.degree()
                res = deg_op.commutator(self.ggm(X)) - self.ggm(X).scale(d)
                rep.record(("degree-identity", self.directions[i]),
                           res.residual(self.t_claim))
                br = E.bracket(X)
                half = {k: c.scale(Fraction(d, 2)) for k, c in X.coeffs.items()}
                diff = {k: br.coeffs.get(k, self.ring.zero())
                        - half.get(k, self.ring.zero())
                        for k in set(br.coeffs) | set(half)}
                rep.record(("euler-bracket", self.directions[i]),
                           {k: str(v) for k, v in diff.items() if v})
        return rep


def _div_z2(op: ConnOp) -> ConnOp:
    """Divide by z^2, pushing the shift into the pole bookkeeping."""
    return ConnOp(op.ring,
                  {p + 2: q for p, q in op.dz2.items()},
                  {(k, p + 2): c for (k, p), c in op.dirs.items()},
                  {p + 2: m for p, m in op.mats.items()})

# ---------------------------------------------------------------------------
# morphism compatibility at chain level
# ---------------------------------------------------------------------------
def check_connection_preservation(f: MultiMap, src: CHModule, data: ConnectionData,
                                  directions, word_bound=2) -> Report:
    """The comodule morphism commutes with the induced connections: the
    connection applied to each component family vanishes (even directions)."""
    ring = src.ring
    rep = Report("connection-preservation", window={"word_bound": word_bound})
    for key in directions:
        X = Derivation.basis(ring, key)
        for w in src.cone.maps.space.words(word_bound):
            for m in src.module_keys():
                img = f.apply(w, m)
                out = data.on_M(X, img)
                for i, (mark, g) in enumerate(w):
                    moved = data.on_L(X, {g: ring.one()})
                    for h, s in moved.items():
                        for g2, s2 in f.apply(w[:i] + ((mark, h),) + w[i + 1:],
                                              m).items():
                            add_into(out, g2, (s2 * s).scale(-1))
                for h, s in data.on_M(X, {m: ring.one()}).items():
                    for g2, s2 in f.apply(w, h).items():
                        add_into(out, g2, (s2 * s).scale(-1))
                rep.record((key, w, m), out)
    return rep


def compatibility_report(f: MultiMap, src_ctx: GGM, dst_ctx: GGM,
                         check_morphism=True, word_bound=2) -> Report:
    """Chain-level intertwining of the twisted zero component through the
    homotopy components, in the base directions and in the z-direction.

    Base directions X (even): the commutator of the z-cleared operator with
    the zero component equals (-1)^{|X|+1} d f^eps - f^eps d with subscript
    the direction's twisting derivative; the z-direction version carries both
    orders with a plus sign after clearing z^2.
    """
    from .chmod import check_ch_morphism, twist_comodule_maps

    rep = Report("compatibility")
    ring = src_ctx.ring
    if src_ctx.directions != dst_ctx.directions:
        raise ValueError("contexts disagree on directions")
    f_tw = twist_comodule_maps(f, src_ctx.mc)
    if check_morphism:
        mrep = check_ch_morphism(f_tw, src_ctx.chm, dst_ctx.chm,
                                 word_bound=word_bound)
        rep.record(("is-ch-morphism",),
                   {} if mrep.passed else {"failures": str(len(mrep.failures))})
        prep = check_connection_preservation(f, src_ctx.base, src_ctx.data,
                                             src_ctx.directions, word_bound)
        rep.record(("preserves-connections",),
                   {} if prep.passed else {"failures": str(len(prep.failures))})
    f0, F_op, Feps_op = morphism_components(f_tw, src_ctx.chm, dst_ctx.chm)
    f0_op = ConnOp.matrix(ring, f0)
    d_src = src_ctx.dgamma
    d_dst = dst_ctx.dgamma

    def feps(vec) -> LinOp:
        return _vec_op(Feps_op, vec, ring, 0)

    raw_nonzero = {}
    for key in src_ctx.directions:
        X = Derivation.basis(ring, key)
        sub = src_ctx.subscript(X)
        sx = -1 if (X.degree() + 1) % 2 else 1
        lhs = dst_ctx.ggm(X, cleared=True).commutator(f0_op)
        hom = d_dst.compose(feps(sub)).scale(sx) - feps(sub).compose(d_src)
        res = lhs - ConnOp.matrix(ring, hom)
        rep.record(("base-direction", key), res.residual(self.t_claim))
        raw = dst_ctx.nabla_op(X).commutator(f0_op)
        raw_nonzero[str(key)] = not raw.is_zero()
    subE = src_ctx._subs[("E",)]
    lhs = dst_ctx.euler_op(cleared=True).commutator(f0_op)
    hom = d_dst.compose(feps(subE)) + feps(subE).compose(d_src)
    res = lhs - ConnOp.matrix(ring, hom)
    rep.record(("z-direction",), res.residual(src_ctx.t_claim))
    rep.window["raw-commutator-nonzero"] = raw_nonzero
    return rep


# ---------------------------------------------------------------------------
# primitive elements
# ---------------------------------------------------------------------------
def scalar_matrix_solve(columns, target, tag="Lambda"):
    """Solve sum_j c_j col_j = target over the truncated tower, or None.

    Elimination with unit pivots; `tag` decides which leading parts count
    as invertible.
    """
    cols = [dict(c) for c in columns]
    tgt = dict(target)
    coeffs = [None] * len(cols)
    used_rows = set()
    order = sorted({k for c in cols for k in c} | set(tgt), key=repr)
    remaining = list(range(len(cols)))
    while remaining:
        pivot = None
        for j in remaining:
            for row in order:
                if row in used_rows:
                    continue
                sca = cols[j].get(row)
                if not sca:
                    continue
                try:
                    inv = _retag(sca, tag).unit_inverse()
                except (ZeroDivisionError, EnergyDomainError):
                    continue
                pivot = (j, row, inv)
                break
            if pivot:
                break
        if pivot is None:
            break
        j, row, inv = pivot
        remaining.remove(j)
        used_rows.add(row)
        cols[j] = {k: inv * v for k, v in cols[j].items()}
        for j2 in remaining:
            g = cols[j2].get(row)
            if g:
                for k, v in cols[j].items():
                    cur = cols[j2].get(k, v.ring.zero()) - v * g
                    if cur:
                        cols[j2][k] = cur
                    elif k in cols[j2]:
                        del cols[j2][k]
        g = tgt.get(row)
        if g:
            coeffs[j] = g
            for k, v in cols[j].items():
                cur = tgt.get(k, v.ring.zero()) - v * g
                if cur:
                    tgt[k] = cur
                elif k in tgt:
                    del tgt[k]
        else:
            coeffs[j] = None
    if any(tgt.values()):
        return None
    ring = None
    for c in columns:
        for s in c.values():
            ring = s.ring
            break
        if ring:
            break
    return [c if c is not None else (ring.zero() if ring else None)
            for c in coeffs]


def _retag(s: Scalar, tag):
    return Scalar(s.ring, dict(s.terms), tag=tag)


def scalar_matrix_det(rows) -> Scalar:
    n = len(rows)
    if n == 0:
        raise ValueError("empty matrix")
    if n == 1:
        return rows[0][0]
    det = rows[0][0].ring.zero()
    for j in range(n):
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        term = rows[0][j] * scalar_matrix_det(minor)
        det = det + (term if j % 2 == 0 else term.scale(-1))
    return det


def primitive_check(zeta: dict, ctx: GGM, tag="Lambda", dirs=None) -> Report:
    """Primitivity, the homogeneity equation, and the two pole-order
    conditions for a degree-homogeneous element of the module."""
    ring = ctx.ring
    dirs = dirs if dirs is not None else [k for k in ctx.directions
                                          if k[0] == "t"]
    rep = Report("primitive", window={"tag": tag})
    gens = sorted(ctx.chm.module_keys())
    r = _vec_degree(ctx, zeta)
    if r is None:
        rep.record(("homogeneous",), {"zeta": "inhomogeneous or zero"})
        return rep
    rep.window["degree"] = r
    frame = {}
    for key in dirs:
        X = Derivation.basis(ring, key)
        frame[key] = ctx.ggm(X, cleared=True).apply(zeta)
    # primitivity: the residue matrix at z = 0 must be invertible
    if len(gens) != len(dirs):
        rep.record(("primitivity",), {"shape": f"{len(gens)}x{len(dirs)}"})
        return rep
    matrix_rows = [[_retag(frame[key].get(g, ring.zero()).z_slice(0), tag)
                    for key in dirs] for g in gens]
    det = scalar_matrix_det(matrix_rows)
    try:
        _retag(det, tag).unit_inverse()
        invertible = True
    except (ZeroDivisionError, EnergyDomainError):
        invertible = False
    rep.record(("primitivity",), {} if invertible else {"det": str(det)})
    # homogeneity, multiplied through by z: (z^2-cleared z-direction op)(zeta)
    # + (z-cleared grading-field op)(zeta) - (r/2) z zeta = 0
    hom = ctx.euler_op(cleared=True).apply(zeta)
    for g, s in ctx.ggm(euler_field(ring), cleared=True).apply(zeta).items():
        add_into(hom, g, s)
    z1 = ring.z(1, coeff=Fraction(r, 2))
    for g, s in zeta.items():
        add_into(hom, g, (z1 * s).scale(-1))
    rep.record(("homogeneity",), {g: str(s) for g, s in hom.items() if s})
    if not invertible:
        return rep
    col_vecs = [{g: frame[key].get(g, ring.zero()) for g in gens}
                for key in dirs]
    cols = [{g: s for g, s in c.items() if s} for c in col_vecs]
    # pole conditions on the transported connection
    for key in dirs:
        X = Derivation.basis(ring, key)
        for j, keyj in enumerate(dirs):
            img = ctx.ggm(X, cleared=True).apply(cols[j])
            coeffs = scalar_matrix_solve(cols, img, tag)
            if coeffs is None:
                rep.record(("pole-base", key, keyj), {"solve": "failed"})
                continue
            worst = max((c.max_z() for c in coeffs if c), default=0)
            rep.record(("pole-base", key, keyj),
                       {} if worst <= 1 else {"z-order": str(worst)})
    for j, keyj in enumerate(dirs):
        img = ctx.euler_op(cleared=True).apply(cols[j])
        coeffs = scalar_matrix_solve(cols, img, tag)
        if coeffs is None:
            rep.record(("pole-z", keyj), {"solve": "failed"})
            continue
        worst = max((c.max_z() for c in coeffs if c), default=0)
        rep.record(("pole-z", keyj), {} if worst <= 2 else {"z-order": str(worst)})
    # transported grading direction in residue coordinates
    imgE = ctx.ggm(euler_field(ring), cleared=True).apply(zeta)
    res_cols = [{g: _retag(c.get(g, ring.zero()).z_slice(0), tag) for g in gens}
                for c in cols]
    coeffsE = scalar_matrix_solve(
        res_cols, {g: _retag(imgE.get(g, ring.zero()).z_slice(0), tag)
                   for g in gens}, tag)
    rep.window["euler-coordinates"] = \
        [str(c) for c in coeffsE] if coeffsE is not None else "unsolved"
    return rep


def _vec_degree(ctx: GGM, vec: dict):
    degs = set()
    for g, s in vec.items():
        if not s:
            continue
        d = s.degree()
        if d is None:
            return None
        degs.add(ctx.base.mbasis.deg(g) + d)
    if not degs:
        return None
    return degs.pop() if len(degs) == 1 else None
