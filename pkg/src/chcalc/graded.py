"""Graded bases, the Koszul sign engine, shuffle enumeration, and sparse
linear operators over the coefficient tower.

Every reordering sign in the whole package is produced by `koszul_sign`;
formula-intrinsic signs live next to the formulas that own them.
"""
from __future__ import annotations

import itertools

from .coeff import Ring, Scalar


def koszul_sign(perm, degrees) -> int:
    """Sign with x_1 (.) ... (.) x_k = sign * x_{perm[0]} (.) ... (.) x_{perm[k-1]}.

    `perm` lists, for each output slot, the 0-based index of the input it holds;
    `degrees` are the (shifted) degrees of x_1..x_k in input order.
    """
    k = len(perm)
    if k != len(degrees) or sorted(perm) != list(range(k)):
        raise ValueError("perm must be a bijection matching the degree list")
    sign = 1
    for i in range(k):
        for j in range(i + 1, k):
            if perm[i] > perm[j] and degrees[perm[i]] % 2 and degrees[perm[j]] % 2:
                sign = -sign
    return sign


def shuffles(*block_sizes):
    """All permutations monotone on each of the consecutive blocks.

    Yields perms in output-slot form: block b of the output reads the inputs
    with indices perm[start_b:end_b], each block strictly increasing.  The
    count is the multinomial coefficient.
    """
    k = sum(block_sizes)
    if any(b < 0 for b in block_sizes):
        raise ValueError("negative block size")

    def rec(remaining, blocks):
        if not blocks:
            yield ()
            return
        b, rest = blocks[0], blocks[1:]
        for chosen in itertools.combinations(sorted(remaining), b):
            left = remaining - set(chosen)
            for tail in rec(left, rest):
                yield chosen + tail

    yield from rec(set(range(k)), tuple(block_sizes))


def is_shuffle(perm, block_sizes) -> bool:
    pos = 0
    for b in block_sizes:
        block = perm[pos:pos + b]
        if list(block) != sorted(block):
            return False
        pos += b
    return pos == len(perm)


def canonical_word(word, degrees):
    """Sort a symmetric word, returning (sorted_word, koszul_sign).

    A repeated odd-degree slot squares to zero, reported as sign 0.
    """
    order = sorted(range(len(word)), key=lambda i: word[i])
    for a, b in zip(order, order[1:]):
        if word[a] == word[b] and degrees[a] % 2:
            return tuple(word[i] for i in order), 0
    return tuple(word[i] for i in order), koszul_sign(order, degrees)


class GradedBasis:
    """A finite homogeneous basis with an overall shift.

    Degrees are stored unshifted; `sdeg` reports the degree after applying the
    shift (|x|' = |x| - shift).
    """

    def __init__(self, generators, shift=0):
        self.gens = tuple(g for g, _ in generators)
        self.degrees = {g: int(d) for g, d in generators}
        if len(self.degrees) != len(self.gens):
            raise ValueError("duplicate generator names")
        self.shift = int(shift)

    def deg(self, g) -> int:
        return self.degrees[g]

    def sdeg(self, g) -> int:
        return self.degrees[g] - self.shift

    def __iter__(self):
        return iter(self.gens)

    def __contains__(self, g):
        return g in self.degrees

    def __len__(self):
        return len(self.gens)

    def shifted(self, extra=1) -> "GradedBasis":
        return GradedBasis(tuple(self.degrees.items()), shift=self.shift + extra)

    def __repr__(self):
        return f"GradedBasis({sorted(self.degrees.items())}, shift={self.shift})"


class GradedElement:
    """A finite Scalar-linear combination of basis words.

    Words are tuples of generator names; symmetric words are expected in the
    canonical order produced by `canonical_word`.
    """

    __slots__ = ("ring", "terms")

    def __init__(self, ring: Ring, terms=None):
        self.ring = ring
        data = {}
        for w, s in (terms or {}).items():
            if s:
                data[w] = data[w] + s if w in data else s
        self.terms = {w: s for w, s in data.items() if s}

    def __add__(self, other):
        out = dict(self.terms)
        for w, s in other.terms.items():
            out[w] = out[w] + s if w in out else s
        return GradedElement(self.ring, out)

    def __sub__(self, other):
        return self + other.scale_scalar(self.ring.monomial(-1))

    def scale_scalar(self, s: Scalar):
        return GradedElement(self.ring, {w: c * s for w, c in self.terms.items()})

    def scale(self, q):
        return GradedElement(self.ring, {w: c.scale(q) for w, c in self.terms.items()})

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return isinstance(other, GradedElement) and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "GradedElement(0)"
        bits = [f"({s}) {w}" for w, s in sorted(self.terms.items(), key=lambda p: repr(p[0]))]
        return "GradedElement(" + " + ".join(bits) + ")"


def suspend(element, basis: GradedBasis, direction="up"):
    """Move an element between V and V[1]; the scalar action sign r s(v) =
    (-1)^{|r|} s(r v) is applied through the central audit hook (all tower
    variables are even, so it is +1, checked here)."""
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    out = {}
    for w, s in element.terms.items():
        d = s.degree()
        if d is None:
            raise ValueError("suspension needs homogeneous coefficients")
        out[w] = s if d % 2 == 0 else s.scale(-1)
    shift = 1 if direction == "up" else -1
    return GradedElement(element.ring, out), basis.shifted(shift)


# ---------------------------------------------------------------------------
# sparse linear operators over the tower
# ---------------------------------------------------------------------------
class LinOp:
    """Sparse operator on a free module with basis keys: {src: {dst: Scalar}}."""

    __slots__ = ("ring", "cols", "degree")

    def __init__(self, ring: Ring, cols=None, degree=0):
        self.ring = ring
        self.cols = {}
        for src, col in (cols or {}).items():
            clean = {d: s for d, s in col.items() if s}
            if clean:
                self.cols[src] = clean
        self.degree = degree

    @classmethod
    def identity(cls, ring, keys, degree=0):
        one = ring.one()
        return cls(ring, {k: {k: one} for k in keys}, degree=degree)

    @classmethod
    def zero(cls, ring, degree=0):
        return cls(ring, {}, degree=degree)

    def apply_gen(self, src) -> dict:
        return dict(self.cols.get(src, {}))

    def apply(self, vec: dict) -> dict:
        out = {}
        for src, c in vec.items():
            for dst, s in self.cols.get(src, {}).items():
                prod = s * c
                if dst in out:
                    prod = out[dst] + prod
                if prod:
                    out[dst] = prod
                elif dst in out:
                    del out[dst]
        return out

    def compose(self, other: "LinOp") -> "LinOp":
        """self after other."""
        cols = {}
        for src, col in other.cols.items():
            acc = {}
            for mid, s in col.items():
                for dst, t in self.cols.get(mid, {}).items():
                    prod = t * s
                    if dst in acc:
                        prod = acc[dst] + prod
                    if prod:
                        acc[dst] = prod
                    elif dst in acc:
                        del acc[dst]
            if acc:
                cols[src] = acc
        return LinOp(self.ring, cols, degree=self.degree + other.degree)

    def __add__(self, other):
        cols = {s: dict(c) for s, c in self.cols.items()}
        for src, col in other.cols.items():
            acc = cols.setdefault(src, {})
            for dst, s in col.items():
                tot = acc[dst] + s if dst in acc else s
                if tot:
                    acc[dst] = tot
                elif dst in acc:
                    del acc[dst]
        return LinOp(self.ring, cols, degree=self.degree)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, q):
        return LinOp(self.ring,
                     {s: {d: v.scale(q) for d, v in c.items()} for s, c in self.cols.items()},
                     degree=self.degree)

    def scale_scalar(self, s: Scalar):
        return LinOp(self.ring,
                     {src: {d: s * v for d, v in c.items()} for src, c in self.cols.items()},
                     degree=self.degree + (s.degree() or 0))

    def commutator(self, other: "LinOp") -> "LinOp":
        """Graded commutator [self, other] using the stored operator degrees."""
        sign = -1 if (self.degree % 2) and (other.degree % 2) else 1
        return self.compose(other) - other.compose(self).scale(sign)

    def map_entries(self, fn) -> "LinOp":
        cols = {}
        for src, col in self.cols.items():
            acc = {d: fn(v) for d, v in col.items()}
            acc = {d: v for d, v in acc.items() if v}
            if acc:
                cols[src] = acc
        return LinOp(self.ring, cols, degree=self.degree)

    def is_zero(self):
        return not self.cols

    def entries(self):
        for src in sorted(self.cols, key=repr):
            for dst in sorted(self.cols[src], key=repr):
                yield src, dst, self.cols[src][dst]

    def __eq__(self, other):
        return isinstance(other, LinOp) and (self - other).is_zero()

    def __repr__(self):
        n = sum(len(c) for c in self.cols.values())
        return f"LinOp({n} entries, degree={self.degree})"
