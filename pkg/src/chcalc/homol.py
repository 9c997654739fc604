"""Exact linear algebra over the truncated tower: complexes are flattened to
finite rational bases (generator times monomial), and all elimination runs
fraction-free over exact rationals.

Monomial exponents live in their own small layer so that Laurent windows in z
(needed when z is inverted) stay representable.
"""
from __future__ import annotations

from fractions import Fraction

from .coeff import Ring, Scalar
from .graded import LinOp

# flattened monomial keys: (lam, e, z, t) with z possibly negative


def _mon_mul(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2],
            tuple(x + y for x, y in zip(a[3], b[3])))


class FiniteComplex:
    """A finite rational complex with an exactness-checked differential.

    `diff` is a LinOp over the tower on `gens` (name -> degree); the carrier
    is gens x monomials, where the monomial set is closed under multiplication
    by the differential's coefficient monomials inside the window.
    """

    def __init__(self, ring: Ring, gens: dict, diff: LinOp, seeds=None,
                 z_window=None, check=True, name="complex"):
        self.ring = ring
        self.gens = dict(gens)
        self.diff = diff
        self.name = name
        pol = ring.policy
        self.z_window = z_window or (0, pol.z_order - 1)
        unit = (Fraction(0), 0, 0, ring._zero_t)
        seeds = list(seeds) if seeds is not None else [unit]
        self.monomials = self._closure(seeds)
        self.items = sorted(
            ((g, mon) for g in sorted(self.gens) for mon in self.monomials),
            key=repr)
        self._flat = self._flatten(diff)
        if check:
            bad = self._square_residual()
            if bad:
                raise ValueError(f"differential does not square to zero: {bad[:3]}")

    # -- carrier -------------------------------------------------------------
    def _keeps(self, mon):
        lam, e, z, t = mon
        pol = self.ring.policy
        return (self.z_window[0] <= z <= self.z_window[1]
                and lam < pol.energy_cut and sum(t) < pol.t_order
                and pol.e_window[0] <= e <= pol.e_window[1]
                and lam >= 0 and all(a >= 0 for a in t))

    def _closure(self, seeds):
        entry_keys = set()
        for _src, _dst, s in self.diff.entries():
            for key, _q in s.terms:
                entry_keys.add(key)
        seen = {m for m in seeds if self._keeps(m)}
        frontier = list(seen)
        while frontier:
            nxt = []
            for mon in frontier:
                for key in entry_keys:
                    m2 = _mon_mul(mon, key)
                    if m2 not in seen and self._keeps(m2):
                        seen.add(m2)
                        nxt.append(m2)
            frontier = nxt
        return sorted(seen)

    def item_degree(self, item) -> int:
        g, mon = item
        return self.gens[g] + self.ring.key_degree(mon)

    def degrees(self):
        return sorted({self.item_degree(it) for it in self.items})

    def basis_of_degree(self, d):
        return [it for it in self.items if self.item_degree(it) == d]

    # -- flattening ------------------------------------------------------------
    def _flatten(self, op: LinOp) -> dict:
        flat = {}
        for item in self.items:
            g, mon = item
            col = {}
            for h, s in op.cols.get(g, {}).items():
                for key, q in s.terms:
                    m2 = _mon_mul(mon, key)
                    if not self._keeps(m2):
                        continue
                    tgt = (h, m2)
                    col[tgt] = col.get(tgt, Fraction(0)) + q
            col = {k: v for k, v in col.items() if v}
            if col:
                flat[item] = col
        return flat

    def flatten_linop(self, op: LinOp) -> dict:
        return self._flatten(op)

    def d_flat(self, item) -> dict:
        return dict(self._flat.get(item, {}))

    def _square_residual(self):
        bad = []
        for item in self.items:
            acc = {}
            for mid, q in self._flat.get(item, {}).items():
                for tgt, r in self._flat.get(mid, {}).items():
                    acc[tgt] = acc.get(tgt, Fraction(0)) + q * r
            if any(acc.values()):
                bad.append((item, {k: v for k, v in acc.items() if v}))
        return bad

    # -- homology ---------------------------------------------------------------
    def kernel_image(self, degree, reverse=False):
        """Kernel basis (as item-coefficient dicts) and the image from below."""
        dom = self.basis_of_degree(degree)
        ker = kernel_vectors([self.d_flat(it) for it in dom], dom, reverse=reverse)
        below = self.basis_of_degree(degree - 1)
        img = [self.d_flat(it) for it in below]
        img = [v for v in img if v]
        return ker, img

    def cohomology(self, degree, reverse=False):
        """Rank and representatives at one degree."""
        ker, img = self.kernel_image(degree, reverse=reverse)
        img_rank = rank_of(img, reverse=reverse)
        reps = quotient_basis(ker, img, reverse=reverse)
        if len(reps) != len(ker) - img_rank:
            raise AssertionError("rank bookkeeping mismatch")
        return len(reps), reps

    def all_ranks(self, reverse=False) -> dict:
        return {d: self.cohomology(d, reverse=reverse)[0] for d in self.degrees()}


# ---------------------------------------------------------------------------
# elimination
# ---------------------------------------------------------------------------
def _key_order(vecs, reverse=False):
    keys = set()
    for v in vecs:
        keys.update(v)
    return sorted(keys, key=repr, reverse=reverse)


def rref(vectors, reverse=False):
    """Reduced row echelon form of the given vectors (dicts key->Fraction).

    Returns (pivot keys, reduced rows)."""
    rows = [dict(v) for v in vectors if v]
    order = _key_order(rows, reverse)
    pivots, reduced = [], []
    for key in order:
        pivot_row = None
        for row in rows:
            if row.get(key):
                pivot_row = row
                break
        if pivot_row is None:
            continue
        rows.remove(pivot_row)
        c = pivot_row[key]
        pivot_row = {k: v / c for k, v in pivot_row.items() if v}
        for other in list(rows):
            if other.get(key):
                f = other[key]
                for k, v in pivot_row.items():
                    other[k] = other.get(k, Fraction(0)) - f * v
                    if not other[k]:
                        del other[k]
            if not other:
                rows.remove(other)
        for prev in reduced:
            if prev.get(key):
                f = prev[key]
                for k, v in pivot_row.items():
                    prev[k] = prev.get(k, Fraction(0)) - f * v
                    if not prev[k]:
                        del prev[k]
        pivots.append(key)
        reduced.append(pivot_row)
    return pivots, reduced


def rank_of(vectors, reverse=False) -> int:
    return len(rref(vectors, reverse)[0])


def reduce_against(vec, pivots, reduced):
    out = dict(vec)
    for key, row in zip(pivots, reduced):
        if out.get(key):
            f = out[key]
            for k, v in row.items():
                out[k] = out.get(k, Fraction(0)) - f * v
                if not out[k]:
                    del out[k]
    return out


def kernel_vectors(images, labels, reverse=False):
    """Kernel of the map e_i -> images[i], as dicts over `labels`."""
    order = _key_order(images, reverse)
    aug = []
    for lab, img in zip(labels, images):
        aug.append((dict(img), {lab: Fraction(1)}))
    kernel = []
    for key in order:
        pivot = None
        for pair in aug:
            if pair[0].get(key):
                pivot = pair
                break
        if pivot is None:
            continue
        aug.remove(pivot)
        pr, pc = pivot
        c = pr[key]
        pr = {k: v / c for k, v in pr.items() if v}
        pc = {k: v / c for k, v in pc.items() if v}
        for row, comb in aug:
            if row.get(key):
                f = row[key]
                for k, v in pr.items():
                    row[k] = row.get(k, Fraction(0)) - f * v
                    if not row[k]:
                        del row[k]
                for k, v in pc.items():
                    comb[k] = comb.get(k, Fraction(0)) - f * v
                    if not comb[k]:
                        del comb[k]
    for row, comb in aug:
        if not row and comb:
            kernel.append(comb)
    return kernel


def quotient_basis(ker, img, reverse=False):
    """Representatives of ker modulo span(img)."""
    pivots, reduced = rref(img, reverse)
    reps, chosen = [], []
    for v in ker:
        resid = reduce_against(v, pivots, reduced)
        if not resid:
            continue
        resid2 = reduce_against(resid, [p for p, _ in chosen],
                                [r for _, r in chosen])
        if not resid2:
            continue
        key = sorted(resid2, key=repr)[0]
        c = resid2[key]
        norm = {k: val / c for k, val in resid2.items()}
        chosen.append((key, norm))
        reps.append(v)
    return reps


def in_span(vec, vectors, reverse=False) -> bool:
    pivots, reduced = rref(vectors, reverse)
    return not reduce_against(vec, pivots, reduced)


def solve_in_span(vec, vectors):
    """Coefficients writing vec as a combination of `vectors`, or None."""
    aug = [(dict(v), {i: Fraction(1)}) for i, v in enumerate(vectors)]
    order = _key_order([v for v, _ in aug] + [vec])
    target = dict(vec)
    coeffs = {}
    for key in order:
        pivot = None
        for pair in aug:
            if pair[0].get(key):
                pivot = pair
                break
        if pivot is None:
            continue
        aug.remove(pivot)
        pr, pc = pivot
        c = pr[key]
        pr = {k: v / c for k, v in pr.items() if v}
        pc = {k: v / c for k, v in pc.items() if v}
        for row, comb in aug:
            if row.get(key):
                f = row.pop(key)
                for k, v in pr.items():
                    if k != key:
                        row[k] = row.get(k, Fraction(0)) - f * v
                        if not row[k]:
                            del row[k]
                row.pop(key, None)
                for k, v in pc.items():
                    comb[k] = comb.get(k, Fraction(0)) - f * v
                    if not comb[k]:
                        del comb[k]
        if target.get(key):
            f = target.pop(key)
            for k, v in pr.items():
                if k != key:
                    target[k] = target.get(k, Fraction(0)) - f * v
                    if not target[k]:
                        del target[k]
            target.pop(key, None)
            for k, v in pc.items():
                coeffs[k] = coeffs.get(k, Fraction(0)) + f * v
    if target:
        return None
    return coeffs


# ---------------------------------------------------------------------------
# cyclic homology and induced maps
# ---------------------------------------------------------------------------
def cyclic_complex(cat, variant="negative", z_order=None, word_bound=None,
                   use_deformation=False) -> FiniteComplex:
    """The rotation-extended complex of reduced cyclic words over the z-window."""
    from .hoch import connes_B, hoch_b
    from .colang import add_into

    ring = cat.ring
    N = z_order if z_order is not None else ring.policy.z_order
    W = word_bound or cat.max_slots
    words = cat.chain_words(W)
    gens = {w: cat.word_sdeg(w) for w in words}
    zs = ring.z(1)
    cols = {}
    for w in words:
        col = dict(hoch_b(cat, w, W, use_deformation=use_deformation))
        for k, v in connes_B(cat, w, W).items():
            add_into(col, k, zs * v)
        if col:
            cols[w] = col
    diff = LinOp(ring, cols, degree=1)
    if variant == "negative":
        zwin = (0, N - 1)
        seeds = [(Fraction(0), 0, j, ring._zero_t) for j in range(N)]
    elif variant == "periodic":
        zwin = (-(N - 1), N - 1)
        seeds = [(Fraction(0), 0, j, ring._zero_t) for j in range(-(N - 1), N)]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    cx = FiniteComplex(ring, gens, diff, seeds=seeds, z_window=zwin,
                       name=f"cyclic-{variant}:{cat.name}")
    cx.validity_words = W - N
    return cx


def cyclic_homology(cat, variant="negative", z_order=None, word_bound=None,
                    use_deformation=False, reverse=False):
    """Ranks per degree with the validity window of the truncation."""
    cx = cyclic_complex(cat, variant, z_order, word_bound,
                        use_deformation=use_deformation)
    if cx.validity_words <= 0:
        raise ValueError("word bound too small for this z-order")
    ranks = cx.all_ranks(reverse=reverse)
    return {
        "variant": variant,
        "ranks": ranks,
        "validity_words": cx.validity_words,
        "z_window": list(cx.z_window),
        "complex": cx,
    }


def induced_map(f0: LinOp, src: FiniteComplex, dst: FiniteComplex, degree,
                check_chain_map=True):
    """Matrix of a chain map on cohomology at one degree; refuses non-chain
    maps and is checked to be representative independent by callers."""
    flat_f = src.flatten_linop(f0)
    if check_chain_map:
        for item in src.items:
            lhs = _compose_flat(dst._flat, flat_f, item)
            rhs = _compose_flat(flat_f, src._flat, item)
            diff = _sub(lhs, rhs)
            if diff:
                raise ValueError(f"not a chain map at {item}: {diff}")
    _, src_reps = src.cohomology(degree)
    rank_dst, dst_reps = dst.cohomology(degree)
    _, dst_img = dst.kernel_image(degree)
    matrix = []
    for v in src_reps:
        img = _apply_flat(flat_f, v)
        coeffs = solve_in_span(img, dst_reps + dst_img)
        if coeffs is None:
            raise ValueError("image misses the target cohomology")
        matrix.append([coeffs.get(j, Fraction(0)) for j in range(len(dst_reps))])
    return matrix, src_reps, dst_reps


def _apply_flat(flat, vec):
    out = {}
    for item, q in vec.items():
        for tgt, r in flat.get(item, {}).items():
            out[tgt] = out.get(tgt, Fraction(0)) + q * r
            if not out[tgt]:
                del out[tgt]
    return out


def _compose_flat(flat2, flat1, item):
    return _apply_flat(flat2, flat1.get(item, {}))


def _sub(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, Fraction(0)) - v
        if not out[k]:
            del out[k]
    return out
