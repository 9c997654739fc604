"""Parser and evaluator for the brace notation of operadic chain operations.

Grammar: an expression is either an application `sym{e1, ..., en}` (cochain
valued) or a braced list `{e1, ..., en}` (chain valued, the outer output
vertex left implicit); atoms are `one` (unit insertion), `in` (the chain
argument), or a bound cochain symbol; a bare symbol consumes a plain run of
input slots, while braces after a symbol let other expressions and the wrap
marker sit among its arguments.

Chain evaluation distributes the slots of a cyclic word, in cyclic order,
over the expression.  Three placement rules pin the combinatorics:
the output word starts exactly at the first item (no leading gap), the single
`in` marker sits exactly at the word's wrap-around point, and the slot right
after the wrap stays a bare slot of the same argument list.  Signs are Koszul
signs of the rearrangement read off the output, cochain symbols weighing
their shifted degree and unit insertions weighing minus one.
"""
from __future__ import annotations

from .colang import add_into
from .graded import koszul_sign


class BraceError(ValueError):
    pass


class Node:
    def __repr__(self):
        return f"BraceExpr({self.show()})"


class One(Node):
    def show(self):
        return "one"


class In(Node):
    def show(self):
        return "in"


class Sym(Node):
    def __init__(self, name):
        self.name = name

    def show(self):
        return self.name


class App(Node):
    def __init__(self, name, args):
        self.name = name
        self.args = list(args)

    def show(self):
        return f"{self.name}{{{', '.join(a.show() for a in self.args)}}}"


class Brace(Node):
    def __init__(self, items):
        self.items = list(items)

    def show(self):
        return f"{{{', '.join(a.show() for a in self.items)}}}"


_UNIT_ALIASES = {"one", "\U0001d7d9"}


def parse(text: str) -> Node:
    toks = _tokenize(text)
    node, pos = _parse_expr(toks, 0)
    if pos != len(toks):
        raise BraceError(f"trailing input: {toks[pos:]}")
    return node


def _tokenize(text):
    toks, buf = [], []
    for ch in text:
        if ch in "{},":
            if buf:
                toks.append("".join(buf))
                buf = []
            toks.append(ch)
        elif ch.isspace():
            if buf:
                toks.append("".join(buf))
                buf = []
        else:
            buf.append(ch)
    if buf:
        toks.append("".join(buf))
    return toks


def _parse_expr(toks, pos):
    if pos >= len(toks):
        raise BraceError("unexpected end of expression")
    t = toks[pos]
    if t == "{":
        items, pos = _parse_list(toks, pos + 1)
        return Brace(items), pos
    if t in ("}", ","):
        raise BraceError(f"unexpected {t!r}")
    if pos + 1 < len(toks) and toks[pos + 1] == "{":
        args, newpos = _parse_list(toks, pos + 2)
        return App(t, args), newpos
    return _atom(t), pos + 1


def _parse_list(toks, pos):
    items = []
    if pos < len(toks) and toks[pos] == "}":
        return items, pos + 1
    while True:
        node, pos = _parse_expr(toks, pos)
        items.append(node)
        if pos >= len(toks):
            raise BraceError("missing closing brace")
        if toks[pos] == ",":
            pos += 1
            continue
        if toks[pos] == "}":
            return items, pos + 1
        raise BraceError(f"expected ',' or '}}', got {toks[pos]!r}")


def _atom(tok):
    if tok == "in":
        return In()
    if tok in _UNIT_ALIASES:
        return One()
    return Sym(tok)


def count_in(node) -> int:
    if isinstance(node, In):
        return 1
    if isinstance(node, App):
        return sum(count_in(a) for a in node.args)
    if isinstance(node, Brace):
        return sum(count_in(a) for a in node.items)
    return 0


def symbols(node) -> set:
    if isinstance(node, Sym):
        return {node.name}
    if isinstance(node, App):
        return {node.name}.union(*[symbols(a) for a in node.args]) \
            if node.args else {node.name}
    if isinstance(node, Brace):
        out = set()
        for a in node.items:
            out |= symbols(a)
        return out
    return set()


# ---------------------------------------------------------------------------
# evaluation
#
# Parts carry the assembled output in reading order:
#   ("x", orig_index, gen)      a raw input slot
#   ("gen", name, coeff, toks)  a cochain output with its sign tokens
#   ("unit", obj)               an inserted unit
# ---------------------------------------------------------------------------
def eval_chain(expr: Node, bindings: dict, cat, word, max_slots=None) -> dict:
    if not isinstance(expr, Brace):
        raise BraceError("chain evaluation needs a braced list")
    if count_in(expr) != 1:
        raise BraceError("chain expressions need exactly one 'in'")
    missing = {s for s in symbols(expr) if s not in bindings}
    if missing:
        raise BraceError(f"unbound cochain symbols {sorted(missing)}")
    bound = max_slots or cat.max_slots
    n = len(word)
    out = {}
    for r in range(n):
        stream = word[r:] + word[:r]
        orig = list(range(r, n)) + list(range(0, r))
        wrap = (n - r) % n
        for endpos, parts in _seq(expr.items, bindings, cat, stream, orig, 0,
                                  wrap, top=True, first=True):
            if endpos != n:
                continue
            _accumulate(out, parts, bindings, cat, word, bound)
    return out


def eval_cochain(expr: Node, bindings: dict, cat, word) -> dict:
    if not isinstance(expr, App):
        raise BraceError("cochain evaluation needs an application")
    if count_in(expr) != 0:
        raise BraceError("cochain expressions cannot contain 'in'")
    n = len(word)
    stream, orig = tuple(word), list(range(n))
    out = {}
    for endpos, part in _node(expr, bindings, cat, stream, orig, 0, wrap=None):
        if endpos != n:
            continue
        _, gen, coeff, tokens = part
        sign = _sign(tokens, bindings, cat, word)
        if sign:
            add_into(out, gen, coeff.scale(sign))
    return out


def _seq(items, bindings, cat, stream, orig, pos, wrap, top, first=False,
         min_gap=0):
    """Run an item list against the stream from `pos`.

    Yields (endpos, parts).  `first` pins the no-leading-gap rule at the top
    level; `min_gap` enforces the bare slot right after a wrap marker.  With
    no items left, a trailing run of any admissible length is consumed (the
    whole remainder at top level).
    """
    n = len(stream)
    if not items:
        if top:
            if n - pos >= min_gap:
                yield n, [("x", orig[i], stream[i]) for i in range(pos, n)]
        else:
            for t in range(min_gap, n - pos + 1):
                yield pos + t, [("x", orig[pos + i], stream[pos + i])
                                for i in range(t)]
        return
    head, rest = items[0], items[1:]
    if first and top:
        gaps = (min_gap,) if min_gap else (0,)
    else:
        gaps = range(min_gap, n - pos + 1)
    for gap in gaps:
        if pos + gap > n:
            continue
        gparts = [("x", orig[pos + i], stream[pos + i]) for i in range(gap)]
        p2 = pos + gap
        if isinstance(head, In):
            if p2 != wrap or wrap is None:
                continue
            for endpos, tparts in _seq(rest, bindings, cat, stream, orig, p2,
                                       wrap, top=top, min_gap=1):
                yield endpos, gparts + tparts
            continue
        if isinstance(head, One):
            for obj in cat.objects:
                for endpos, tparts in _seq(rest, bindings, cat, stream, orig,
                                           p2, wrap, top=top):
                    yield endpos, gparts + [("unit", obj)] + tparts
            continue
        for np, part in _node(head, bindings, cat, stream, orig, p2, wrap):
            for endpos, tparts in _seq(rest, bindings, cat, stream, orig, np,
                                       wrap, top=top):
                yield endpos, gparts + [part] + tparts


def _node(node, bindings, cat, stream, orig, pos, wrap):
    """Evaluate a cochain node; yields (endpos, ("gen", out, coeff, tokens))."""
    if node.name not in bindings:
        raise BraceError(f"unbound cochain symbol {node.name!r}")
    phi = bindings[node.name]
    n = len(stream)
    if isinstance(node, Sym):
        for length in range(0, n - pos + 1):
            argword = tuple(stream[pos:pos + length])
            for g, c in phi.apply(argword).items():
                tokens = [("sym", node.name)] + \
                    [("x", orig[pos + i]) for i in range(length)]
                yield pos + length, ("gen", g, c, tokens)
        return
    for endpos, parts in _seq(node.args, bindings, cat, stream, orig, pos,
                              wrap, top=False):
        argword, coeff, tokens = [], None, [("sym", node.name)]
        for p in parts:
            if p[0] == "x":
                argword.append(p[2])
                tokens.append(("x", p[1]))
            elif p[0] == "gen":
                argword.append(p[1])
                coeff = p[2] if coeff is None else coeff * p[2]
                tokens.extend(p[3])
            elif p[0] == "unit":
                argword.append(cat.units[p[1]])
                tokens.append(("one",))
        for g, c in phi.apply(tuple(argword)).items():
            total = c if coeff is None else c * coeff
            yield endpos, ("gen", g, total, tokens)


def _accumulate(out, parts, bindings, cat, word, bound):
    new_word, coeff, tokens = [], None, []
    for p in parts:
        if p[0] == "x":
            new_word.append(p[2])
            tokens.append(("x", p[1]))
        elif p[0] == "gen":
            new_word.append(p[1])
            coeff = p[2] if coeff is None else coeff * p[2]
            tokens.extend(p[3])
        elif p[0] == "unit":
            new_word.append(cat.units[p[1]])
            tokens.append(("one",))
    new_word = tuple(new_word)
    if not new_word or len(new_word) > bound:
        return
    if not cat.composable_cyclic(new_word) or not cat.reduced_word(new_word):
        return
    sign = _sign(tokens, bindings, cat, word)
    if sign == 0:
        return
    coeff = cat.ring.one() if coeff is None else coeff
    add_into(out, new_word, coeff.scale(sign))


def _sign(tokens, bindings, cat, word):
    """Koszul sign from (atoms in reading order, then slots in input order)
    to the final token order."""
    atoms = [t for t in tokens if t[0] in ("sym", "one")]
    degrees = [bindings[a[1]].sdeg if a[0] == "sym" else -1 for a in atoms]
    degrees.extend(cat.sdeg(g) for g in word)
    perm, atom_cursor = [], 0
    for t in tokens:
        if t[0] == "x":
            perm.append(len(atoms) + t[1])
        else:
            perm.append(atom_cursor)
            atom_cursor += 1
    if len(perm) != len(degrees):
        raise BraceError("internal token mismatch")
    return koszul_sign(tuple(perm), degrees)
