"""Truncated coefficient tower: rationals, energy variable T, Laurent variable e,
and formal variables z, t0..tm, with non-archimedean norms.

Every value is reduced modulo a truncation policy at construction time, so all
arithmetic stays exact and finite.  T-exponents are exact rationals; e is an
invertible degree-2 variable confined to a finite window; z and the t-variables
are power-series variables cut at a fixed order.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable

# subring tags, ordered by inclusion
TAG_Q = "Q"
TAG_NOV0 = "Lambda0"
TAG_NOV = "Lambda"
_TAG_ORDER = {TAG_Q: 0, TAG_NOV0: 1, TAG_NOV: 2}


class TagError(ValueError):
    """Raised when values from incompatible (sub)rings are mixed."""


class EnergyDomainError(ValueError):
    """Raised when a negative T-exponent appears under a Lambda0 tag."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected rational, got {type(x).__name__}")


class TruncationPolicy:
    """Finite truncation window for the coefficient tower.

    z_order / energy_cut / t_order are exclusive upper bounds; e_window is an
    inclusive interval of allowed e-powers.
    """

    __slots__ = ("z_order", "energy_cut", "t_order", "e_window")

    def __init__(self, z_order=4, energy_cut=3, t_order=4, e_window=(-8, 8)):
        self.z_order = int(z_order)
        self.energy_cut = _frac(energy_cut)
        self.t_order = int(t_order)
        self.e_window = (int(e_window[0]), int(e_window[1]))
        if self.z_order < 0 or self.t_order < 0 or self.energy_cut < 0:
            raise ValueError("truncation bounds must be non-negative")
        if self.e_window[0] > self.e_window[1]:
            raise ValueError("empty e-window")

    def keeps(self, lam: Fraction, e: int, z: int, t: tuple) -> bool:
        return (
            z < self.z_order
            and lam < self.energy_cut
            and sum(t) < self.t_order
            and self.e_window[0] <= e <= self.e_window[1]
        )

    def refines(self, other: "TruncationPolicy") -> bool:
        """True if self keeps at most what other keeps (componentwise)."""
        return (
            self.z_order <= other.z_order
            and self.energy_cut <= other.energy_cut
            and self.t_order <= other.t_order
            and self.e_window[0] >= other.e_window[0]
            and self.e_window[1] <= other.e_window[1]
        )

    def as_dict(self):
        return {
            "z_order": self.z_order,
            "energy_cut": str(self.energy_cut),
            "t_order": self.t_order,
            "e_window": list(self.e_window),
        }

    def __eq__(self, other):
        return isinstance(other, TruncationPolicy) and self.as_dict() == other.as_dict()

    def __repr__(self):
        return (f"TruncationPolicy(z_order={self.z_order}, energy_cut={self.energy_cut},"
                f" t_order={self.t_order}, e_window={self.e_window})")


class Ring:
    """The ambient tower: a truncation policy plus the declared t-variables.

    t-variables must have even degree; the graded sign rule for adjoined
    variables is then identically +1, which `sign_swap_scalar` records.
    """

    def __init__(self, policy: TruncationPolicy | None = None,
                 t_vars: Iterable[tuple[str, int]] = (), norm_constant=2):
        self.policy = policy or TruncationPolicy()
        self.t_names = tuple(n for n, _ in t_vars)
        self.t_degrees = tuple(int(d) for _, d in t_vars)
        for name, d in zip(self.t_names, self.t_degrees):
            if d % 2 != 0:
                raise ValueError(f"t-variable {name!r} must have even degree")
        if len(set(self.t_names)) != len(self.t_names):
            raise ValueError("duplicate t-variable names")
        self.norm_constant = _frac(norm_constant)
        if self.norm_constant <= 1:
            raise ValueError("norm constant must exceed 1")
        self._zero_t = (0,) * len(self.t_names)

    # -- constructors -------------------------------------------------
    def scalar(self, terms, tag=None) -> "Scalar":
        """Build a Scalar from {(lam, e, z, t): coeff} data."""
        return Scalar(self, terms, tag=tag)

    def zero(self, tag=TAG_Q) -> "Scalar":
        return Scalar(self, {}, tag=tag)

    def one(self) -> "Scalar":
        return self.monomial()

    def monomial(self, coeff=1, lam=0, e=0, z=0, t=None, tag=None) -> "Scalar":
        t = self._zero_t if t is None else tuple(int(a) for a in t)
        return Scalar(self, {(_frac(lam), int(e), int(z), t): _frac(coeff)}, tag=tag)

    def T(self, lam, coeff=1) -> "Scalar":
        return self.monomial(coeff=coeff, lam=lam)

    def e(self, k=1, coeff=1) -> "Scalar":
        return self.monomial(coeff=coeff, e=k)

    def z(self, j=1, coeff=1) -> "Scalar":
        return self.monomial(coeff=coeff, z=j)

    def t(self, i, power=1, coeff=1) -> "Scalar":
        alpha = list(self._zero_t)
        alpha[i] += power
        return self.monomial(coeff=coeff, t=alpha)

    def t_index(self, name: str) -> int:
        return self.t_names.index(name)

    # -- grading -------------------------------------------------------
    def key_degree(self, key) -> int:
        _, e, z, t = key
        return 2 * e + 2 * z + sum(a * d for a, d in zip(t, self.t_degrees))

    def sign_swap_scalar(self, key, other_degree: int) -> int:
        # t^alpha r = (-1)^{|r||t^alpha|} r t^alpha; all adjoined variables are
        # even here, so the sign is +1, kept as the single audited code path.
        return 1 if (self.key_degree(key) * other_degree) % 2 == 0 else -1

    def compatible(self, other: "Ring") -> bool:
        return (self.t_names == other.t_names and self.t_degrees == other.t_degrees
                and self.policy == other.policy)

    def as_dict(self):
        d = self.policy.as_dict()
        d["t"] = [{"name": n, "degree": deg} for n, deg in zip(self.t_names, self.t_degrees)]
        d["norm_constant"] = str(self.norm_constant)
        return d

    def __repr__(self):
        return f"Ring({self.policy!r}, t={list(zip(self.t_names, self.t_degrees))})"


def join_tags(a: str, b: str) -> str:
    if a not in _TAG_ORDER or b not in _TAG_ORDER:
        raise TagError(f"unknown ring tag: {a!r}/{b!r}")
    return a if _TAG_ORDER[a] >= _TAG_ORDER[b] else b


class Scalar:
    """An element of the truncated tower: finite sum of q * T^lam * e^k * z^j * t^alpha.

    Immutable; terms are kept in canonical sorted order with no zeros.  The tag
    records the claimed T-exponent subring (Q: lam = 0, Lambda0: lam >= 0,
    Lambda: any lam).
    """

    __slots__ = ("ring", "terms", "tag")

    def __init__(self, ring: Ring, terms, tag=None):
        self.ring = ring
        nt = len(ring.t_names)
        acc = {}
        for key, c in (terms.items() if isinstance(terms, dict) else terms):
            lam, e, z, t = key
            lam = _frac(lam)
            t = tuple(int(a) for a in t)
            c = _frac(c)
            if len(t) != nt:
                raise ValueError("t multi-index length mismatch")
            if z < 0 or any(a < 0 for a in t):
                raise ValueError("negative z or t exponent")
            k = (lam, e, z, t)
            if not ring.policy.keeps(lam, e, z, t):
                continue
            acc[k] = acc.get(k, Fraction(0)) + c
        items = tuple(sorted((k, c) for k, c in acc.items() if c != 0))
        self.terms = items
        if tag is None:
            if all(k[0] == 0 for k, _ in items):
                tag = TAG_Q
            elif all(k[0] >= 0 for k, _ in items):
                tag = TAG_NOV0
            else:
                tag = TAG_NOV
        if tag == TAG_NOV0 and any(k[0] < 0 for k, _ in items):
            raise EnergyDomainError("negative T-exponent under a Lambda0 tag")
        if tag == TAG_Q and any(k[0] != 0 for k, _ in items):
            raise TagError("nonzero T-exponent under a Q tag")
        self.tag = tag

    # -- basics ---------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, int):
            other = self.ring.monomial(other)
        return isinstance(other, Scalar) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def _check(self, other: "Scalar"):
        if not isinstance(other, Scalar):
            raise TypeError(f"expected Scalar, got {type(other).__name__}")
        if self.ring is not other.ring and not self.ring.compatible(other.ring):
            raise TagError("scalars from different rings")

    def __add__(self, other):
        self._check(other)
        acc = dict(self.terms)
        for k, c in other.terms:
            acc[k] = acc.get(k, Fraction(0)) + c
        return Scalar(self.ring, acc, tag=join_tags(self.tag, other.tag))

    def __neg__(self):
        return Scalar(self.ring, {k: -c for k, c in self.terms}, tag=self.tag)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._check(other)
        acc = {}
        keeps = self.ring.policy.keeps
        for (l1, e1, z1, t1), c1 in self.terms:
            for (l2, e2, z2, t2), c2 in other.terms:
                lam, e, z = l1 + l2, e1 + e2, z1 + z2
                t = tuple(a + b for a, b in zip(t1, t2))
                if not keeps(lam, e, z, t):
                    continue
                k = (lam, e, z, t)
                acc[k] = acc.get(k, Fraction(0)) + c1 * c2
        return Scalar(self.ring, acc, tag=join_tags(self.tag, other.tag))

    __rmul__ = __mul__

    def scale(self, q) -> "Scalar":
        q = _frac(q)
        return Scalar(self.ring, {k: c * q for k, c in self.terms}, tag=self.tag)

    def __pow__(self, n: int):
        if n < 0:
            return self.unit_inverse() ** (-n)
        out = self.ring.one()
        for _ in range(n):
            out = out * self
        return out

    def truncate(self, policy: TruncationPolicy) -> "Scalar":
        sub = Ring(policy, list(zip(self.ring.t_names, self.ring.t_degrees)),
                   self.ring.norm_constant)
        return Scalar(sub, dict(self.terms), tag=self.tag)

    # -- structure -------------------------------------------------------
    def degree(self):
        """Total degree if homogeneous (zero counts as any degree), else None."""
        degs = {self.ring.key_degree(k) for k, _ in self.terms}
        if not degs:
            return 0
        if len(degs) == 1:
            return degs.pop()
        return None

    def coefficient(self, lam=0, e=0, z=0, t=None) -> Fraction:
        t = self.ring._zero_t if t is None else tuple(t)
        key = (_frac(lam), e, z, t)
        for k, c in self.terms:
            if k == key:
                return c
        return Fraction(0)

    def z_slice(self, j: int) -> "Scalar":
        """The coefficient of z^j, returned with the z-power removed."""
        return Scalar(self.ring,
                      {(l, e, 0, t): c for (l, e, z, t), c in self.terms if z == j},
                      tag=self.tag)

    def max_z(self) -> int:
        return max((k[2] for k, _ in self.terms), default=0)

    def derivative(self, which, index=0) -> "Scalar":
        """Coefficientwise derivation: 'z' -> d/dz, 'e' -> e d/de, 't' -> d/dt_i."""
        acc = {}
        for (lam, e, z, t), c in self.terms:
            if which == "z":
                if z > 0:
                    acc[(lam, e, z - 1, t)] = acc.get((lam, e, z - 1, t), Fraction(0)) + c * z
            elif which == "e":
                if e != 0:
                    acc[(lam, e, z, t)] = acc.get((lam, e, z, t), Fraction(0)) + c * e
            elif which == "t":
                if t[index] > 0:
                    t2 = t[:index] + (t[index] - 1,) + t[index + 1:]
                    acc[(lam, e, z, t2)] = acc.get((lam, e, z, t2), Fraction(0)) + c * t[index]
            else:
                raise ValueError(f"unknown derivation {which!r}")
        return Scalar(self.ring, acc, tag=self.tag)

    def unit_inverse(self) -> "Scalar":
        """Inverse of a unit: leading part c*T^lam*e^k, remainder truncation-nilpotent."""
        if not self.terms:
            raise ZeroDivisionError("zero scalar")
        lam0 = min(k[0] for k, _ in self.terms)
        lead = [(k, c) for k, c in self.terms if k[0] == lam0 and k[2] == 0 and sum(k[3]) == 0]
        if len(lead) != 1:
            raise ZeroDivisionError("not a unit in the truncated tower")
        (lam, e, _z, _t), c = lead[0]
        if self.tag != TAG_NOV and lam != 0:
            raise EnergyDomainError(f"not a unit under tag {self.tag}")
        tag = self.tag if lam == 0 else TAG_NOV
        inv_lead = self.ring.monomial(coeff=Fraction(1, 1) / c, lam=-lam, e=-e, tag=tag)
        rest = inv_lead * self - self.ring.one()
        if any(k[0] <= 0 and k[2] == 0 and sum(k[3]) == 0 for k, _ in rest.terms):
            raise ZeroDivisionError("remainder is not truncation-nilpotent")
        out, power, sign = self.ring.one(), rest, -1
        while power:
            out = out + power.scale(sign)
            power, sign = power * rest, -sign
        inv = out * inv_lead
        if inv * self != self.ring.one():
            # e-powers live in a finite window, not an ideal; inverses whose
            # terms drift out of the window cannot be represented faithfully
            raise ZeroDivisionError("inverse falls outside the e-window")
        return inv

    # -- norms -------------------------------------------------------------
    def norm(self) -> "Norm":
        best = None
        for (lam, _e, _z, t), _c in self.terms:
            cand = Norm(lam, sum(t), self.ring.norm_constant)
            if best is None or cand > best:
                best = cand
        return best if best is not None else Norm.zero(self.ring.norm_constant)

    # -- display -------------------------------------------------------------
    def __repr__(self):
        return f"Scalar({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (lam, e, z, t), c in self.terms:
            factors = []
            if c != 1 or (lam == 0 and e == 0 and z == 0 and not any(t)):
                factors.append(str(c))
            if lam:
                factors.append(f"T^{lam}")
            if e:
                factors.append(f"e^{e}")
            if z:
                factors.append(f"z^{z}")
            for name, a in zip(self.ring.t_names, t):
                if a:
                    factors.append(f"{name}^{a}")
            parts.append(" * ".join(factors) if factors else "1")
        return " + ".join(parts)


class Norm:
    """Exact non-archimedean norm value exp(-lam) * C^(-weight).

    Comparison never goes through floats when the exponent pairs decide it;
    genuinely mixed cases are settled with high-precision interval arithmetic,
    which is exact because lam + weight*log(C) = lam' + weight'*log(C) forces
    equality of both components for rational C > 1.
    """

    __slots__ = ("lam", "weight", "C", "_zero")

    def __init__(self, lam, weight, C, _zero=False):
        self.lam = _frac(lam)
        self.weight = int(weight)
        self.C = _frac(C)
        self._zero = _zero

    @classmethod
    def zero(cls, C):
        return cls(0, 0, C, _zero=True)

    @classmethod
    def one(cls, C):
        return cls(0, 0, C)

    def is_zero(self):
        return self._zero

    def __mul__(self, other):
        if self._zero or other._zero:
            return Norm.zero(self.C)
        return Norm(self.lam + other.lam, self.weight + other.weight, self.C)

    def _key(self):
        # smaller key <=> smaller norm; norm = exp(-(lam + weight*ln C))
        import mpmath

        with mpmath.workdps(60):
            return -(mpmath.mpf(self.lam.numerator) / self.lam.denominator
                     + self.weight * mpmath.log(mpmath.mpf(self.C.numerator) / self.C.denominator))

    def _cmp(self, other):
        if self._zero and other._zero:
            return 0
        if self._zero:
            return -1
        if other._zero:
            return 1
        if (self.lam, self.weight) == (other.lam, other.weight):
            return 0
        if self.lam >= other.lam and self.weight >= other.weight:
            return -1
        if self.lam <= other.lam and self.weight <= other.weight:
            return 1
        return -1 if self._key() < other._key() else 1

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __eq__(self, other):
        return isinstance(other, Norm) and self._cmp(other) == 0

    def lt_one(self):
        if self._zero:
            return True
        if (self.lam, self.weight) == (0, 0):
            return False
        if self.lam >= 0 and self.weight >= 0:
            return True
        return self._cmp(Norm.one(self.C)) < 0

    def le_one(self):
        return self._zero or self._cmp(Norm.one(self.C)) <= 0

    def value(self) -> float:
        if self._zero:
            return 0.0
        return math.exp(-float(self.lam)) * float(self.C) ** (-self.weight)

    def __repr__(self):
        if self._zero:
            return "Norm(0)"
        return f"Norm(exp(-{self.lam}) * C^-{self.weight})"


_FACTOR_RE = re.compile(
    r"^(?:(?P<q>-?\d+(?:/\d+)?)|T\^(?P<lam>-?\d+(?:/\d+)?)|e\^(?P<e>-?\d+)"
    r"|z(?:\^(?P<z>\d+))?|(?P<t>[A-Za-z_]\w*)(?:\^(?P<a>\d+))?)$"
)


def parse_scalar(ring: Ring, text: str, tag=None) -> Scalar:
    """Parse the scalar literal grammar: sums of `q * T^lam * e^k * z^j * t0^a0...`."""
    text = text.strip()
    if not text or text == "0":
        return ring.zero()
    total = ring.zero()
    for chunk in _split_sum(text):
        sign, body = chunk
        coeff = Fraction(sign)
        lam, e, z = Fraction(0), 0, 0
        alpha = [0] * len(ring.t_names)
        for factor in (f.strip() for f in body.split("*")):
            m = _FACTOR_RE.match(factor)
            if not m:
                raise ValueError(f"bad scalar factor {factor!r} in {text!r}")
            if m.group("q") is not None:
                coeff *= Fraction(m.group("q"))
            elif m.group("lam") is not None:
                lam += Fraction(m.group("lam"))
            elif m.group("e") is not None:
                e += int(m.group("e"))
            elif factor.startswith("z"):
                z += int(m.group("z") or 1)
            else:
                name = m.group("t")
                if name == "T":
                    raise ValueError("write energy factors as T^lam")
                alpha[ring.t_index(name)] += int(m.group("a") or 1)
        total = total + ring.monomial(coeff=coeff, lam=lam, e=e, z=z, t=alpha, tag=tag)
    return total


def _split_sum(text: str):
    chunks, sign, buf = [], 1, []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "+-" and (not buf or buf[-1].strip() == "" or text[i - 1] not in "^/*eE"):
            prev = "".join(buf).strip()
            if prev:
                chunks.append((sign, prev))
            sign, buf = (1 if ch == "+" else -1), []
        else:
            buf.append(ch)
        i += 1
    last = "".join(buf).strip()
    if last:
        chunks.append((sign, last))
    return chunks
