import pytest
from fractions import Fraction

from chcalc.coeff import (
    EnergyDomainError, Norm, Ring, TagError, TruncationPolicy, parse_scalar,
)


@pytest.fixture
def ring():
    return Ring(TruncationPolicy(z_order=3, energy_cut=3, t_order=4, e_window=(-4, 4)),
                t_vars=[("t0", 2), ("t1", 0)])


def test_energy_truncation(ring):
    a = ring.T(1) + ring.T(2)
    assert a * ring.T(1) == ring.T(2)


def test_laurent_inverse_pair(ring):
    assert ring.e(1) * ring.e(-1) == ring.one()


def test_square_mod_z2():
    ring = Ring(TruncationPolicy(z_order=2, energy_cut=3, t_order=1, e_window=(0, 0)))
    a = ring.one() + ring.z(1) * ring.T(Fraction(1, 2))
    sq = a * a
    # expanded by hand: 1 + 2 z T^{1/2} + z^2 T (z^2 truncated)
    assert sq == ring.one() + ring.monomial(coeff=2, lam=Fraction(1, 2), z=1)


def test_truncate_idempotent(ring):
    a = ring.T(1) + ring.z(2) + ring.t(0, 3) + ring.e(2)
    p = TruncationPolicy(z_order=2, energy_cut=1, t_order=3, e_window=(-1, 1))
    once = a.truncate(p)
    assert once.truncate(p) == once


def test_truncation_is_exclusive(ring):
    assert ring.T(5).is_zero()  # beyond cut
    p = TruncationPolicy(z_order=3, energy_cut=5, t_order=4, e_window=(-4, 4))
    r2 = Ring(p, t_vars=[("t0", 2), ("t1", 0)])
    assert r2.T(5).is_zero()  # exclusive bound


def test_tag_rules(ring):
    lam = ring.T(Fraction(-1, 2))
    assert lam.tag == "Lambda"
    with pytest.raises(EnergyDomainError):
        ring.monomial(lam=-1, tag="Lambda0")
    with pytest.raises(TagError):
        ring.monomial(lam=1, tag="Q")
    joined = ring.T(1) + ring.one()
    assert joined.tag == "Lambda0"


def test_ring_mismatch():
    r1 = Ring(TruncationPolicy(), t_vars=[("t0", 2)])
    r2 = Ring(TruncationPolicy(), t_vars=[("u", 2)])
    with pytest.raises(TagError):
        r1.one() + r2.one()


def test_degrees(ring):
    assert ring.e(1).degree() == 2
    assert ring.z(1).degree() == 2
    assert ring.t(0).degree() == 2
    assert ring.t(1).degree() == 0
    assert ring.T(1).degree() == 0
    assert (ring.e(1) * ring.z(1)).degree() == 4
    assert (ring.e(1) + ring.one()).degree() is None
    # degree additivity on homogeneous values
    a, b = ring.e(1) * ring.T(1), ring.t(0) * ring.z(1)
    assert (a * b).degree() == a.degree() + b.degree()


def test_norms(ring):
    assert ring.T(1).norm().value() == pytest.approx(2.718281828 ** -1)
    assert ring.zero().norm().is_zero()
    mixed = ring.T(2) + ring.z(1) * ring.T(Fraction(1, 2))
    assert mixed.norm() == Norm(Fraction(1, 2), 0, ring.norm_constant)
    # e-powers do not change norms
    assert (ring.e(3) * ring.T(1)).norm() == ring.T(1).norm()
    # t-variables weigh by the configured constant
    assert ring.t(0).norm() == Norm(0, 1, ring.norm_constant)


def test_norm_axioms_random(ring):
    import random

    rnd = random.Random(11)
    def rand_scalar():
        out = ring.zero()
        for _ in range(rnd.randint(1, 4)):
            out = out + ring.monomial(
                coeff=Fraction(rnd.randint(-4, 4), rnd.randint(1, 3)),
                lam=Fraction(rnd.randint(0, 4), 2), e=rnd.randint(-2, 2),
                z=rnd.randint(0, 2), t=(rnd.randint(0, 2), rnd.randint(0, 2)))
        return out

    for _ in range(120):
        a, b = rand_scalar(), rand_scalar()
        na, nb = a.norm(), b.norm()
        assert (a - b).norm() <= max(na, nb)          # ultrametric
        assert (a * b).norm() <= na * nb              # ring norm
    assert ring.one().norm() == Norm.one(ring.norm_constant)


def test_truncation_coherence_random(ring):
    import random

    rnd = random.Random(7)
    fine = ring.policy
    coarse = TruncationPolicy(z_order=2, energy_cut=Fraction(3, 2), t_order=2,
                              e_window=(-2, 2))
    assert coarse.refines(fine)

    def rand_scalar():
        out = ring.zero()
        for _ in range(rnd.randint(1, 4)):
            out = out + ring.monomial(
                coeff=rnd.randint(-3, 3), lam=Fraction(rnd.randint(0, 4), 2),
                e=rnd.randint(-2, 2), z=rnd.randint(0, 2),
                t=(rnd.randint(0, 1), rnd.randint(0, 1)))
        return out

    for _ in range(80):
        a, b = rand_scalar(), rand_scalar()
        assert (a * b).truncate(coarse) == (a.truncate(coarse) * b.truncate(coarse))
        assert (a + b).truncate(coarse) == (a.truncate(coarse) + b.truncate(coarse))


def test_unit_inverse(ring):
    u = ring.monomial(coeff=2, lam=1, e=2, tag="Lambda")
    v = u + u * ring.T(1) + u * ring.t(1)
    inv = v.unit_inverse()
    assert inv * v == ring.one()
    with pytest.raises(ZeroDivisionError):
        (ring.one() + ring.e(1)).unit_inverse()
    with pytest.raises(EnergyDomainError):
        ring.monomial(lam=1, tag="Lambda0").unit_inverse()


def test_parse_scalar(ring):
    s = parse_scalar(ring, "3/2 * T^1/2 * e^-1 * z^2 * t0^1")
    assert s == ring.monomial(coeff=Fraction(3, 2), lam=Fraction(1, 2), e=-1, z=2, t=(1, 0))
    assert parse_scalar(ring, "1 + 2*z") == ring.one() + ring.z(1, coeff=2)
    assert parse_scalar(ring, "T^1 - t1") == ring.T(1) - ring.t(1)
    assert parse_scalar(ring, "0").is_zero()


def test_scalar_derivatives(ring):
    s = ring.monomial(coeff=3, e=2, z=2, t=(1, 0))
    assert s.derivative("z") == ring.monomial(coeff=6, e=2, z=1, t=(1, 0))
    assert s.derivative("e") == ring.monomial(coeff=6, e=2, z=2, t=(1, 0))
    assert s.derivative("t", 0) == ring.monomial(coeff=3, e=2, z=2)
    assert s.derivative("t", 1).is_zero()
