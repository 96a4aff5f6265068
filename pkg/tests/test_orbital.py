"""Orbital integrals, pushforwards, intermediate values, Hankel routes."""

import random
from fractions import Fraction

import pytest

from gl2psf.bruhat import BruhatFunction, random_bruhat
from gl2psf.cyclotomic import CycNumber, HalfPower
from gl2psf.local import LocalContext, val_p
from gl2psf import oracle as orc
from gl2psf import orbital as orb
from gl2psf.orbital import TorusPoint, pair_sweep


def ctx(p, **kw):
    return LocalContext(p, **kw)


def abs_p(x, p):
    return Fraction(p) ** -val_p(Fraction(x), p)


def rand_unit(rng, p):
    while True:
        num = rng.randint(1, 8)
        den = rng.randint(1, 8)
        if num % p and den % p:
            return Fraction(rng.choice([1, -1]) * num, den)


def rand_t(rng, p, vlo, vhi):
    return rand_unit(rng, p) * Fraction(p) ** rng.randint(vlo, vhi)


def rand_scaled_unit(rng, p, lo=-2, hi=2):
    # small fixed unit menu keeps brute-force cost bounded at depth 2
    num = rng.choice([1, 2, 1 + p, 2 * p + 1, p * p - 1])
    sgn = rng.choice([1, -1])
    return Fraction(sgn * num) * Fraction(p) ** rng.randint(lo, hi)


def small_random(ctx_, rng, phase_level=1):
    return random_bruhat(ctx_, 4, rng, max_S=1, max_C=1, terms=1,
                         phase_level=phase_level)


class TestFrozenBasic:
    def test_unit_torus_value(self):
        for p in (2, 3, 5):
            basic = BruhatFunction.basic(ctx(p), 4)
            assert orb.orbital(basic, (1, 1)) == CycNumber.one()
            u = Fraction(3, 7) if p not in (3, 7) else 1
            assert orb.orbital(basic, (u, 1)) == CycNumber.one()

    def test_second_slot_indicator(self):
        # normalized value in t2 alone is the integer indicator
        one, zero = CycNumber.one(), CycNumber.zero()
        for p in (2, 3, 5):
            basic = BruhatFunction.basic(ctx(p), 4)
            for v2, expect in [(-2, zero), (-1, zero), (0, one), (1, one), (2, one)]:
                assert orb.orbital(basic, (1, Fraction(p) ** v2)) == expect, (p, v2)
            assert orb.orbital(basic, (1, 0)) == one

    def test_first_slot_sum_frozen(self):
        # value at t=(p,1) is a twisted unit-circle sum; frozen from the
        # brute-force oracle and cross-checked against it here
        minus_one = CycNumber.one() * Fraction(-1)
        for p in (2, 3, 5):
            basic = BruhatFunction.basic(ctx(p), 4)
            for sgn in (1, -1):
                got = orb.orbital(basic, (Fraction(p), Fraction(1)), sgn)
                assert got == minus_one, (p, sgn, got)
                assert got == orc.oracle_orbital(
                    basic, Fraction(p), Fraction(1), sgn)
        basic3 = BruhatFunction.basic(ctx(3), 4)
        assert orb.orbital(basic3, (9, 1)) == CycNumber.zero()
        # oracle-frozen vanishing point with a non-integral second slot
        got = orb.orbital(basic3, (Fraction(1), Fraction(1, 3)))
        assert got == CycNumber.zero()
        assert got == orc.oracle_orbital(basic3, Fraction(1), Fraction(1, 3), 1)

    def test_central_values(self):
        for p in (2, 3, 5):
            basic = BruhatFunction.basic(ctx(p), 4)
            assert orb.central_std(basic, 1) == CycNumber.one()
            assert orb.central_std(basic, p) == CycNumber.zero()
            assert orb.central_std(basic, Fraction(1, p)) == CycNumber.zero()

    def test_intermediate_indicator(self):
        one, zero = CycNumber.one(), CycNumber.zero()
        for p in (2, 3):
            basic = BruhatFunction.basic(ctx(p), 4)
            for v1, expect in [(-1, zero), (0, one), (1, one)]:
                assert orb.intermediate(basic, Fraction(p) ** v1, 1) == expect
            assert orb.intermediate(basic, 0, 1) == one

    def test_dual_intermediate_unit(self):
        for p in (2, 3):
            basic = BruhatFunction.basic(ctx(p), 4)
            assert orb.intermediate_dual(basic, 1, 1) == CycNumber.one()

    def test_pushforward_normalization(self):
        p = 3
        basic = BruhatFunction.basic(ctx(p), 4)
        assert orb.push_std_at(basic, (1, 1)) == HalfPower(p, 0, CycNumber.one())
        t = (Fraction(3), Fraction(1))
        ps = orb.push_std_at(basic, t)
        assert ps == HalfPower(p, -3, CycNumber.one() * Fraction(-1))


class TestOracleAgreement:
    def test_orbital_matches_bruteforce(self):
        for p in (2, 3):
            rng = random.Random(100 + p)
            done = 0
            trials = 0
            while done < 12 and trials < 200:
                trials += 1
                Phi = small_random(ctx(p), rng)
                t1 = rand_t(rng, p, -1, 1)
                t2 = rand_t(rng, p, -1, 1) if rng.random() < 0.8 else Fraction(0)
                sgn = rng.choice([1, -1])
                if orc.oracle_orbital(Phi, t1, t2, sgn, cost_only=True) > 400_000:
                    continue
                assert orb.orbital(Phi, (t1, t2), sgn) == orc.oracle_orbital(
                    Phi, t1, t2, sgn), (p, t1, t2, sgn)
                done += 1
            assert done == 12

    def test_central_matches_bruteforce(self):
        for p in (2, 3):
            rng = random.Random(200 + p)
            for _ in range(8):
                Phi = small_random(ctx(p), rng)
                z = rand_t(rng, p, -2, 2)
                for dual in (False, True):
                    eng = orb.central_dual(Phi, z) if dual else orb.central_std(Phi, z)
                    assert eng == orc.oracle_central(Phi, z, dual=dual), (p, z, dual)


class TestIntermediateRoutes:
    def test_three_routes_agree(self):
        for p in (2, 3):
            rng = random.Random(300 + p)
            for k in range(6):
                Phi = small_random(ctx(p), rng)
                t1 = rand_t(rng, p, -1, 1)
                t2 = rand_t(rng, p, -1, 1)
                a = orb.intermediate_fubini(Phi, t1, t2)
                assert a == orb.intermediate_zform(Phi, t1, t2), (p, k, t1, t2)
                assert a == orb.intermediate_via_materialization(Phi, t1, t2), (
                    p, k, t1, t2)

    def test_dual_routes_agree(self):
        for p in (2, 3):
            rng = random.Random(400 + p)
            for k in range(6):
                Phi = small_random(ctx(p), rng)
                t1 = rand_t(rng, p, -1, 1)
                t2 = rand_t(rng, p, -1, 1)
                a = orb.intermediate_dual_fubini(Phi, t1, t2)
                b = orb.intermediate_dual_zform(Phi, t1, t2)
                assert a == b, (p, k, t1, t2)
            # the value at infinity is the stable deep-shell value
            for k in range(3):
                Phi = small_random(ctx(p), rng)
                t1 = rand_t(rng, p, -1, 1)
                far = Fraction(p) ** (-(6 if p == 2 else 5))
                assert orb.intermediate_dual_zform(Phi, t1, None) == \
                    orb.intermediate_dual_fubini(Phi, t1, far), (p, k, t1)

    def test_dual_routes_agree_wide_range(self):
        for p in (2, 3, 5):
            rng = random.Random(4500 + p)
            for k in range(3):
                Phi = small_random(ctx(p), rng, phase_level=2)
                t1 = rand_scaled_unit(rng, p)
                t2 = rand_scaled_unit(rng, p)
                assert orb.intermediate_dual_fubini(Phi, t1, t2) == \
                    orb.intermediate_dual_zform(Phi, t1, t2), (p, k, t1, t2)

    def test_infinity_value_anchors_to_central(self):
        # value at infinity equals |t1|^-2 times the dual central value at -t1
        decisive = 0
        for p in (2, 3, 5):
            rng = random.Random(4100 + p)
            for _ in range(7):
                for _attempt in range(40):
                    Phi = small_random(ctx(p), rng, phase_level=2)
                    t1 = rand_scaled_unit(rng, p)
                    anchor = orb.central_dual(Phi, -t1) * abs_p(t1, p) ** -2
                    if not anchor.is_zero():
                        break
                if not anchor.is_zero():
                    decisive += 1
                assert orb.intermediate_dual_zform(Phi, t1, None) == anchor, (p, t1)
        assert decisive >= 15


class TestHankelRoutes:
    def test_composition_matches_upstairs_and_roundtrip(self):
        for p in (2, 3):
            rng = random.Random(600 + p)
            for k in range(4):
                Phi = small_random(ctx(p), rng)
                t = TorusPoint(p, rand_t(rng, p, -1, 1), rand_t(rng, p, -1, 1))
                a = orb.hankel_via_composition(Phi, t)
                assert a == orb.hankel_via_upstairs(Phi, t), (p, k, t)
                assert a == orb.hankel(Phi, t)
                assert orb.hankel_roundtrip(Phi, t) == orb.push_std_at(Phi, t), (
                    p, k, t)

    def test_roundtrip_pinned_points(self):
        # deep negative second-slot valuations force both the tail term and
        # shells whose oscillatory cell integrals all vanish
        p = 3
        rng = random.Random(4203)
        for T1, T2 in [(Fraction(2), Fraction(-3, 4)),
                       (Fraction(-1, 3), Fraction(-1, 4)),
                       (Fraction(2), Fraction(-3))]:
            Phi = small_random(ctx(p), rng, phase_level=2)
            assert orb.hankel_roundtrip(Phi, (T1, T2)) == \
                orb.push_std_at(Phi, (T1, T2)), (T1, T2)


class TestEquivariance:
    def test_unipotent_conjugation_twists_by_character(self):
        for p in (2, 3):
            c = ctx(p)
            rng = random.Random(700 + p)
            for k in range(4):
                Phi = small_random(c, rng)
                vlo = -2 if p == 2 else -1
                a = rand_t(rng, p, vlo, 0)
                b = rand_t(rng, p, vlo, 0)
                t = (rand_t(rng, p, -1, 1), rand_t(rng, p, -1, 1))
                lhs = orb.orbital(orb.unipotent_sandwich(Phi, a, b), t, 1)
                assert lhs == c.psi(a + b) * orb.orbital(Phi, t, 1), (p, k, a, b, t)


class TestDegenerateValues:
    def test_deep_second_slot_is_one_dimensional_value(self):
        for p in (2, 3):
            rng = random.Random(800 + p)
            for k in range(4):
                Phi = small_random(ctx(p), rng)
                t1 = rand_t(rng, p, -1, 1)
                lim = orb.orbital(Phi, (t1, Fraction(p) ** 8), 1)
                assert lim == orb.irr1(Phi, t1), (p, k, t1)
                t2 = rand_t(rng, p, -1, 1)
                assert orb.irr1_dual(Phi.mat_fourier(), t2) == \
                    orb.irr1_dual_via_composition(Phi, t2), (p, k, t2)

    def test_dual_one_dimensional_link_wide_range(self):
        for p in (2, 3, 5):
            rng = random.Random(4400 + p)
            for k in range(4):
                Phi = small_random(ctx(p), rng, phase_level=2)
                t2 = rand_scaled_unit(rng, p)
                assert orb.irr1_dual_via_composition(Phi, t2) == \
                    orb.irr1_dual(Phi.mat_fourier(), t2), (p, k, t2)

    def test_two_route_self_checks_pass(self):
        # both functions raise MismatchDetected internally on disagreement
        for p in (2, 3):
            rng = random.Random(500 + p)
            for _ in range(5):
                Phi = small_random(ctx(p), rng)
                t = rand_t(rng, p, -1, 1)
                orb.irr2(Phi, t)
                orb.irr2_dual(Phi, t)

    def test_infinity_value_on_transform_image(self):
        # dual value at infinity of the matrix transform collapses to a
        # single weighted line integral of the original function
        for p in (2, 3, 5):
            rng = random.Random(4300 + p)
            for k in range(4):
                Phi = small_random(ctx(p), rng, phase_level=2)
                z = rand_scaled_unit(rng, p)
                lhs = orb.intermediate_dual_zform(Phi.mat_fourier(), -z, None)
                G = Phi.partial_fourier(1, -1)
                assigns = [("m", -z), ("fixed", Fraction(0)), ("fixed", -z),
                           ("n", -z)]
                body = pair_sweep(G, assigns, Fraction(-1), Fraction(-1))
                assert lhs == body * abs_p(z, p), (p, k, z)

    def test_zero_arguments_rejected(self):
        basic = BruhatFunction.basic(ctx(3), 4)
        with pytest.raises(ValueError):
            orb.irr2_dual(basic, 0)
        with pytest.raises(ValueError):
            orb.central_std(basic, 0)
