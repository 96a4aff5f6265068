"""Convolution algebra: coset systems, compact averages, both actions,
the Fourier exchange, and agreement with the brute-force oracle."""

import random
from fractions import Fraction
from itertools import product

import pytest

from gl2psf.bruhat import BruhatFunction, random_bruhat
from gl2psf.cyclotomic import CycNumber
from gl2psf.hecke import (
    HeckeElement,
    coset_reps,
    hecke_convolve,
    hecke_convolve_right,
    hecke_product,
    k_average_left,
    k_average_right,
)
from gl2psf.local import LocalContext
from gl2psf.oracle import _hermite_reps, oracle_hecke


def ctx(p, **kw):
    return LocalContext(p, **kw)


def basic(p):
    return BruhatFunction.basic(ctx(p), 4)


def small_random(p, rng, terms=2):
    ms, mc = (1, 1) if p == 2 else (1, 0)
    return random_bruhat(ctx(p), 4, rng, max_S=ms, max_C=mc, terms=terms,
                         phase_level=1)


class TestHeckeElement:
    def test_validation(self):
        with pytest.raises(ValueError):
            HeckeElement({(0, 1): 1})

    def test_zero_coefficients_dropped(self):
        h = HeckeElement({(1, 0): 1}) + HeckeElement({(1, 0): -1})
        assert h.pairs == {}
        assert HeckeElement({(2, 1): 0}).pairs == {}

    def test_add_scale(self):
        h = HeckeElement.t_p().scale(3) + HeckeElement.central(1)
        assert h.pairs == {(1, 0): Fraction(3), (1, 1): Fraction(1)}

    def test_det_square_twist(self):
        p = 3
        h = (HeckeElement.unit() + HeckeElement.t_p()).det_square_twist(p)
        assert h.pairs == {(0, 0): Fraction(1), (1, 0): Fraction(1, 9)}


class TestCosetReps:
    def test_counts(self):
        # degree of the double coset of diag(p^a, p^b)
        for p in (2, 3, 5):
            assert len(coset_reps(p, 0, 0)) == 1
            assert len(coset_reps(p, 1, 1)) == 1
            assert len(coset_reps(p, 1, 0)) == p + 1
            assert len(coset_reps(p, 2, 0)) == p * p + p
            assert len(coset_reps(p, 2, 1)) == p + 1
            # determinant-p^2 cosets split over the two divisor types
            assert len(coset_reps(p, 2, 0)) + len(coset_reps(p, 1, 1)) \
                == p * p + p + 1

    def test_matches_oracle_enumeration(self):
        # the production system and the oracle's full Hermite scan must
        # produce identical normal forms
        for p, (a, b) in product((2, 3), [(1, 0), (1, 1), (2, 0), (2, 1), (3, 1)]):
            fast = {
                (int(r[0][0]), int(r[0][1]), int(r[1][1]))
                for r in coset_reps(p, a, b)
            }
            slow = set(_hermite_reps(p, a, b))
            assert fast == slow


class TestUnitElement:
    def test_unit_fixes_basic(self):
        for p in (2, 3):
            b = basic(p)
            assert hecke_convolve(HeckeElement.unit(), b).equals(b)
            assert hecke_convolve_right(HeckeElement.unit(), b).equals(b)

    def test_unit_is_projection(self):
        # on a general table the unit acts as the invariant average,
        # hence applying it twice changes nothing more
        p = 2
        rng = random.Random(11)
        Phi = small_random(p, rng)
        once = hecke_convolve(HeckeElement.unit(), Phi)
        assert once.equals(k_average_left(Phi))
        assert hecke_convolve(HeckeElement.unit(), once).equals(once)


class TestCompactAverage:
    def test_average_matches_group_enumeration(self):
        # exact average over all invertible residue matrices at level 3
        p = 2
        level = 3
        q = p ** level
        rng = random.Random(23)
        Phi = small_random(p, rng, terms=1)
        units = [
            k for k in product(range(q), repeat=4)
            if (k[0] * k[3] - k[1] * k[2]) % p
        ]
        assert len(units) == 1536
        left = k_average_left(Phi)
        right = k_average_right(Phi)
        pts = [[1, 0, 0, 1], [2, 1, 3, 1], [Fraction(1, 2), 1, 1, 4]]
        for xs in pts:
            tot_l, tot_r = CycNumber.zero(), CycNumber.zero()
            for k in units:
                tot_l = tot_l + Phi.eval_rational([
                    k[0] * xs[0] + k[1] * xs[2],
                    k[0] * xs[1] + k[1] * xs[3],
                    k[2] * xs[0] + k[3] * xs[2],
                    k[2] * xs[1] + k[3] * xs[3],
                ])
                tot_r = tot_r + Phi.eval_rational([
                    xs[0] * k[0] + xs[1] * k[2],
                    xs[0] * k[1] + xs[1] * k[3],
                    xs[2] * k[0] + xs[3] * k[2],
                    xs[2] * k[1] + xs[3] * k[3],
                ])
            w = Fraction(1, len(units))
            assert (left.eval_rational(xs) - tot_l * w).is_zero()
            assert (right.eval_rational(xs) - tot_r * w).is_zero()

    def test_average_is_idempotent(self):
        p = 3
        rng = random.Random(29)
        Phi = small_random(p, rng)
        G = k_average_left(Phi)
        assert k_average_left(G).equals(G)
        H = k_average_right(Phi)
        assert k_average_right(H).equals(H)


class TestTpOnBasic:
    def test_left_values(self):
        # hand count of the cosets whose inverse translate stays integral
        for p in (2, 3, 5):
            out = hecke_convolve(HeckeElement.t_p(), basic(p))
            zero, one = CycNumber.zero(), CycNumber.one()
            assert out.eval_rational([1, 0, 0, 1]) == zero
            assert out.eval_rational([p, 0, 0, 1]) == one
            assert out.eval_rational([1, 0, 0, p]) == one
            assert out.eval_rational([p, 1, 0, 1]) == one
            assert out.eval_rational([p * p, 0, 0, 1]) == one
            assert out.eval_rational([p, 0, 0, p]) == CycNumber.rational(p + 1)
            assert out.eval_rational([1, 0, 0, Fraction(1, p)]) == zero

    def test_right_values(self):
        for p in (2, 3, 5):
            out = hecke_convolve_right(HeckeElement.t_p(), basic(p))
            full = CycNumber.rational(p + 1)
            assert out.eval_rational([1, 0, 0, 1]) == full
            assert out.eval_rational([p, 0, 0, 1]) == full
            assert out.eval_rational([1, 0, 0, Fraction(1, p)]) == CycNumber.one()

    def test_output_is_left_invariant(self):
        p = 2
        rng = random.Random(37)
        Phi = small_random(p, rng)
        out = hecke_convolve(HeckeElement.t_p(), Phi)
        assert k_average_left(out).equals(out)


class TestOracleAgreement:
    def test_pointwise_match(self):
        for p in (2, 3):
            rng = random.Random(41 + p)
            Phi = small_random(p, rng)
            pts = [[1, 0, 0, 1], [p, 1, 0, 1], [2, p, 1, 3]]
            for name, h in (("t", HeckeElement.t_p()),
                            ("z", HeckeElement.central(1))):
                fast_l = hecke_convolve(h, Phi)
                fast_r = hecke_convolve_right(h, Phi)
                for xs in pts:
                    for side, fast in (("left", fast_l), ("right", fast_r)):
                        want = fast.eval_rational(xs)
                        got = oracle_hecke(h, Phi, xs, side,
                                           budget=2_000_000)
                        assert (want - got).is_zero(), (p, name, side, xs)

    def test_margin_stability(self):
        p = 2
        rng = random.Random(47)
        Phi = small_random(p, rng)
        h = HeckeElement.t_p()
        x = [1, 2, 0, 3]
        a = oracle_hecke(h, Phi, x, "left", level=3, budget=5_000_000)
        b = oracle_hecke(h, Phi, x, "left", level=4, budget=5_000_000)
        assert (a - b).is_zero()


class TestAlgebra:
    def test_product_closed_form(self):
        for p in (2, 3, 5):
            tp = HeckeElement.t_p()
            got = hecke_product(tp, tp, p)
            assert got == HeckeElement({(2, 0): 1, (1, 1): p + 1})

    def test_product_commutes(self):
        for p in (2, 3):
            tp, z = HeckeElement.t_p(), HeckeElement.central(1)
            assert hecke_product(tp, z, p) == hecke_product(z, tp, p)

    def test_action_is_associative(self):
        for p in (2, 3):
            rng = random.Random(5)
            Phi = small_random(p, rng)
            tp, z = HeckeElement.t_p(), HeckeElement.central(1)
            for h1, h2 in [(tp, tp), (tp, z)]:
                lhs = hecke_convolve(hecke_product(h1, h2, p), Phi)
                rhs = hecke_convolve(h1, hecke_convolve(h2, Phi),
                                     invariant=True)
                assert lhs.equals(rhs)
            lhs = hecke_convolve_right(hecke_product(tp, z, p), Phi)
            rhs = hecke_convolve_right(
                tp, hecke_convolve_right(z, Phi), invariant=True)
            assert lhs.equals(rhs)


class TestFourierExchange:
    def check(self, h, Phi):
        p = Phi.p
        lhs = hecke_convolve(h, Phi).mat_fourier()
        rhs = hecke_convolve_right(h.det_square_twist(p), Phi.mat_fourier())
        assert lhs.equals(rhs)

    def test_basic(self):
        for p in (2, 3):
            self.check(HeckeElement.t_p(), basic(p))

    def test_random_tables(self):
        for p in (2, 3):
            rng = random.Random(101 + p)
            self.check(HeckeElement.t_p(), small_random(p, rng))
