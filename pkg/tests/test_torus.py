"""Windowed torus tables: tagging, lookup, refinement, serialization."""

import json
import random
from fractions import Fraction

import pytest

from gl2psf.bruhat import BruhatFunction, random_bruhat
from gl2psf.cyclotomic import CycNumber, HalfPower
from gl2psf.errors import InsufficientPrecision
from gl2psf.local import LocalContext, PAdicPoint, val_p
from gl2psf import oracle as orc
from gl2psf import orbital as orb
from gl2psf.torus import TorusFunction, push_dual, push_std


def ctx(p):
    return LocalContext(p)


def small_random(p, rng):
    return random_bruhat(ctx(p), 4, rng, max_S=1, max_C=1, terms=1)


class TestTabulate:
    def test_basic_std_window_is_one(self):
        for p in (2, 3):
            basic = BruhatFunction.basic(ctx(p), 4)
            T = push_std(basic, ((0, 0), (0, 0)), 1)
            assert T.tag == "StdPushforward"
            assert len(T.table) == (p - 1) ** 2
            one = HalfPower(p, 0, CycNumber.one())
            assert all(v == one for v in T.table.values())

    def test_basic_dual_window_is_one(self):
        for p in (2, 3):
            basic = BruhatFunction.basic(ctx(p), 4)
            T = push_dual(basic, ((0, 0), (0, 0)), 1)
            one = HalfPower(p, 0, CycNumber.one())
            assert all(v == one for v in T.table.values())

    def test_basic_std_second_slot_indicator(self):
        p = 3
        basic = BruhatFunction.basic(ctx(p), 4)
        T = push_std(basic, ((0, 0), (-1, 1)), 1)
        for (v1, v2, u1, u2), val in T.table.items():
            if v2 < 0:
                assert val.is_zero(), (v1, v2, u1, u2)
            else:
                assert val == HalfPower(p, -v2, CycNumber.one()), (v1, v2, u1, u2)

    def test_zero_function_zero_table(self):
        zero = BruhatFunction.zero(ctx(2), 4)
        for builder in (push_std, push_dual):
            T = builder(zero, ((-1, 1), (-1, 1)), 1)
            assert T.is_zero_table()

    def test_all_tags_dispatch_to_pointwise_ops(self):
        p = 3
        rng = random.Random(61)
        Phi = small_random(p, rng)
        t1, t2 = Fraction(2), Fraction(1, 3)
        window = ((0, 0), (-1, -1))
        expect = {
            "RawOrbital": HalfPower.of(p, orb.orbital(Phi, (t1, t2), 1)),
            "StdPushforward": orb.push_std_at(Phi, (t1, t2)),
            "DualPushforward": orb.push_dual_at(Phi, (t1, t2)),
            "Intermediate": HalfPower.of(p, orb.intermediate(Phi, t1, t2)),
            "DualIntermediate": HalfPower.of(p, orb.intermediate_dual(Phi, t1, t2)),
        }
        for tag, want in expect.items():
            T = TorusFunction.tabulate(Phi, window, 1, tag)
            assert T.value_at(t1, t2) == want, tag

    def test_unknown_tag_rejected(self):
        basic = BruhatFunction.basic(ctx(2), 4)
        with pytest.raises(ValueError):
            TorusFunction.tabulate(basic, ((0, 0), (0, 0)), 1, "Mystery")

    def test_parallel_matches_serial(self):
        rng = random.Random(62)
        Phi = small_random(2, rng)
        window = ((-1, 0), (-1, 0))
        assert push_std(Phi, window, 2, threads=3) == push_std(Phi, window, 2)


class TestLookup:
    def test_lookup_normalizes_units(self):
        p = 3
        basic = BruhatFunction.basic(ctx(p), 4)
        T = push_std(basic, ((0, 0), (0, 1)), 1)
        # 5 = 2 mod 3 and 7/4 = 1 mod 3 hit tabulated residues
        assert T.value_at(Fraction(5), Fraction(21, 4)) == \
            HalfPower(p, -1, CycNumber.one())
        tp = orb.TorusPoint(p, Fraction(2), Fraction(1))
        assert T.value_at(tp) == HalfPower(p, 0, CycNumber.one())

    def test_lookup_accepts_padic_points(self):
        p = 3
        basic = BruhatFunction.basic(ctx(p), 4)
        T = push_std(basic, ((0, 0), (0, 0)), 2)
        x = PAdicPoint.from_unit(p, 0, 4, 2)
        y = PAdicPoint.from_unit(p, 0, 7, 2)
        assert T.value_at(x, y) == HalfPower(p, 0, CycNumber.one())
        coarse = PAdicPoint.from_unit(p, 0, 1, 1)
        with pytest.raises(InsufficientPrecision):
            T.value_at(coarse, y)

    def test_outside_window_rejected(self):
        basic = BruhatFunction.basic(ctx(2), 4)
        T = push_std(basic, ((0, 0), (0, 0)), 1)
        with pytest.raises(ValueError):
            T.value_at(Fraction(2), Fraction(1))


class TestInvariants:
    def test_refinement_passes_for_pushforwards(self):
        # window and (S, C) sizes chosen so the derived level stays small
        cases = [(2, dict(max_S=1, max_C=1)), (3, dict(max_S=0, max_C=1))]
        for p, shape in cases:
            rng = random.Random(70 + p)
            for _ in range(2):
                Phi = random_bruhat(ctx(p), 4, rng, terms=1, **shape)
                for builder in (push_std, push_dual):
                    T = builder(Phi, ((-1, 0), (-1, 0)), 1)
                    T.check_refinement(Phi)

    def test_refinement_catches_corruption(self):
        from gl2psf.errors import MismatchDetected
        p = 2
        rng = random.Random(73)
        Phi = small_random(p, rng)
        T = push_std(Phi, ((0, 1), (0, 1)), 1)
        key = next(iter(T.table))
        T.table[key] = T.table[key] + HalfPower(p, 0, CycNumber.one())
        with pytest.raises(MismatchDetected):
            T.check_refinement(Phi)

    def test_dual_table_matches_bruteforce(self):
        # dual normalization stores |t1|^{-1/2}|t2|^{-3/2} times the
        # dual-character orbital at the inverted swapped point
        p = 2
        rng = random.Random(75)
        Phi = small_random(p, rng)
        T = push_dual(Phi, ((-1, 1), (-1, 1)), 1)
        rngpts = random.Random(76)
        checked = 0
        for _ in range(20):
            v1, v2 = rngpts.randint(-1, 1), rngpts.randint(-1, 1)
            t1, t2 = Fraction(p) ** v1, Fraction(p) ** v2
            if orc.oracle_orbital(Phi, 1 / t2, 1 / t1, -1, cost_only=True) > 300_000:
                continue
            ref = orc.oracle_orbital(Phi, 1 / t2, 1 / t1, -1)
            assert T.value_at(t1, t2) == HalfPower(p, v1 + 3 * v2, ref), (v1, v2)
            checked += 1
        assert checked >= 3


class TestSerialization:
    def test_json_roundtrip(self):
        for p in (2, 3):
            rng = random.Random(80 + p)
            Phi = small_random(p, rng)
            T = push_std(Phi, ((-1, 1), (0, 1)), 1)
            blob = json.dumps(T.to_obj())
            back = TorusFunction.from_obj(json.loads(blob))
            assert back == T

    def test_entries_are_sorted(self):
        basic = BruhatFunction.basic(ctx(3), 4)
        T = push_std(basic, ((-1, 0), (0, 1)), 1)
        keys = [tuple(e[:4]) for e in T.to_obj()["entries"]]
        assert keys == sorted(keys)
