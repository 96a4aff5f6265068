"""Exact table algebra: evaluation, pullbacks, transforms, serialization."""

import cmath
import json
import random
from fractions import Fraction

import pytest

from gl2psf.bruhat import BruhatFunction, random_bruhat
from gl2psf.cyclotomic import CycNumber
from gl2psf.errors import (
    BudgetExceeded,
    InsufficientPrecision,
    SingularMatrix,
    Unsupported,
)
from gl2psf.local import LocalContext, PAdicPoint, fractional_part, val_p


def ctx(p, **kw):
    return LocalContext(p, **kw)


def pt(p, q):
    return PAdicPoint.from_rational(p, Fraction(q))


def rand_point(p, rng, depth=3):
    a = rng.randint(-40, 40)
    k = rng.randint(0, depth)
    return pt(p, Fraction(a, p ** k))


def riemann_transform(f, x, sign=-1):
    """Numeric oracle: complex Riemann sum at a grid fine enough that both
    the integrand and the kernel are constant on every summation cell."""
    p = f.p
    dense = f.densified()
    if not dense.terms:
        return 0j
    fac = dense.terms[0][0]
    S, C = fac.S[0], fac.C[0]
    level = max(C, -val_p(Fraction(x), p)) if x else C
    total = 0j
    for r in range(p ** (S + level)):
        y = Fraction(r) / Fraction(p) ** S
        phase = fractional_part(x * y, p)
        total += f.eval_rational([y]).embed() * cmath.exp(
            sign * 2j * cmath.pi * float(phase)
        )
    return total / p ** level


class TestEvalIntegrate:
    def test_basic_indicator(self):
        f = BruhatFunction.basic(ctx(5), 1)
        assert f.eval([pt(5, 7)]) == 1
        assert f.eval([pt(5, 0)]) == 1
        assert f.eval([pt(5, Fraction(1, 5))]).is_zero()
        assert f.integrate() == 1

    def test_integrals_with_scaling(self):
        p = 3
        f = BruhatFunction.from_dense(ctx(p), 1, 1, -1, [Fraction(2)])
        # constant 2 on p^-1 Z_p has mass 2p
        assert f.integrate() == 2 * p
        g = BruhatFunction.basic(ctx(p, measure_normalization=Fraction(1, 2)), 1)
        assert g.integrate() == Fraction(1, 2)

    def test_full_phase_integral_vanishes(self):
        p = 3
        vals = [CycNumber.root_of_unity(Fraction(r, p)) for r in range(p)]
        f = BruhatFunction.from_dense(ctx(p), 1, 0, 1, vals)
        assert f.integrate().is_zero()

    def test_eval_needs_enough_digits(self):
        p = 2
        rng = random.Random(5)
        f = random_bruhat(ctx(p), 1, rng, max_S=0, max_C=2)
        shallow = PAdicPoint.from_unit(p, 0, 1, level=1)
        if f.axis_C(0) >= 2:
            with pytest.raises(InsufficientPrecision):
                f.eval([shallow])

    def test_linearity_of_eval(self):
        rng = random.Random(11)
        p = 3
        f = random_bruhat(ctx(p), 2, rng)
        g = random_bruhat(ctx(p), 2, rng)
        h = f + g.scale(Fraction(-3, 2))
        for _ in range(25):
            xs = [rand_point(p, rng), rand_point(p, rng)]
            lhs = h.eval(xs)
            rhs = f.eval(xs) + g.eval(xs) * Fraction(-3, 2)
            assert lhs == rhs


class TestNormalForm:
    def test_redundant_box_minimizes_to_basic(self):
        p = 3
        n = p ** 4
        vals = [1 if r % (p ** 2) == 0 else 0 for r in range(n)]
        f = BruhatFunction.from_dense(ctx(p), 1, 2, 2, vals)
        assert f.axis_S(0) == 0 and f.axis_C(0) == 0
        assert f.equals(BruhatFunction.basic(ctx(p), 1))

    def test_constant_on_large_ball_gets_negative_level(self):
        p = 2
        f = BruhatFunction.from_dense(ctx(p), 1, 1, 0, [Fraction(3), Fraction(3)])
        assert f.axis_S(0) == 1 and f.axis_C(0) == -1

    def test_zero_function_collapses(self):
        p = 2
        f = BruhatFunction.from_dense(ctx(p), 1, 2, 1, [0] * 8)
        assert f.is_zero_table()
        assert f.equals(BruhatFunction.zero(ctx(p), 1))


class TestPullback:
    def test_pullback_matches_brute_force(self):
        rng = random.Random(20260815)
        pool = [Fraction(0), Fraction(1), Fraction(-1), Fraction(2),
                Fraction(1, 2), Fraction(3), Fraction(-1, 3)]
        for p in (2, 3):
            for _ in range(6):
                f = random_bruhat(ctx(p), 2, rng)
                while True:
                    A = [[rng.choice(pool) for _ in range(2)] for _ in range(2)]
                    if A[0][0] * A[1][1] - A[0][1] * A[1][0] != 0:
                        break
                b = [rng.choice(pool), rng.choice(pool)]
                g = f.linear_pullback(A, b)
                for _ in range(40):
                    xs = [Fraction(rng.randint(-18, 18), p ** rng.randint(0, 2))
                          for _ in range(2)]
                    ys = [A[i][0] * xs[0] + A[i][1] * xs[1] + b[i] for i in range(2)]
                    assert g.eval_rational(xs) == f.eval_rational(ys)

    def test_pullback_composition_law(self):
        rng = random.Random(7)
        p = 3
        f = random_bruhat(ctx(p), 2, rng)
        A1 = [[Fraction(1), Fraction(1)], [Fraction(0), Fraction(3)]]
        b1 = [Fraction(1, 3), Fraction(0)]
        A2 = [[Fraction(0), Fraction(1)], [Fraction(-1), Fraction(2)]]
        b2 = [Fraction(2), Fraction(1)]
        g = f.linear_pullback(A1, b1).linear_pullback(A2, b2)
        A = [[sum(A1[i][k] * A2[k][j] for k in range(2)) for j in range(2)]
             for i in range(2)]
        b = [A1[i][0] * b2[0] + A1[i][1] * b2[1] + b1[i] for i in range(2)]
        assert g.equals(f.linear_pullback(A, b))

    def test_unipotent_shear_fixes_lattice_indicator(self):
        for p in (2, 5):
            f = BruhatFunction.basic(ctx(p), 2)
            g = f.linear_pullback([[1, 1], [0, 1]])
            assert g.equals(f)
            rng = random.Random(p)
            for _ in range(100):
                xs = [Fraction(rng.randint(-30, 30), p ** rng.randint(0, 2))
                      for _ in range(2)]
                assert g.eval_rational(xs) == f.eval_rational(
                    [xs[0] + xs[1], xs[1]]
                )

    def test_singular_map_rejected(self):
        f = BruhatFunction.basic(ctx(2), 2)
        with pytest.raises(SingularMatrix):
            f.linear_pullback([[1, 1], [1, 1]])

    def test_permute_axes(self):
        rng = random.Random(3)
        p = 2
        f = random_bruhat(ctx(p), 3, rng)
        g = f.permute_axes((2, 0, 1))
        for _ in range(30):
            xs = [rand_point(p, rng) for _ in range(3)]
            assert g.eval(xs) == f.eval([xs[2], xs[0], xs[1]])


class TestFourier1d:
    def test_lattice_indicator_is_fixed(self):
        for p in (2, 3, 5):
            f = BruhatFunction.basic(ctx(p), 1)
            assert f.fourier().equals(f)

    def test_sub_lattice_indicator(self):
        for p in (2, 3):
            f = BruhatFunction.from_dense(ctx(p), 1, -1, 1, [1])  # 1 on pZ_p
            expected = BruhatFunction.from_dense(
                ctx(p), 1, 1, -1, [Fraction(1, p)]
            )
            assert f.fourier().equals(expected)

    def test_unit_coset_transform_frozen(self):
        # 1 on 1 + 2Z_2 maps to x -> (1/2) psi^(-1)(x) on 2^(-1) Z_2
        p = 2
        f = BruhatFunction.from_dense(ctx(p), 1, 0, 1, [0, 1])
        expected = BruhatFunction.from_dense(
            ctx(p), 1, 1, 0, [Fraction(1, 2), Fraction(-1, 2)]
        )
        assert f.fourier().equals(expected)

    def test_inversion_is_reflection(self):
        rng = random.Random(20260815)
        cases = []
        for p, max_s, max_c in ((2, 3, 3), (3, 3, 2), (5, 2, 1)):
            for _ in (range(90) if p == 2 else range(60)):
                cases.append((p, max_s, max_c))
        assert len(cases) >= 200
        for p, max_s, max_c in cases:
            f = random_bruhat(ctx(p), 1, rng, max_S=max_s, max_C=max_c,
                              terms=rng.choice((1, 1, 2)))
            double = f.fourier().fourier()
            reflected = f.linear_pullback([[-1]])
            assert double.equals(reflected)

    def test_opposite_kernels_invert(self):
        rng = random.Random(99)
        for p in (2, 3):
            f = random_bruhat(ctx(p), 1, rng, max_S=2, max_C=2)
            assert f.fourier(sign=-1).fourier(sign=+1).equals(f)

    def test_numeric_riemann_crosscheck(self):
        rng = random.Random(41)
        for p in (2, 3, 5):
            for _ in range(8):
                f = random_bruhat(ctx(p), 1, rng, max_S=1, max_C=1)
                g = f.fourier()
                for _ in range(6):
                    x = Fraction(rng.randint(-20, 20), p ** rng.randint(0, 2))
                    exact = g.eval_rational([x]).embed()
                    approx = riemann_transform(f, x)
                    assert abs(exact - approx) < 1e-9

    def test_plancherel(self):
        rng = random.Random(8)
        for p in (2, 3):
            for _ in range(25):
                f = random_bruhat(ctx(p), 1, rng, max_S=2, max_C=2)
                g = f.fourier()
                assert _norm_sq(f) == _norm_sq(g)

    def test_fourier_at_matches_table(self):
        rng = random.Random(13)
        for p in (2, 3, 5):
            f = random_bruhat(ctx(p), 1, rng, max_S=2, max_C=2, terms=2)
            g = f.fourier()
            for _ in range(25):
                x = rand_point(p, rng)
                assert f.fourier_at(x) == g.eval([x])
            zero = PAdicPoint.zero(p)
            assert f.fourier_at(zero) == f.integrate()

    def test_transform_requires_selfdual_data(self):
        f = BruhatFunction.basic(ctx(3, psi_conductor_exponent=1), 1)
        with pytest.raises(Unsupported):
            f.fourier()
        g = BruhatFunction.basic(ctx(3, measure_normalization=Fraction(2)), 1)
        with pytest.raises(Unsupported):
            g.fourier()


def _norm_sq(f):
    dense = f.densified()
    if not dense.terms:
        return CycNumber.zero()
    fac = dense.terms[0][0]
    total = CycNumber.zero()
    for v in fac.table:
        if not v.is_zero():
            total = total + v * v.conj()
    scale = Fraction(1)
    for c in fac.C:
        scale /= Fraction(f.p) ** c
    return total * scale


class TestMatFourier:
    def test_basic_is_fixed_point(self):
        for p in (2, 3):
            f = BruhatFunction.basic(ctx(p), 4)
            assert f.mat_fourier().equals(f)

    def test_central_scaling_law_p2(self):
        p = 2
        rng = random.Random(17)
        two = [[Fraction(2) if i == j else Fraction(0) for j in range(4)]
               for i in range(4)]
        half = [[Fraction(1, 2) if i == j else Fraction(0) for j in range(4)]
                for i in range(4)]
        for f in (BruhatFunction.basic(ctx(p), 4),
                  random_bruhat(ctx(p), 4, rng, max_S=1, max_C=1)):
            lhs = f.linear_pullback(two).mat_fourier()
            rhs = f.mat_fourier().linear_pullback(half).scale(16)
            assert lhs.equals(rhs)

    def test_double_transform_reflects(self):
        p = 3
        rng = random.Random(23)
        f = random_bruhat(ctx(p), 4, rng, max_S=1, max_C=1)
        double = f.mat_fourier().mat_fourier()
        neg = [[Fraction(-1) if i == j else Fraction(0) for j in range(4)]
               for i in range(4)]
        reflected = f.linear_pullback(neg)
        assert double.equals(reflected)
        for _ in range(100):
            xs = [Fraction(rng.randint(-10, 10), p ** rng.randint(0, 1))
                  for _ in range(4)]
            assert double.eval_rational(xs) == f.eval_rational([-x for x in xs])

    def test_transpose_pairing_couples_off_diagonal(self):
        # a function concentrated in the x_12 slot transforms into x_21 data
        p = 3
        f = BruhatFunction.tensor(
            ctx(p),
            [(0, 0, [1]), (-1, 1, [1]), (0, 0, [1]), (0, 0, [1])],
        )
        g = f.mat_fourier()
        assert g.axis_S(2) == 1 and g.axis_C(2) == -1
        assert g.axis_S(1) == 0 and g.axis_C(1) == 0


class TestSerialization:
    def test_roundtrip_dense_json(self):
        rng = random.Random(31)
        for p in (2, 3):
            f = random_bruhat(ctx(p), 2, rng, max_S=1, max_C=1, terms=2)
            blob = json.dumps(f.to_obj())
            g = BruhatFunction.from_obj(ctx(p), json.loads(blob))
            assert g.equals(f)

    def test_zero_roundtrip(self):
        f = BruhatFunction.zero(ctx(2), 1)
        g = BruhatFunction.from_obj(ctx(2), f.to_obj())
        assert g.is_zero_table()

    def test_budget_guard(self):
        rng = random.Random(37)
        f = random_bruhat(ctx(3), 2, rng, max_S=2, max_C=2)
        g = random_bruhat(ctx(3), 2, rng, max_S=2, max_C=2)
        with pytest.raises(BudgetExceeded):
            f.equals(g, cell_cap=2)
