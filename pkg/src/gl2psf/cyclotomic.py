"""Exact cyclotomic arithmetic for character sums.

CycNumber is an element of Q(zeta_n) stored as rational coefficients in the
power basis 1, zeta, ..., zeta^(phi(n)-1), fully reduced modulo the n-th
cyclotomic polynomial. Equality lifts both operands to a common level, so
it is decidable and independent of the level each value happens to be
stored at. A root of unity built from a reduced fraction k/n keeps level
exactly n even when the value generates a smaller field; ring operations
return results at a level dividing the lcm of the operand levels.

HalfPower tracks scalars of the form p^(m/2) * (cyclotomic) as the pair
(m, coefficient), keeping half-integer powers of p exact without adjoining
sqrt(p) to every coefficient field. When an odd exponent difference must be
folded away, the exact square root of p (a Gauss sum) is used.

The complex embedding sends zeta_n to exp(2*pi*i/n); it is a reporting and
numerics bridge only, never part of an exact decision.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Union

from .errors import ConductorTooLarge

# Degree guard: levels with phi(n) beyond this are refused.
MAX_DEGREE = 4096

Rational = Union[int, Fraction]


def euler_phi(n: int) -> int:
    if n < 1:
        raise ValueError("euler_phi needs a positive integer")
    result = n
    m = n
    d = 2
    while d * d <= m:
        if m % d == 0:
            result -= result // d
            while m % d == 0:
                m //= d
        d += 1
    if m > 1:
        result -= result // m
    return result


def _divisors(n: int) -> list[int]:
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def _poly_div_exact(num: list[int], den: tuple[int, ...]) -> list[int]:
    # den must be monic; the division must be exact.
    work = list(num)
    dd = len(den) - 1
    out_deg = len(work) - 1 - dd
    quot = [0] * (out_deg + 1)
    for i in range(out_deg, -1, -1):
        c = work[i + dd]
        if c:
            quot[i] = c
            for j, dj in enumerate(den):
                if dj:
                    work[i + j] -= c * dj
    if any(work):
        raise ArithmeticError("inexact polynomial division")
    return quot


@lru_cache(maxsize=None)
def cyclotomic_poly(n: int) -> tuple[int, ...]:
    """Integer coefficients of the n-th cyclotomic polynomial, ascending."""
    if n < 1:
        raise ValueError("cyclotomic level must be positive")
    if euler_phi(n) > MAX_DEGREE:
        raise ConductorTooLarge(
            f"level {n} has degree {euler_phi(n)} > {MAX_DEGREE}"
        )
    if n == 1:
        return (-1, 1)
    num = [0] * (n + 1)
    num[0] = -1
    num[n] = 1
    work = num
    for d in _divisors(n):
        if d < n:
            work = _poly_div_exact(work, cyclotomic_poly(d))
    return tuple(work)


def _reduce_mod_cyclo(n: int, coeffs: list) -> list:
    """Reduce a polynomial in zeta_n (ascending coefficients) below phi(n)."""
    deg_bound = euler_phi(n)
    poly = cyclotomic_poly(n)
    work = list(coeffs)
    if len(work) < deg_bound:
        work.extend([0] * (deg_bound - len(work)))
    for i in range(len(work) - 1, deg_bound - 1, -1):
        c = work[i]
        if c:
            work[i] = 0
            base = i - deg_bound
            for j in range(deg_bound):
                pj = poly[j]
                if pj:
                    work[base + j] -= c * pj
    return work[:deg_bound]


def _lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


class CycNumber:
    """Exact element of Q(zeta_n) in reduced power-basis form."""

    __slots__ = ("conductor", "coeffs")

    def __init__(self, conductor: int, coeffs: Iterable[Rational], *, _reduced: bool = False):
        if conductor < 1:
            raise ValueError("conductor must be positive")
        if _reduced:
            self.conductor = conductor
            self.coeffs = tuple(coeffs)
            return
        reduced = _reduce_mod_cyclo(conductor, list(coeffs))
        self.conductor = conductor
        self.coeffs = tuple(Fraction(c) for c in reduced)

    # -- constructors ------------------------------------------------------

    @classmethod
    def rational(cls, q: Rational) -> "CycNumber":
        return cls(1, (Fraction(q),), _reduced=True)

    @classmethod
    def zero(cls) -> "CycNumber":
        return _ZERO

    @classmethod
    def one(cls) -> "CycNumber":
        return _ONE

    @classmethod
    def root_of_unity(cls, r: Rational) -> "CycNumber":
        """e^(2*pi*i*r) for rational r; level is exactly the reduced denominator."""
        r = Fraction(r)
        n = r.denominator
        k = r.numerator % n
        if n == 1:
            return cls(1, (Fraction(1),), _reduced=True)
        mono = [0] * (k + 1)
        mono[k] = 1
        reduced = _reduce_mod_cyclo(n, mono)
        return cls(n, tuple(Fraction(c) for c in reduced), _reduced=True)

    @classmethod
    def from_monomial_counts(
        cls,
        n: int,
        counts: Union[Mapping[int, Rational], Iterable[Rational]],
        scale: Rational = 1,
    ) -> "CycNumber":
        """Sum of counts[j] * zeta_n^j, then an optional rational scale.

        Integer counts stay in integer arithmetic through the reduction,
        which keeps large character-sum accumulations cheap.
        """
        vec = [0] * n
        if isinstance(counts, Mapping):
            items = counts.items()
        else:
            items = enumerate(counts)
        for j, c in items:
            if c:
                vec[j % n] += c
        reduced = _reduce_mod_cyclo(n, vec)
        scale = Fraction(scale)
        out = cls(n, tuple(Fraction(c) * scale for c in reduced), _reduced=True)
        return out._demote()

    # -- representation management -----------------------------------------

    def _demote(self) -> "CycNumber":
        # cheap collapse: a vector supported on the constant term is rational
        if self.conductor != 1 and not any(self.coeffs[1:]):
            c0 = self.coeffs[0] if self.coeffs else Fraction(0)
            return CycNumber(1, (c0,), _reduced=True)
        return self

    def lift(self, m: int) -> "CycNumber":
        """Rewrite at level m, a multiple of the current level."""
        n = self.conductor
        if m == n:
            return self
        if m % n != 0:
            raise ValueError("can only lift to a multiple of the current level")
        if euler_phi(m) > MAX_DEGREE:
            raise ConductorTooLarge(f"lift target level {m} exceeds degree bound")
        step = m // n
        vec = [Fraction(0)] * m
        for i, c in enumerate(self.coeffs):
            if c:
                vec[i * step] += c
        reduced = _reduce_mod_cyclo(m, vec)
        return CycNumber(m, tuple(Fraction(c) for c in reduced), _reduced=True)

    @staticmethod
    def _coerce(x) -> "CycNumber":
        if isinstance(x, CycNumber):
            return x
        if isinstance(x, (int, Fraction)):
            return CycNumber.rational(x)
        raise TypeError(f"cannot interpret {type(x).__name__} as CycNumber")

    def _common(self, other: "CycNumber") -> tuple["CycNumber", "CycNumber"]:
        m = _lcm(self.conductor, other.conductor)
        return self.lift(m), other.lift(m)

    # -- ring operations -----------------------------------------------------

    def __add__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        a, b = self._common(other)
        out = CycNumber(
            a.conductor,
            tuple(x + y for x, y in zip(a.coeffs, b.coeffs)),
            _reduced=True,
        )
        return out._demote()

    __radd__ = __add__

    def __neg__(self):
        return CycNumber(self.conductor, tuple(-c for c in self.coeffs), _reduced=True)

    def __sub__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            q = Fraction(other)
            if not q:
                return _ZERO
            return CycNumber(
                self.conductor, tuple(c * q for c in self.coeffs), _reduced=True
            )._demote()
        if not isinstance(other, CycNumber):
            return NotImplemented
        a, b = self._common(other)
        if a.is_zero() or b.is_zero():
            return _ZERO
        n = a.conductor
        la, lb = len(a.coeffs), len(b.coeffs)
        prod = [Fraction(0)] * (la + lb - 1)
        for i, x in enumerate(a.coeffs):
            if x:
                for j, y in enumerate(b.coeffs):
                    if y:
                        prod[i + j] += x * y
        reduced = _reduce_mod_cyclo(n, prod)
        out = CycNumber(n, tuple(Fraction(c) for c in reduced), _reduced=True)
        return out._demote()

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers are supported")
        result = _ONE
        base = self
        while k:
            if k & 1:
                result = result * base
            base_needed = k >> 1
            if base_needed:
                base = base * base
            k = base_needed
        return result

    # -- Galois action -------------------------------------------------------

    def galois(self, a: int) -> "CycNumber":
        """Apply zeta -> zeta^a; a must be coprime to the level."""
        n = self.conductor
        if math.gcd(a, n) != 1:
            raise ValueError("galois exponent must be coprime to the level")
        vec = [Fraction(0)] * n
        for i, c in enumerate(self.coeffs):
            if c:
                vec[(a * i) % n] += c
        reduced = _reduce_mod_cyclo(n, vec)
        return CycNumber(n, tuple(Fraction(c) for c in reduced), _reduced=True)

    def conj(self) -> "CycNumber":
        """Complex conjugation (zeta -> zeta^(-1))."""
        if self.conductor == 1:
            return self
        return self.galois(self.conductor - 1)

    # -- predicates / conversions ---------------------------------------------

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def is_rational(self) -> bool:
        return self.conductor == 1 or not any(self.coeffs[1:])

    def as_rational(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("value is not rational")
        return self.coeffs[0] if self.coeffs else Fraction(0)

    def embed(self) -> complex:
        """Complex-double image under zeta_n -> exp(2*pi*i/n)."""
        z = cmath.exp(2j * math.pi / self.conductor)
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * z + float(c)
        return acc

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CycNumber.rational(other)
        elif not isinstance(other, CycNumber):
            return NotImplemented
        if self.conductor == other.conductor:
            return self.coeffs == other.coeffs
        a, b = self._common(other)
        return a.coeffs == b.coeffs

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    # distinct levels can represent equal values, so no content hash is safe
    __hash__ = None

    def __bool__(self):
        return not self.is_zero()

    def __repr__(self):
        if self.is_rational():
            return f"CycNumber({self.as_rational()})"
        return f"CycNumber(level={self.conductor}, coeffs={[str(c) for c in self.coeffs]})"

    # -- serialization ---------------------------------------------------------

    def to_obj(self) -> dict:
        return {
            "n": self.conductor,
            "coeffs": [[c.numerator, c.denominator] for c in self.coeffs],
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "CycNumber":
        n = int(obj["n"])
        coeffs = [Fraction(int(a), int(b)) for a, b in obj["coeffs"]]
        if len(coeffs) != euler_phi(n):
            raise ValueError("coefficient vector length does not match the level")
        return cls(n, coeffs)


_ZERO = CycNumber(1, (Fraction(0),), _reduced=True)
_ONE = CycNumber(1, (Fraction(1),), _reduced=True)


@lru_cache(maxsize=None)
def sqrt_prime_cyc(p: int) -> CycNumber:
    """Exact square root of the prime p as a cyclotomic number.

    p = 2 uses zeta_8 + zeta_8^(-1); odd p uses the quadratic Gauss sum,
    corrected by -i when p = 3 mod 4 so the value is the positive root.
    """
    if p == 2:
        z8 = CycNumber.root_of_unity(Fraction(1, 8))
        return z8 + z8.conj()
    if p < 2 or any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
        raise ValueError("sqrt_prime_cyc needs a prime")
    counts: dict[int, int] = {}
    for a in range(1, p):
        chi = pow(a, (p - 1) // 2, p)
        counts[a] = 1 if chi == 1 else -1
    gauss = CycNumber.from_monomial_counts(p, counts)
    if p % 4 == 1:
        return gauss
    minus_i = CycNumber.root_of_unity(Fraction(3, 4))
    return minus_i * gauss


class HalfPower:
    """Exact scalar p^(half_exponent/2) * coeff with coeff cyclotomic.

    Addition aligns both terms at the smaller exponent; an odd exponent
    difference is folded through the exact square root of p, so equality
    stays decidable even across mismatched parities.
    """

    __slots__ = ("p", "half_exponent", "coeff")

    def __init__(self, p: int, half_exponent: int, coeff):
        coeff = CycNumber._coerce(coeff)
        if coeff.is_zero():
            half_exponent = 0
        self.p = p
        self.half_exponent = half_exponent
        self.coeff = coeff

    @classmethod
    def of(cls, p: int, value) -> "HalfPower":
        return cls(p, 0, value)

    @classmethod
    def zero(cls, p: int) -> "HalfPower":
        return cls(p, 0, _ZERO)

    def is_zero(self) -> bool:
        return self.coeff.is_zero()

    def shift_half(self, k: int) -> "HalfPower":
        """Multiply by p^(k/2)."""
        if self.is_zero():
            return self
        return HalfPower(self.p, self.half_exponent + k, self.coeff)

    def _folded_to(self, m: int) -> CycNumber:
        # coefficient after rewriting at exponent m <= half_exponent
        delta = self.half_exponent - m
        if delta < 0:
            raise ValueError("can only fold to a smaller exponent")
        out = self.coeff
        if delta % 2:
            out = out * sqrt_prime_cyc(self.p)
            delta -= 1
        if delta:
            out = out * (self.p ** (delta // 2))
        return out

    @staticmethod
    def _align(a: "HalfPower", b: "HalfPower") -> tuple[int, CycNumber, CycNumber]:
        if a.p != b.p:
            raise ValueError("cannot combine half-powers of different primes")
        m = min(a.half_exponent, b.half_exponent)
        return m, a._folded_to(m), b._folded_to(m)

    def __add__(self, other):
        if not isinstance(other, HalfPower):
            return NotImplemented
        m, ca, cb = self._align(self, other)
        return HalfPower(self.p, m, ca + cb)

    def __neg__(self):
        return HalfPower(self.p, self.half_exponent, -self.coeff)

    def __sub__(self, other):
        if not isinstance(other, HalfPower):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, HalfPower):
            if other.p != self.p:
                raise ValueError("cannot combine half-powers of different primes")
            return HalfPower(
                self.p, self.half_exponent + other.half_exponent, self.coeff * other.coeff
            )
        if isinstance(other, (int, Fraction, CycNumber)):
            return HalfPower(self.p, self.half_exponent, self.coeff * other)
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, CycNumber)):
            other = HalfPower.of(self.p, other)
        elif not isinstance(other, HalfPower):
            return NotImplemented
        if self.is_zero() and other.is_zero():
            return True
        _, ca, cb = self._align(self, other)
        return ca == cb

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = None

    def embed(self) -> complex:
        return (self.p ** (self.half_exponent / 2.0)) * self.coeff.embed()

    def __repr__(self):
        return f"HalfPower({self.p}^({self.half_exponent}/2) * {self.coeff!r})"

    def to_obj(self) -> dict:
        return {
            "p": self.p,
            "half_exp": self.half_exponent,
            "coeff": self.coeff.to_obj(),
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "HalfPower":
        return cls(int(obj["p"]), int(obj["half_exp"]), CycNumber.from_obj(obj["coeff"]))
