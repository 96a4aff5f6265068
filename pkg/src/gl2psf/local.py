"""Local-field plumbing: prime context, points of Q_p, additive characters.

The additive character at level c is psi(x) = e^(2*pi*i*{p^c x}_p), trivial
on p^(-c) Z_p and nontrivial on p^(-c-1) Z_p; the default c = 0 is the
standard unramified character, trivial exactly on Z_p. Values are exact
cyclotomic numbers with level a power of p.

A PAdicPoint is either backed by an exact rational (residues available at
any level) or by a (valuation, unit residue, level) triple coming out of a
table enumeration; asking a finite-level point for more digits than it
carries raises InsufficientPrecision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .cyclotomic import CycNumber
from .errors import InsufficientPrecision

INF = math.inf

Rational = Union[int, Fraction]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def val_p(q: Rational, p: int):
    """p-adic valuation of a rational; +inf for zero."""
    q = Fraction(q)
    if q == 0:
        return INF
    v = 0
    num = q.numerator
    while num % p == 0:
        num //= p
        v += 1
    den = q.denominator
    while den % p == 0:
        den //= p
        v -= 1
    return v


def fractional_part(q: Rational, p: int) -> Fraction:
    """p-adic fractional part: the unique a/p^k in [0,1) with x - a/p^k in Z_p."""
    q = Fraction(q)
    if q == 0:
        return Fraction(0)
    den = q.denominator
    k = 0
    pk = 1
    while den % p == 0:
        den //= p
        k += 1
        pk *= p
    if k == 0:
        return Fraction(0)
    # q = num / (den * p^k) with den coprime to p
    a = q.numerator * pow(den, -1, pk) % pk
    return Fraction(a, pk)


@dataclass(frozen=True)
class LocalContext:
    """Prime, additive-character conductor exponent, and vol(Z_p)."""

    p: int
    psi_conductor_exponent: int = 0
    measure_normalization: Fraction = Fraction(1)

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")
        object.__setattr__(
            self, "measure_normalization", Fraction(self.measure_normalization)
        )
        if self.measure_normalization <= 0:
            raise ValueError("measure normalization must be positive")

    @property
    def is_unramified(self) -> bool:
        return self.psi_conductor_exponent == 0

    def psi(self, x, sign: int = 1) -> CycNumber:
        """psi(x)^sign as an exact cyclotomic value; sign in {+1, -1}."""
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        c = self.psi_conductor_exponent
        if isinstance(x, PAdicPoint):
            if x.p != self.p:
                raise ValueError("point prime does not match context")
            v = x.valuation
            if v == INF or v + c >= 0:
                return CycNumber.one()
            m = -(v + c)
            u = x.residue(m)
            pm = self.p ** m
            return CycNumber.root_of_unity(Fraction(sign * u % pm, pm))
        frac = fractional_part(Fraction(x) * Fraction(self.p) ** c, self.p)
        return CycNumber.root_of_unity(sign * frac)


class PAdicPoint:
    """A point of Q_p with enough digits to evaluate the functions at hand."""

    __slots__ = ("p", "valuation", "unit_residue", "level", "_exact")

    def __init__(self, p: int, valuation, unit_residue: int, level: int,
                 _exact: Optional[Fraction] = None):
        self.p = p
        self.valuation = valuation
        self.unit_residue = unit_residue
        self.level = level
        self._exact = _exact
        if valuation != INF:
            if level < 1:
                raise ValueError("finite points need at least one known digit")
            if unit_residue % p == 0:
                raise ValueError("unit residue must be coprime to p")

    @classmethod
    def from_rational(cls, p: int, q: Rational) -> "PAdicPoint":
        q = Fraction(q)
        if q == 0:
            return cls.zero(p)
        v = val_p(q, p)
        unit = q / Fraction(p) ** v
        res = unit.numerator * pow(unit.denominator, -1, p) % p
        return cls(p, v, res, 1, _exact=q)

    @classmethod
    def zero(cls, p: int) -> "PAdicPoint":
        return cls(p, INF, 1, 0)

    @classmethod
    def from_unit(cls, p: int, valuation: int, unit_residue: int, level: int) -> "PAdicPoint":
        return cls(p, valuation, unit_residue % (p ** level), level)

    def is_zero(self) -> bool:
        return self.valuation == INF

    def residue(self, level: int) -> int:
        """Unit part mod p^level."""
        if self.is_zero():
            raise ValueError("zero has no unit part")
        pl = self.p ** level
        if self._exact is not None:
            unit = self._exact / Fraction(self.p) ** self.valuation
            return unit.numerator * pow(unit.denominator, -1, pl) % pl
        if level > self.level:
            raise InsufficientPrecision(
                f"point known mod p^{self.level}, asked mod p^{level}"
            )
        return self.unit_residue % pl

    def neg(self) -> "PAdicPoint":
        if self.is_zero():
            return self
        if self._exact is not None:
            return PAdicPoint.from_rational(self.p, -self._exact)
        pl = self.p ** self.level
        return PAdicPoint(self.p, self.valuation, (-self.unit_residue) % pl, self.level)

    def inv(self) -> "PAdicPoint":
        if self.is_zero():
            raise ZeroDivisionError("cannot invert 0")
        if self._exact is not None:
            return PAdicPoint.from_rational(self.p, 1 / self._exact)
        pl = self.p ** self.level
        return PAdicPoint(
            self.p, -self.valuation, pow(self.unit_residue, -1, pl), self.level
        )

    def mul_power(self, k: int) -> "PAdicPoint":
        """Multiply by p^k."""
        if self.is_zero():
            return self
        if self._exact is not None:
            return PAdicPoint.from_rational(self.p, self._exact * Fraction(self.p) ** k)
        return PAdicPoint(self.p, self.valuation + k, self.unit_residue, self.level)

    def as_fraction(self) -> Fraction:
        """Exact value if rational-backed, else the finite-digit representative."""
        if self.is_zero():
            return Fraction(0)
        if self._exact is not None:
            return self._exact
        return Fraction(self.unit_residue) * Fraction(self.p) ** self.valuation

    def __eq__(self, other):
        if not isinstance(other, PAdicPoint):
            return NotImplemented
        if self.p != other.p:
            return False
        if self.is_zero() or other.is_zero():
            return self.is_zero() and other.is_zero()
        if self.valuation != other.valuation:
            return False
        if self._exact is not None and other._exact is not None:
            return self._exact == other._exact
        finite_levels = [
            pt.level for pt in (self, other) if pt._exact is None
        ]
        level = min(finite_levels)
        return self.residue(level) == other.residue(level)

    __hash__ = None

    def __repr__(self):
        if self.is_zero():
            return f"PAdicPoint(0, p={self.p})"
        if self._exact is not None:
            return f"PAdicPoint({self._exact}, p={self.p})"
        return (
            f"PAdicPoint(p={self.p}, v={self.valuation}, "
            f"u={self.unit_residue} mod p^{self.level})"
        )
