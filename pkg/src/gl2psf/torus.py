"""Windowed tables of normalized torus data built from a matrix function.

A TorusFunction stores exact values on a finite valuation box, one entry
per (valuation pair, unit residue pair mod p^L). Values carry a symbolic
half-integer q-exponent so the irrational |t|^{1/2} normalizations stay
exact. The tag records which normalization the table holds.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Optional

from .bruhat import BruhatFunction
from .cyclotomic import HalfPower
from .errors import BudgetExceeded, MismatchDetected
from .local import PAdicPoint, val_p
from .orbital import (
    TorusPoint,
    intermediate,
    intermediate_dual,
    orbital,
    push_dual_at,
    push_std_at,
)

TAGS = (
    "RawOrbital",
    "StdPushforward",
    "DualPushforward",
    "Intermediate",
    "DualIntermediate",
)


def _point_value(Phi: BruhatFunction, tag: str, t1: Fraction, t2: Fraction) -> HalfPower:
    p = Phi.p
    if tag == "RawOrbital":
        return HalfPower.of(p, orbital(Phi, (t1, t2), 1))
    if tag == "StdPushforward":
        return push_std_at(Phi, (t1, t2))
    if tag == "DualPushforward":
        return push_dual_at(Phi, (t1, t2))
    if tag == "Intermediate":
        return HalfPower.of(p, intermediate(Phi, t1, t2))
    if tag == "DualIntermediate":
        return HalfPower.of(p, intermediate_dual(Phi, t1, t2))
    raise ValueError(f"unknown tag {tag!r}, expected one of {TAGS}")


def _unit_residue(x: Fraction, p: int, level: int) -> int:
    mod = p ** level
    u = x / Fraction(p) ** val_p(x, p)
    return u.numerator * pow(u.denominator, -1, mod) % mod


def _derived_unit_level(Phi: BruhatFunction, tag: str, window) -> int:
    """Smallest tabulation level guaranteed to make the orbital-backed
    tables locally constant on the window.

    A unit change of t_i at level m perturbs each matrix slot of the
    integrand by a known valuation shift; the table reading is unchanged
    once every shift clears the slot's constancy level. The binding terms:
    the linear slots give C+S, the t1 slot itself gives C2-v(t1), and the
    bilinear slot couples both supports, giving C1+S0+S3+v(t1) from the t1
    unit and C1-v(t2) from the t2 unit. The dual table applies the same
    bounds at the inverted, swapped point.
    """
    (a_lo, a_hi), (b_lo, b_hi) = window
    S0, S3 = Phi.axis_S(0), Phi.axis_S(3)
    C0, C1, C2, C3 = (Phi.axis_C(i) for i in range(4))
    base = max(1, C0 + S0, C3 + S3)
    if tag in ("RawOrbital", "StdPushforward"):
        return max(base, C2 - a_lo, C1 + S0 + S3 + a_hi, C1 - b_lo)
    if tag == "DualPushforward":
        return max(base, C2 + b_hi, C1 + S0 + S3 - b_lo, C1 + a_hi)
    # intermediate tags are tabulated at the requested level; their
    # constancy level depends on the materialized slice and is checked by
    # refinement on demand rather than derived here
    return 1


class TorusFunction:
    """Exact table over a valuation window at a fixed unit level."""

    __slots__ = ("p", "window", "unit_level", "tag", "table")

    def __init__(self, p: int, window, unit_level: int, tag: str, table: dict):
        (a_lo, a_hi), (b_lo, b_hi) = window
        if a_lo > a_hi or b_lo > b_hi:
            raise ValueError("window bounds must satisfy lo <= hi")
        if unit_level < 1:
            raise ValueError("unit_level must be >= 1")
        if tag not in TAGS:
            raise ValueError(f"unknown tag {tag!r}, expected one of {TAGS}")
        self.p = p
        self.window = ((a_lo, a_hi), (b_lo, b_hi))
        self.unit_level = unit_level
        self.tag = tag
        self.table = table

    # -- construction -----------------------------------------------------

    @classmethod
    def tabulate(cls, Phi: BruhatFunction, window, unit_level: int, tag: str,
                 threads: int = 1, max_entries: int = 200_000) -> "TorusFunction":
        """Evaluate the tagged normalization on every grid point of the
        window. Grid points are independent, so the evaluation order never
        affects the table. The unit level is raised automatically when the
        window demands finer residues than requested."""
        p = Phi.p
        (a_lo, a_hi), (b_lo, b_hi) = window
        unit_level = max(unit_level, _derived_unit_level(Phi, tag, window))
        n_units = p ** unit_level - p ** (unit_level - 1)
        n_entries = (a_hi - a_lo + 1) * (b_hi - b_lo + 1) * n_units ** 2
        if n_entries > max_entries:
            raise BudgetExceeded(
                f"table needs {n_entries} entries at unit level {unit_level}, "
                f"cap is {max_entries}"
            )
        units = [u for u in range(1, p ** unit_level) if u % p]
        keys = [
            (v1, v2, u1, u2)
            for v1 in range(a_lo, a_hi + 1)
            for v2 in range(b_lo, b_hi + 1)
            for u1 in units
            for u2 in units
        ]

        def at(key):
            v1, v2, u1, u2 = key
            t1 = Fraction(u1) * Fraction(p) ** v1
            t2 = Fraction(u2) * Fraction(p) ** v2
            return _point_value(Phi, tag, t1, t2)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                values = list(pool.map(at, keys))
        else:
            values = [at(k) for k in keys]
        return cls(p, window, unit_level, tag, dict(zip(keys, values)))

    # -- lookup -------------------------------------------------------------

    def _key_of(self, t1, t2) -> tuple:
        p = self.p
        if isinstance(t1, PAdicPoint):
            v1, u1 = t1.valuation, t1.residue(self.unit_level)
        else:
            t1 = Fraction(t1)
            v1, u1 = val_p(t1, p), _unit_residue(t1, p, self.unit_level)
        if isinstance(t2, PAdicPoint):
            v2, u2 = t2.valuation, t2.residue(self.unit_level)
        else:
            t2 = Fraction(t2)
            v2, u2 = val_p(t2, p), _unit_residue(t2, p, self.unit_level)
        return (v1, v2, u1, u2)

    def value_at(self, t1, t2=None) -> HalfPower:
        if t2 is None:
            if isinstance(t1, TorusPoint):
                t1, t2 = t1.t1, t1.t2
            else:
                t1, t2 = t1
        key = self._key_of(t1, t2)
        if key not in self.table:
            raise ValueError(f"point with key {key} outside tabulated window")
        return self.table[key]

    def is_zero_table(self) -> bool:
        return all(v.is_zero() for v in self.table.values())

    # -- invariants ---------------------------------------------------------

    def refined(self, Phi: BruhatFunction, threads: int = 1) -> "TorusFunction":
        return TorusFunction.tabulate(
            Phi, self.window, self.unit_level + 1, self.tag, threads=threads)

    def check_refinement(self, Phi: BruhatFunction, threads: int = 1) -> None:
        """Recompute at unit level L+1 and require every child cell to carry
        its parent's value. Raises MismatchDetected if the table is not
        locally constant at level L."""
        fine = self.refined(Phi, threads=threads)
        mod = self.p ** self.unit_level
        for (v1, v2, u1, u2), value in fine.table.items():
            parent = self.table[(v1, v2, u1 % mod, u2 % mod)]
            if value != parent:
                raise MismatchDetected(
                    f"not locally constant at level {self.unit_level}: "
                    f"key ({v1},{v2},{u1},{u2}) refines to {value!r} "
                    f"but the parent cell holds {parent!r}"
                )

    # -- serialization -----------------------------------------------------

    def to_obj(self) -> dict:
        entries = [
            [v1, v2, u1, u2, hp.to_obj()]
            for (v1, v2, u1, u2), hp in sorted(self.table.items())
        ]
        return {
            "p": self.p,
            "window": [list(self.window[0]), list(self.window[1])],
            "unit_level": self.unit_level,
            "tag": self.tag,
            "entries": entries,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "TorusFunction":
        table = {
            (int(v1), int(v2), int(u1), int(u2)): HalfPower.from_obj(hp)
            for v1, v2, u1, u2, hp in obj["entries"]
        }
        window = (tuple(obj["window"][0]), tuple(obj["window"][1]))
        return cls(int(obj["p"]), window, int(obj["unit_level"]), obj["tag"], table)

    def __eq__(self, other):
        if not isinstance(other, TorusFunction):
            return NotImplemented
        if (self.p, self.window, self.unit_level, self.tag) != (
                other.p, other.window, other.unit_level, other.tag):
            return False
        if self.table.keys() != other.table.keys():
            return False
        return all(self.table[k] == other.table[k] for k in self.table)

    __hash__ = None

    def __repr__(self):
        return (f"TorusFunction(p={self.p}, window={self.window}, "
                f"unit_level={self.unit_level}, tag={self.tag!r}, "
                f"{len(self.table)} entries)")


def push_std(Phi: BruhatFunction, window, unit_level: int,
             threads: int = 1) -> TorusFunction:
    """Table of the standard-side pushforward normalization
    |t1|^{3/2}|t2|^{1/2} times the orbital value."""
    return TorusFunction.tabulate(Phi, window, unit_level, "StdPushforward",
                                  threads=threads)


def push_dual(Phi: BruhatFunction, window, unit_level: int,
              threads: int = 1) -> TorusFunction:
    """Table of the inverse-embedding pushforward normalization
    |t1|^{-1/2}|t2|^{-3/2} times the dual-character orbital value at the
    inverted, swapped point."""
    return TorusFunction.tabulate(Phi, window, unit_level, "DualPushforward",
                                  threads=threads)
