"""Spherical Hecke algebra acting on 4-dimensional Schwartz tables.

Two exact convolution actions are provided, both normalized so the
maximal compact subgroup K has volume one (the coefficient-1 unit element
is then the identity on invariant tables, and every contracted identity
is covariant under rescaling the Haar measure):

* hecke_convolve: (h * f)(x) = integral of h(x g^{-1}) f(g) dg. Expanded
  in cosets this integrates f over left translates g -> gx with g running
  through the inverted double cosets, so the table is first projected
  onto its left-invariants by an exact average over K and then summed
  over left translates by the inverted representatives.
* hecke_convolve_right: the right-translation companion,
  (h * f)(y) = integral over the forward double cosets of f(y g) dg,
  computed as a right average followed by right translates.

The 4-dimensional Fourier transform exchanges the two actions and
multiplies each double-coset coefficient by |det|^2 of the coset; see
det_square_twist. Both averages are computed in stages through the two
Iwasawa-type cells with derived constancy levels.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .bruhat import (BruhatFunction, Factor, _check_cells, _ga_embed,
                     _ga_reduce, _ga_to_cycs)
from .cyclotomic import CycNumber
from .errors import BudgetExceeded
from .local import val_p

AVG_CELL_CAP = 200_000


class HeckeElement:
    """Finitely supported bi-invariant function, one rational coefficient
    per elementary-divisor pair a >= b."""

    __slots__ = ("pairs",)

    def __init__(self, pairs):
        data: dict[tuple[int, int], Fraction] = {}
        items = pairs.items() if isinstance(pairs, dict) else pairs
        for (a, b), c in items:
            a, b = int(a), int(b)
            if a < b:
                raise ValueError(f"need a >= b, got ({a}, {b})")
            c = Fraction(c)
            if c:
                data[(a, b)] = data.get((a, b), Fraction(0)) + c
        self.pairs = {k: v for k, v in sorted(data.items()) if v}

    @classmethod
    def unit(cls) -> "HeckeElement":
        return cls({(0, 0): 1})

    @classmethod
    def t_p(cls, power: int = 1) -> "HeckeElement":
        return cls({(power, 0): 1})

    @classmethod
    def central(cls, power: int = 1) -> "HeckeElement":
        return cls({(power, power): 1})

    def det_square_twist(self, p: int) -> "HeckeElement":
        """Multiply each double-coset coefficient by |det|^2 of the coset."""
        return HeckeElement({
            (a, b): c * Fraction(p) ** (-2 * (a + b))
            for (a, b), c in self.pairs.items()
        })

    def __add__(self, other):
        if not isinstance(other, HeckeElement):
            return NotImplemented
        return HeckeElement(list(self.pairs.items()) + list(other.pairs.items()))

    def scale(self, c) -> "HeckeElement":
        c = Fraction(c)
        return HeckeElement({k: v * c for k, v in self.pairs.items()})

    def __eq__(self, other):
        if not isinstance(other, HeckeElement):
            return NotImplemented
        return self.pairs == other.pairs

    __hash__ = None

    def __repr__(self):
        return f"HeckeElement({self.pairs})"


def coset_reps(p: int, a: int, b: int) -> list[list[list[Fraction]]]:
    """Upper-triangular representatives of the left cosets inside the
    double coset of diag(p^a, p^b). The off-diagonal entry runs mod the
    leading diagonal entry, pinned to the exact gcd valuation b."""
    if a < b:
        raise ValueError("need a >= b")
    reps = []
    for c1 in range(b, a + 1):
        c2 = a + b - c1
        d1 = Fraction(p) ** c1
        d2 = Fraction(p) ** c2
        for n in range(p ** (c1 - b)):
            if c1 > b and c2 > b and n % p == 0:
                continue  # gcd valuation would exceed b
            if n == 0 and not (c1 == b or c2 == b):
                continue
            m = Fraction(n) * Fraction(p) ** b
            reps.append([[d1, m], [Fraction(0), d2]])
    return reps


_TRANSPOSE = [
    [Fraction(1), Fraction(0), Fraction(0), Fraction(0)],
    [Fraction(0), Fraction(0), Fraction(1), Fraction(0)],
    [Fraction(0), Fraction(1), Fraction(0), Fraction(0)],
    [Fraction(0), Fraction(0), Fraction(0), Fraction(1)],
]


def _transpose(Phi: BruhatFunction) -> BruhatFunction:
    return Phi.linear_pullback(_TRANSPOSE)


# -- exact right average over the maximal compact ---------------------------


def _coupled_bounds(Phi: BruhatFunction) -> tuple[tuple[int, ...], tuple[int, ...]]:
    # right translation only mixes slots within a matrix row
    S = [Phi.axis_S(i) for i in range(4)]
    C = [Phi.axis_C(i) for i in range(4)]
    Sr = max(S[0], S[1]), max(S[2], S[3])
    Cr = max(C[0], C[1]), max(C[2], C[3])
    return (Sr[0], Sr[0], Sr[1], Sr[1]), (Cr[0], Cr[0], Cr[1], Cr[1])


class _DenseGrid:
    """Flat table over the cell grid r_i / p^{S_i} mod p^{C_i}."""

    def __init__(self, p: int, S, C):
        self.p = p
        self.S = S
        self.C = C
        self.mods = tuple(p ** (s + c) for s, c in zip(S, C))
        n = 1
        for m in self.mods:
            n *= m
        if n > AVG_CELL_CAP:
            raise BudgetExceeded(
                f"group average needs {n} cells, cap is {AVG_CELL_CAP}")
        self.size = n

    def flat(self, r0, r1, r2, r3) -> int:
        m = self.mods
        return ((r0 * m[1] + r1) * m[2] + r2) * m[3] + r3

    def points(self):
        m = self.mods
        for r0 in range(m[0]):
            for r1 in range(m[1]):
                for r2 in range(m[2]):
                    for r3 in range(m[3]):
                        yield r0, r1, r2, r3

    def fill_from(self, Phi: BruhatFunction) -> list[CycNumber]:
        p = self.p
        vals = []
        for r0, r1, r2, r3 in self.points():
            xs = [
                Fraction(r0, p ** self.S[0]),
                Fraction(r1, p ** self.S[1]),
                Fraction(r2, p ** self.S[2]),
                Fraction(r3, p ** self.S[3]),
            ]
            vals.append(Phi.eval_rational(xs))
        return vals


def _grid_coords(grid: _DenseGrid):
    m = grid.mods
    rem = np.arange(grid.size, dtype=np.int64)
    r3 = rem % m[3]
    rem = rem // m[3]
    r2 = rem % m[2]
    rem = rem // m[2]
    return rem // m[1], rem % m[1], r2, r3


def _flat_idx(grid: _DenseGrid, r0, r1, r2, r3):
    m = grid.mods
    return ((r0 * m[1] + r1) * m[2] + r2) * m[3] + r3


def _stage_shear_right(grid, V, R, level):
    """Sum over right translation by upper unipotents at the level where
    the table stops seeing the shear parameter; returns (sum, count)."""
    if level <= 0:
        return V, 1
    p, m = grid.p, grid.mods
    r0, r1, r2, r3 = R
    acc = np.zeros_like(V)
    n = p ** level
    for u in range(n):
        acc += V[_flat_idx(grid, r0, (r0 * u + r1) % m[1],
                           r2, (r2 * u + r3) % m[3])]
    return acc, n


def _stage_shear_lower(grid, V, R, level):
    """Sum over right translation by lower unipotents with parameter in
    p times the integers."""
    p, m = grid.p, grid.mods
    r0, r1, r2, r3 = R
    acc = np.zeros_like(V)
    n = 0
    for c in range(0, p ** level, p):
        acc += V[_flat_idx(grid, (r0 + c * r1) % m[0], r1,
                           (r2 + c * r3) % m[2], r3)]
        n += 1
    return acc, n


def _stage_units_left(grid, V, R, level):
    """Sum over unit scalings of the left column (slots 0, 2)."""
    p, m = grid.p, grid.mods
    r0, r1, r2, r3 = R
    units = [a for a in range(p ** level) if a % p]
    acc = np.zeros_like(V)
    for a in units:
        acc += V[_flat_idx(grid, (a * r0) % m[0], r1, (a * r2) % m[2], r3)]
    return acc, len(units)


def _stage_units_right(grid, V, R, level):
    """Sum over unit scalings of the right column (slots 1, 3)."""
    p, m = grid.p, grid.mods
    r0, r1, r2, r3 = R
    units = [d for d in range(p ** level) if d % p]
    acc = np.zeros_like(V)
    for d in units:
        acc += V[_flat_idx(grid, r0, (d * r1) % m[1], r2, (d * r3) % m[3])]
    return acc, len(units)


def _stage_column_swap(grid, V, R):
    r0, r1, r2, r3 = R
    return V[_flat_idx(grid, r1, r0, r3, r2)]


def k_average_right(Phi: BruhatFunction) -> BruhatFunction:
    """Exact average of x -> Phi(xk) over the maximal compact subgroup.

    The group splits into the cell with lower-left entry divisible by p,
    of measure 1/(p+1), and the opposite cell of measure p/(p+1). Each
    cell carries exact uniform triangular coordinates, so the average
    factors into shear, unit-scaling and column-swap stages. Stages run
    as integer gathers on group-algebra rows over a dense table with
    coupled support/level bounds; the weights divide out once at the end."""
    p = Phi.p
    S, C = _coupled_bounds(Phi)
    grid = _DenseGrid(p, S, C)
    base = grid.fill_from(Phi)
    V, D, L = _ga_embed(base, p, 1)
    R = _grid_coords(grid)

    l_shear = max(0, C[1] + S[0], C[3] + S[2])
    l_lower = max(1, C[0] + S[1], C[2] + S[3])
    l_left = max(1, C[0] + S[0], C[2] + S[2])
    l_right = max(1, C[1] + S[1], C[3] + S[3])

    if V.dtype != object:
        worst = p ** (l_lower + l_left + l_right + 2 * l_shear + 2)
        peak = int(np.abs(V).max(initial=0))
        if peak * worst > 2 ** 61:
            V = V.astype(object)

    # cell with lower-left entry in p * integers
    borel, nb = _stage_shear_lower(grid, V, R, l_lower)
    borel, n2 = _stage_units_left(grid, borel, R, l_left)
    borel, n3 = _stage_units_right(grid, borel, R, l_right)
    borel, n4 = _stage_shear_right(grid, borel, R, l_shear)
    Mb = nb * n2 * n3 * n4

    # opposite cell: unit lower-left entry, factored through a column swap
    big, g1 = _stage_shear_right(grid, V, R, l_shear)
    big = _stage_column_swap(grid, big, R)
    big, g2 = _stage_units_left(grid, big, R, l_left)
    big, g3 = _stage_units_right(grid, big, R, l_right)
    big, g4 = _stage_shear_right(grid, big, R, l_shear)
    Mg = g1 * g2 * g3 * g4

    lcm_m = Mb // math.gcd(Mb, Mg) * Mg
    mixed = borel * (lcm_m // Mb) + big * (p * (lcm_m // Mg))
    D_out = D * lcm_m * (p + 1)
    vals = _ga_to_cycs(_ga_reduce(mixed, p, L), D_out, L)
    return BruhatFunction.from_dense(Phi.ctx, 4, list(S), list(C), vals)


def k_average_left(Phi: BruhatFunction) -> BruhatFunction:
    """Exact average of x -> Phi(kx) over the maximal compact subgroup.

    Left translation mixes slots within matrix columns, so the average is
    the transpose conjugate of the right one."""
    return _transpose(k_average_right(_transpose(Phi)))


# -- summed translates (integer fast path) -----------------------------------


def _expand4(B, side: str):
    """4x4 integer matrix of the coordinate action; B is the 2x2 block
    already oriented so each coupled slot pair transforms by B."""
    (b0, b1), (b2, b3) = B
    if side == "left":
        return [[b0, 0, b1, 0], [0, b0, 0, b1], [b2, 0, b3, 0], [0, b2, 0, b3]]
    return [[b0, b1, 0, 0], [b2, b3, 0, 0], [0, 0, b0, b1], [0, 0, b2, b3]]


def _translate_box(B, k: int, side: str, SG, CG, p: int):
    """Support/level box of x -> G(g x) or G(x g) for g = p^-k B, matching
    the bounds an affine pullback would use, so translates with equal
    boxes can share one accumulation grid."""
    det = B[0][0] * B[1][1] - B[0][1] * B[1][0]
    adj = [[B[1][1], -B[0][1]], [-B[1][0], B[0][0]]]
    dv = val_p(det, p)
    pairs = ((0, 2), (1, 3)) if side == "left" else ((0, 1), (2, 3))
    Sn = [0] * 4
    Cn = [0] * 4
    for axes in pairs:
        for t in range(2):
            j = axes[t]
            best = None
            for s in range(2):
                if adj[t][s] == 0:
                    continue
                cand = k + val_p(adj[t][s], p) - dv - SG[axes[s]]
                best = cand if best is None else min(best, cand)
            Sn[j] = -best
            lev = None
            for s in range(2):
                if B[s][t] == 0:
                    continue
                cand = CG[axes[s]] - (val_p(B[s][t], p) - k)
                lev = cand if lev is None else max(lev, cand)
            Cn[j] = max(lev, -Sn[j])
    return tuple(Sn), tuple(Cn)


def _translate_sum(G: BruhatFunction, mats, side: str,
                   cell_cap=None) -> BruhatFunction:
    """Exact sum over t of x -> G(g_t x) (side "left") or x -> G(x g_t)
    (side "right"), each g_t given as (U, k) for the scaled 2x2 integer
    matrix p^-k U.

    The table is densified once and lifted to integer group-algebra rows;
    each translate then contributes one vectorized gather (residue index
    arithmetic plus a divisibility mask for points leaving the support
    box), and translates sharing an output box share one accumulator.
    This replaces a rational pullback per translate."""
    ctx = G.ctx
    p = G.p
    dense = G.densified(cell_cap)
    if not dense.terms:
        return BruhatFunction.zero(ctx, 4)
    f = dense.terms[0][0]
    SG, CG = list(f.S), list(f.C)
    NG = [p ** (SG[i] + CG[i]) for i in range(4)]
    V, D, L = _ga_embed(f.table, p, 1)
    if V.dtype != object and len(mats) > 1:
        peak = int(np.abs(V).max(initial=0)) * len(mats)
        if peak > 2 ** 62:
            V = V.astype(object)

    groups: dict[tuple, list] = {}
    for U, k in mats:
        B = U if side == "left" else [[U[0][0], U[1][0]], [U[0][1], U[1][1]]]
        box = _translate_box(B, k, side, SG, CG, p)
        groups.setdefault(box, []).append((B, k))

    terms = []
    for (Sn, Cn), group in groups.items():
        mods = [p ** (Sn[j] + Cn[j]) for j in range(4)]
        count = mods[0] * mods[1] * mods[2] * mods[3]
        _check_cells(count, cell_cap)
        idx = np.arange(count, dtype=np.int64)
        r3 = idx % mods[3]
        rest = idx // mods[3]
        r2 = rest % mods[2]
        rest = rest // mods[2]
        R = (rest // mods[1], rest % mods[1], r2, r3)
        T = max(0, max(Sn))
        acc = np.zeros((count, L), dtype=V.dtype)
        for B, k in group:
            M4 = _expand4(B, side)
            flatq = None
            valid = None
            for i in range(4):
                n_i = None
                for j in range(4):
                    if not M4[i][j]:
                        continue
                    piece = (M4[i][j] * p ** (T - Sn[j])) * R[j]
                    n_i = piece if n_i is None else n_i + piece
                if n_i is None:
                    n_i = np.zeros(count, dtype=np.int64)
                e = k + T - SG[i]
                if e > 0:
                    d = p ** e
                    ok = n_i % d == 0
                    valid = ok if valid is None else valid & ok
                    q = (n_i // d) % NG[i]
                else:
                    q = (n_i * p ** (-e)) % NG[i]
                flatq = q if flatq is None else flatq * NG[i] + q
            if valid is None:
                acc += V[flatq]
            else:
                acc[valid] += V[flatq[valid]]
        cycs = _ga_to_cycs(_ga_reduce(acc, p, L), D, L)
        terms.append([Factor(p, (0, 1, 2, 3), list(Sn), list(Cn), cycs)])
    return BruhatFunction(ctx, 4, terms)


# -- convolution -------------------------------------------------------------


def hecke_convolve(h: HeckeElement, Phi: BruhatFunction,
                   invariant: bool = False,
                   cell_cap=None) -> BruhatFunction:
    """Convolution of a bi-invariant element against a Schwartz table,
    (h * f)(x) = integral of h(x g^{-1}) f(g) dg with vol(K) = 1.

    Expanding h over double cosets turns this into an integral of
    g -> f(gx) over the inverted cosets: the table is averaged over K on
    the left once, then summed over left translates by the inverted
    representatives (the transposed upper-triangular system scaled by the
    determinant valuation). Pass invariant=True when the table is already
    left-invariant (for example the output of a previous convolution) to
    skip the projection."""
    p = Phi.p
    G = Phi if invariant else k_average_left(Phi)
    out = BruhatFunction.zero(Phi.ctx, 4)
    for (a, b), coeff in h.pairs.items():
        mats = []
        for rep in coset_reps(p, a, b):
            U = [[int(rep[0][0]), 0], [int(rep[0][1]), int(rep[1][1])]]
            mats.append((U, a + b))
        part = _translate_sum(G, mats, "left", cell_cap)
        out = out + part.scale(coeff)
    return out


def hecke_convolve_right(h: HeckeElement, Phi: BruhatFunction,
                         invariant: bool = False,
                         cell_cap=None) -> BruhatFunction:
    """Right-translation companion of hecke_convolve:
    (h * f)(y) = integral of f(yg) dg over the forward double cosets.

    The 4-dimensional Fourier transform carries hecke_convolve into this
    action with each coefficient multiplied by |det|^2 of its coset. Pass
    invariant=True when the table is already right-invariant."""
    p = Phi.p
    G = Phi if invariant else k_average_right(Phi)
    out = BruhatFunction.zero(Phi.ctx, 4)
    for (a, b), coeff in h.pairs.items():
        mats = []
        for rep in coset_reps(p, a, b):
            U = [[int(rep[0][0]), int(rep[0][1])],
                 [int(rep[1][0]), int(rep[1][1])]]
            mats.append((U, 0))
        part = _translate_sum(G, mats, "right", cell_cap)
        out = out + part.scale(coeff)
    return out


def hecke_product(h1: HeckeElement, h2: HeckeElement, p: int) -> HeckeElement:
    """Algebra product, computed by sorting products of coset
    representatives into double cosets by elementary-divisor type."""
    pairs: dict[tuple[int, int], Fraction] = {}
    degs: dict[tuple[int, int], int] = {}
    for (a1, b1), c1 in h1.pairs.items():
        reps1 = coset_reps(p, a1, b1)
        for (a2, b2), c2 in h2.pairs.items():
            reps2 = coset_reps(p, a2, b2)
            for g in reps1:
                for d in reps2:
                    prod = [
                        [g[0][0] * d[0][0], g[0][0] * d[0][1] + g[0][1] * d[1][1]],
                        [Fraction(0), g[1][1] * d[1][1]],
                    ]
                    vals = [val_p(e, p) for row in prod for e in row if e]
                    lo = min(vals)
                    det_val = val_p(prod[0][0] * prod[1][1], p)
                    key = (det_val - lo, lo)
                    if key not in degs:
                        degs[key] = len(coset_reps(p, *key))
                    pairs[key] = pairs.get(key, Fraction(0)) + \
                        Fraction(c1 * c2, degs[key])
    return HeckeElement(pairs)
