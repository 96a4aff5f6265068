"""Locally constant compactly supported functions on Q_p^d with exact ops.

A BruhatFunction is a finite sum of terms; each term is a product of
factors over disjoint axis subsets. A factor stores, per axis, a support
exponent S (support inside p^(-S) Z_p) and a constancy exponent C
(constant on cosets of p^C Z_p), with S + C >= 0, plus a flat table of
CycNumber values indexed per axis by r in [0, p^(S+C)): the cell is
r * p^(-S) + p^C Z_p. S and C may each be negative.

The canonical serialized form is a single dense table with one (S, C)
pair; the factored form is an internal optimization that keeps tensor
products and partial transforms cheap. Per-axis (S, C) are minimized
after every operation.

Fourier transforms use the convention F(f)(x) = integral f(y) psi^(sign *
xy) dy with sign = -1 as the default (the transform attached to psi), and
require the unramified self-dual normalization (conductor exponent 0,
vol(Z_p) = 1). Transforms run as exact radix-p Cooley-Tukey passes over
integer group-algebra vectors: a value (1/D) * sum_j V_j zeta_L^j is a row
of ints, a twiddle multiplication is a cyclic roll, and reduction modulo
the cyclotomic polynomial happens once at the end.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .cyclotomic import CycNumber, _reduce_mod_cyclo, euler_phi
from .errors import BudgetExceeded, SingularMatrix, Unsupported
from .local import INF, LocalContext, PAdicPoint, val_p

CELL_CAP = 10 ** 7


def _check_cells(count: int, cell_cap: Optional[int]):
    cap = CELL_CAP if cell_cap is None else cell_cap
    if count > cap:
        raise BudgetExceeded(f"operation needs {count} cells > cap {cap}")


# ---------------------------------------------------------------------------
# group-algebra helpers (exact integer transforms)
# ---------------------------------------------------------------------------


def _lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


def _ga_from_cycs(values: Sequence[CycNumber], p: int, min_level: int):
    """Ints (n, L), common denominator D, level L with every value lifted.

    Row r encodes value_r = (1/D) * sum_j V[r, j] zeta_L^j, j < phi(L),
    already reduced. L is a multiple of min_level and of every conductor.
    """
    L = min_level
    for v in values:
        L = _lcm(L, v.conductor)
    phi_L = euler_phi(L)
    D = 1
    lifted = []
    for v in values:
        lv = v.lift(L) if v.conductor != L else v
        lifted.append(lv)
        for c in lv.coeffs:
            D = _lcm(D, c.denominator)
    # a length-N transform sums N rows, so keep headroom for that growth
    guard = max(1, (2 ** 61) // max(1, min_level))
    need_object = False
    rows = []
    for lv in lifted:
        row = [c.numerator * (D // c.denominator) for c in lv.coeffs]
        row.extend([0] * (L - phi_L))
        if any(abs(x) > guard for x in row):
            need_object = True
        rows.append(row)
    dtype = object if need_object else np.int64
    V = np.array(rows, dtype=dtype)
    return V, D, L


def _ga_embed(values: Sequence[CycNumber], p: int, min_level: int):
    """Ints (n, L), common denominator D, level L with every value embedded.

    Same contract as _ga_from_cycs except rows are unreduced group-algebra
    elements: value_r = (1/D) * sum_j V[r, j] zeta_L^j with j over Z/L and
    reduction deferred to _ga_reduce. Values are filled by conductor group
    with a pure index placement, so the per-value work stays at phi(n)
    integer multiplies instead of a cyclotomic lift."""
    groups: dict[int, list[int]] = {}
    for i, v in enumerate(values):
        groups.setdefault(v.conductor, []).append(i)
    L = min_level
    for n in groups:
        L = _lcm(L, n)
    D = 1
    for v in values:
        for c in v.coeffs:
            d = c.denominator
            if d != 1:
                D = _lcm(D, d)
    guard = max(1, (2 ** 61) // max(1, min_level))
    need_object = False
    blocks = []
    for n, idxs in groups.items():
        step = L // n
        cols = np.array([j * step for j in range(euler_phi(n))], dtype=np.intp)
        rows = []
        peak = 0
        for i in idxs:
            row = [c.numerator * (D // c.denominator) for c in values[i].coeffs]
            for x in row:
                if x > peak:
                    peak = x
                elif -x > peak:
                    peak = -x
            rows.append(row)
        if peak > guard:
            need_object = True
        blocks.append((np.array(idxs, dtype=np.intp), cols, rows))
    dtype = object if need_object else np.int64
    V = np.zeros((len(values), L), dtype=dtype)
    for idxs, cols, rows in blocks:
        V[idxs[:, None], cols[None, :]] = np.array(rows, dtype=dtype)
    return V, D, L


def _ga_reduce(V: np.ndarray, p: int, L: int) -> np.ndarray:
    """Reduce group-algebra rows (..., L) to coefficient rows (..., phi(L))."""
    phi_L = euler_phi(L)
    if L == phi_L:
        return V
    if L == 1 or V.shape[-1] == phi_L:
        return V
    # p-power fast path: one fold using zeta^((p-1)m + r) = -sum_i zeta^(im+r)
    n = L
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    if n == 1:
        m = L // p
        W = V.reshape(V.shape[:-1] + (p, m))
        out = W[..., : p - 1, :] - W[..., p - 1 :, :]
        return out.reshape(V.shape[:-1] + ((p - 1) * m,))
    # general level: multiply by a precomputed monomial-reduction matrix
    R = _reduction_matrix(L)
    if V.dtype == object:
        R = R.astype(object)
    return V @ R


_REDUCTION_CACHE: dict[int, np.ndarray] = {}


def _reduction_matrix(L: int) -> np.ndarray:
    R = _REDUCTION_CACHE.get(L)
    if R is not None:
        return R
    phi_L = euler_phi(L)
    rows = []
    for j in range(L):
        mono = [0] * (j + 1)
        mono[j] = 1
        rows.append(_reduce_mod_cyclo(L, mono))
    R = np.array(rows, dtype=np.int64)
    _REDUCTION_CACHE[L] = R
    return R


def _ga_to_cycs(Vred: np.ndarray, D: int, L: int) -> list[CycNumber]:
    flat = Vred.reshape(-1, Vred.shape[-1])
    zero = CycNumber.zero()
    out = [zero] * flat.shape[0]
    nz = flat.any(axis=1)
    for i in np.nonzero(nz)[0]:
        coeffs = tuple(Fraction(int(x), D) for x in flat[i])
        out[int(i)] = CycNumber(L, coeffs, _reduced=True)._demote()
    return out


def _ct_dft(V: np.ndarray, p: int, shift: int, L: int) -> np.ndarray:
    """W[k] = sum_n roll(V[n], shift*k*n mod L); V shape (N, ..., L)."""
    N = V.shape[0]
    if N == 1:
        return V.copy()
    M = N // p
    subs = [_ct_dft(V[q::p], p, (shift * p) % L, L) for q in range(p)]
    W = np.empty_like(V)
    for k in range(N):
        km = k % M
        acc = None
        for q in range(p):
            t = (shift * k * q) % L
            piece = np.roll(subs[q][km], t, axis=-1) if t else subs[q][km]
            acc = piece.copy() if acc is None else acc + piece
        W[k] = acc
    return W


# ---------------------------------------------------------------------------
# factors
# ---------------------------------------------------------------------------


class Factor:
    """Product-factor over a sorted tuple of axes with per-axis (S, C)."""

    __slots__ = ("p", "axes", "S", "C", "table")

    def __init__(self, p: int, axes: Sequence[int], S: Sequence[int],
                 C: Sequence[int], table: Sequence[CycNumber]):
        axes = tuple(axes)
        if list(axes) != sorted(axes):
            raise ValueError("factor axes must be sorted")
        self.p = p
        self.axes = axes
        self.S = tuple(int(s) for s in S)
        self.C = tuple(int(c) for c in C)
        for s, c in zip(self.S, self.C):
            if s + c < 0:
                raise ValueError("each axis needs S + C >= 0")
        expected = 1
        for s, c in zip(self.S, self.C):
            expected *= p ** (s + c)
        table = list(table)
        if len(table) != expected:
            raise ValueError(f"table length {len(table)} != {expected}")
        self.table = table

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.p ** (s + c) for s, c in zip(self.S, self.C))

    def cells(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n

    def copy(self) -> "Factor":
        return Factor(self.p, self.axes, self.S, self.C, list(self.table))

    def is_zero(self) -> bool:
        return all(v.is_zero() for v in self.table)

    # index along one local axis position k for a point x
    def _axis_index(self, k: int, x: PAdicPoint):
        S, C = self.S[k], self.C[k]
        v = x.valuation
        if v == INF:
            return 0  # the point 0 always lies in the r = 0 cell
        if v < -S:
            return None
        if v >= C:
            return 0
        u = x.residue(C - v)
        return (u * self.p ** (v + S)) % (self.p ** (S + C))

    def eval(self, xs: Sequence[PAdicPoint]) -> CycNumber:
        idx = 0
        for k, x in enumerate(xs):
            r = self._axis_index(k, x)
            if r is None:
                return CycNumber.zero()
            idx = idx * self.shape[k] + r
        return self.table[idx]

    def integrate_table(self) -> CycNumber:
        total = CycNumber.zero()
        for v in self.table:
            if not v.is_zero():
                total = total + v
        scale = Fraction(1)
        for c in self.C:
            scale /= Fraction(self.p) ** c
        return total * scale

    def normalized(self) -> Optional["Factor"]:
        """Minimal per-axis (S, C); None if identically zero."""
        if self.is_zero():
            return None
        arr = np.array(self.table, dtype=object).reshape(self.shape)
        S, C = list(self.S), list(self.C)
        changed = True
        zero = CycNumber.zero()
        is_zero = np.vectorize(lambda v: v.is_zero(), otypes=[bool])
        while changed:
            changed = False
            for k in range(len(self.axes)):
                n = self.p ** (S[k] + C[k])
                if n == 1:
                    continue
                moved = np.moveaxis(arr, k, 0)
                # drop an empty outer shell: only indices divisible by p used
                mask = is_zero(moved.reshape(n, -1))
                nonzero_rows = ~mask.all(axis=1)
                idxs = np.nonzero(nonzero_rows)[0]
                if len(idxs) and (idxs % self.p == 0).all() and S[k] + C[k] >= 1:
                    moved = moved[:: self.p]
                    # index r' = r/p represents r' * p^-(S-1): same cosets
                    S[k] -= 1
                    arr = np.moveaxis(moved, 0, k)
                    changed = True
                    continue
                # merge fine digits: value independent of the top index digit
                m = n // self.p
                grouped = moved.reshape(self.p, m, -1)
                same = True
                for j in range(1, self.p):
                    pairs = zip(grouped[0].reshape(-1), grouped[j].reshape(-1))
                    if not all(a == b for a, b in pairs):
                        same = False
                        break
                if same and S[k] + C[k] >= 1:
                    moved = grouped[0].reshape((m,) + moved.shape[1:])
                    C[k] -= 1
                    arr = np.moveaxis(moved, 0, k)
                    changed = True
        return Factor(self.p, self.axes, S, C, list(arr.reshape(-1)))

    def relabel(self, mapping: dict[int, int]) -> "Factor":
        new_axes = [mapping.get(a, a) for a in self.axes]
        order = sorted(range(len(new_axes)), key=lambda i: new_axes[i])
        arr = np.array(self.table, dtype=object).reshape(self.shape)
        arr = np.transpose(arr, order)
        return Factor(
            self.p,
            [new_axes[i] for i in order],
            [self.S[i] for i in order],
            [self.C[i] for i in order],
            list(arr.reshape(-1)),
        )

    def axis_pos(self, axis: int) -> int:
        return self.axes.index(axis)

    def partial_fourier(self, axis: int, sign: int) -> "Factor":
        """Exact 1-dim transform along one axis, kernel psi^(sign * xy)."""
        return self.multi_fourier([(axis, sign)])

    def multi_fourier(self, signed_axes: Sequence[tuple[int, int]]) -> "Factor":
        """Exact transforms along several axes in one integer pass.

        The table is embedded into group-algebra rows once, each requested
        axis gets its Cooley-Tukey pass, and reduction plus the conversion
        back happen once at the end, so chained transforms avoid the
        per-axis lift round trips."""
        p = self.p
        ks = [(self.axis_pos(a), s) for a, s in signed_axes]
        Ns = [p ** (self.S[k] + self.C[k]) for k, _ in ks]
        min_level = max([1] + Ns)
        V, D, L = _ga_embed(self.table, p, min_level)
        if V.dtype != object:
            growth = 1
            for N in Ns:
                growth *= N
            peak = int(np.abs(V).max(initial=0))
            if peak * growth > 2 ** 61:
                V = V.astype(object)
        V = V.reshape(self.shape + (L,))
        newS, newC = list(self.S), list(self.C)
        D_out = D
        mult = 1
        for (k, sign), N in zip(ks, Ns):
            if N > 1:
                moved = np.moveaxis(V, k, 0)
                shift = (sign * (L // N)) % L
                V = np.moveaxis(_ct_dft(moved, p, shift, L), 0, k)
            C = self.C[k]
            if C >= 0:
                D_out *= p ** C
            else:
                mult *= p ** (-C)
            newS[k], newC[k] = self.C[k], self.S[k]
        if mult != 1:
            V = V * mult
        W = _ga_reduce(V.reshape(-1, L), p, L)
        values = _ga_to_cycs(W, D_out, L)
        return Factor(p, self.axes, newS, newC, values)


# ---------------------------------------------------------------------------
# BruhatFunction
# ---------------------------------------------------------------------------


class BruhatFunction:
    """Sum of factored terms; immutable in practice (ops return new objects)."""

    def __init__(self, ctx: LocalContext, dim: int, terms: Iterable[Sequence[Factor]],
                 *, _normalized: bool = False):
        self.ctx = ctx
        self.dim = dim
        clean_terms: list[list[Factor]] = []
        for term in terms:
            covered: list[int] = []
            fs = []
            for f in term:
                if f.p != ctx.p:
                    raise ValueError("factor prime mismatch")
                covered.extend(f.axes)
                fs.append(f)
            if sorted(covered) != list(range(dim)):
                raise ValueError("term factors must partition the axes")
            clean_terms.append(sorted(fs, key=lambda f: f.axes))
        self.terms = clean_terms
        if not _normalized:
            self._normalize_in_place()

    # -- constructors --------------------------------------------------------

    @classmethod
    def basic(cls, ctx: LocalContext, dim: int) -> "BruhatFunction":
        fs = [
            Factor(ctx.p, (i,), (0,), (0,), [CycNumber.one()]) for i in range(dim)
        ]
        return cls(ctx, dim, [fs], _normalized=True)

    @classmethod
    def zero(cls, ctx: LocalContext, dim: int) -> "BruhatFunction":
        return cls(ctx, dim, [], _normalized=True)

    @classmethod
    def from_dense(cls, ctx: LocalContext, dim: int, S, C, values) -> "BruhatFunction":
        """Single dense factor; S and C are ints (uniform) or per-axis lists."""
        if isinstance(S, int):
            S = [S] * dim
        if isinstance(C, int):
            C = [C] * dim
        values = [v if isinstance(v, CycNumber) else CycNumber.rational(v) for v in values]
        f = Factor(ctx.p, tuple(range(dim)), S, C, values)
        return cls(ctx, dim, [[f]])

    @classmethod
    def tensor(cls, ctx: LocalContext, factors_1d: Sequence[tuple]) -> "BruhatFunction":
        """Tensor product from per-axis (S, C, values) triples."""
        fs = []
        for i, (S, C, values) in enumerate(factors_1d):
            values = [
                v if isinstance(v, CycNumber) else CycNumber.rational(v) for v in values
            ]
            fs.append(Factor(ctx.p, (i,), (S,), (C,), values))
        return cls(ctx, len(factors_1d), [fs])

    # -- structure -----------------------------------------------------------

    def _normalize_in_place(self):
        new_terms = []
        for term in self.terms:
            fs = []
            dead = False
            for f in term:
                nf = f.normalized()
                if nf is None:
                    dead = True
                    break
                fs.append(nf)
            if not dead:
                new_terms.append(fs)
        self.terms = new_terms

    @property
    def p(self) -> int:
        return self.ctx.p

    def axis_S(self, axis: int) -> int:
        """Function-level support exponent along one axis (max over terms)."""
        out = 0
        seen = False
        for term in self.terms:
            for f in term:
                if axis in f.axes:
                    s = f.S[f.axis_pos(axis)]
                    out = s if not seen else max(out, s)
                    seen = True
        return out

    def axis_C(self, axis: int) -> int:
        out = 0
        seen = False
        for term in self.terms:
            for f in term:
                if axis in f.axes:
                    c = f.C[f.axis_pos(axis)]
                    out = c if not seen else max(out, c)
                    seen = True
        return out

    @property
    def support_exp(self) -> int:
        return max((self.axis_S(i) for i in range(self.dim)), default=0)

    @property
    def level(self) -> int:
        return max((self.axis_C(i) for i in range(self.dim)), default=0)

    def is_zero_table(self) -> bool:
        return not self.terms

    # -- evaluation / integration ---------------------------------------------

    def eval(self, xs: Sequence[PAdicPoint]) -> CycNumber:
        if len(xs) != self.dim:
            raise ValueError("wrong number of coordinates")
        total = CycNumber.zero()
        for term in self.terms:
            prod = CycNumber.one()
            for f in term:
                v = f.eval([xs[a] for a in f.axes])
                if v.is_zero():
                    prod = CycNumber.zero()
                    break
                prod = prod * v
            total = total + prod
        return total

    def eval_rational(self, xs: Sequence) -> CycNumber:
        return self.eval([PAdicPoint.from_rational(self.p, Fraction(x)) for x in xs])

    def integrate(self) -> CycNumber:
        rho = self.ctx.measure_normalization
        total = CycNumber.zero()
        for term in self.terms:
            prod = CycNumber.one()
            for f in term:
                part = f.integrate_table()
                if part.is_zero():
                    prod = CycNumber.zero()
                    break
                prod = prod * part
            total = total + prod
        if rho != 1:
            total = total * rho ** self.dim
        return total

    # -- linear structure -------------------------------------------------------

    def __add__(self, other: "BruhatFunction") -> "BruhatFunction":
        if not isinstance(other, BruhatFunction):
            return NotImplemented
        if other.ctx.p != self.ctx.p or other.dim != self.dim:
            raise ValueError("incompatible operands")
        return BruhatFunction(
            self.ctx, self.dim, self.terms + other.terms, _normalized=True
        )

    def scale(self, c) -> "BruhatFunction":
        c = c if isinstance(c, CycNumber) else CycNumber.rational(c)
        if c.is_zero():
            return BruhatFunction.zero(self.ctx, self.dim)
        terms = []
        for term in self.terms:
            fs = [f.copy() for f in term]
            fs[0] = Factor(
                fs[0].p, fs[0].axes, fs[0].S, fs[0].C, [v * c for v in fs[0].table]
            )
            terms.append(fs)
        return BruhatFunction(self.ctx, self.dim, terms, _normalized=True)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        if not isinstance(other, BruhatFunction):
            return NotImplemented
        return self + (-other)

    # -- dense form, equality, serialization -------------------------------------

    def densified(self, cell_cap: Optional[int] = None) -> "BruhatFunction":
        """Single dense factor over the function-level per-axis boxes."""
        S = [self.axis_S(i) for i in range(self.dim)]
        C = [max(self.axis_C(i), -S[i]) for i in range(self.dim)]
        shape = tuple(self.p ** (S[i] + C[i]) for i in range(self.dim))
        count = 1
        for d in shape:
            count *= d
        _check_cells(count, cell_cap)
        grid = np.array([CycNumber.zero()] * count, dtype=object).reshape(shape)
        for term in self.terms:
            piece = None
            axes_order: list[int] = []
            for f in term:
                block = self._embed_factor(f, S, C)
                piece = block if piece is None else np.multiply.outer(piece, block)
                axes_order.extend(f.axes)
            inv = [axes_order.index(i) for i in range(self.dim)]
            piece = np.transpose(piece, inv)
            grid = grid + piece
        return BruhatFunction(
            self.ctx,
            self.dim,
            [[Factor(self.p, tuple(range(self.dim)), S, C, list(grid.reshape(-1)))]],
        )

    def _embed_factor(self, f: Factor, S: Sequence[int], C: Sequence[int]) -> np.ndarray:
        """Factor table re-indexed into the (S, C) boxes of its axes.

        Requires the target box to refine the factor's own box (larger S,
        larger C per axis), which both call sites guarantee.
        """
        p = self.p
        srcs = []
        valids = []
        for k, a in enumerate(f.axes):
            box = p ** (S[a] + C[a])
            rs = np.arange(box)
            dS = S[a] - f.S[k]
            n_old = p ** (f.S[k] + f.C[k])
            if dS > 0:
                step = p ** dS
                valid = rs % step == 0
                src = (rs // step) % n_old
            else:
                valid = np.ones(box, dtype=bool)
                src = (rs * p ** (-dS)) % n_old
            srcs.append(src)
            valids.append(valid)
        arr = np.array(f.table, dtype=object).reshape(f.shape)
        out = arr[np.ix_(*srcs)].copy()
        mask = valids[0]
        for v in valids[1:]:
            mask = np.multiply.outer(mask, v)
        out[~mask] = CycNumber.zero()
        return out

    def equals(self, other: "BruhatFunction", cell_cap: Optional[int] = None) -> bool:
        diff = self - other
        if not diff.terms:
            return True
        return diff._is_zero_table_ga(cell_cap)

    def _is_zero_table_ga(self, cell_cap: Optional[int]) -> bool:
        """Exact zero test: accumulate all terms over the joint cell box as
        integer group-algebra rows and reduce once. Equivalent to scanning
        densified() but without per-cell cyclotomic arithmetic."""
        p = self.p
        d = self.dim
        S = [self.axis_S(i) for i in range(d)]
        C = [max(self.axis_C(i), -S[i]) for i in range(d)]
        mods = [p ** (S[i] + C[i]) for i in range(d)]
        count = 1
        for m in mods:
            count *= m
        _check_cells(count, cell_cap)
        term_meta = []
        all_vals: list[CycNumber] = []
        for term in self.terms:
            piece = None
            axes_order: list[int] = []
            for f in term:
                block = np.array(f.table, dtype=object).reshape(f.shape)
                piece = block if piece is None else np.multiply.outer(piece, block)
                axes_order.extend(f.axes)
            piece = np.transpose(piece, [axes_order.index(i) for i in range(d)])
            tS = [0] * d
            tC = [0] * d
            for f in term:
                for k, a in enumerate(f.axes):
                    tS[a], tC[a] = f.S[k], f.C[k]
            vals = list(piece.reshape(-1))
            term_meta.append((tS, tC, len(all_vals), len(vals)))
            all_vals.extend(vals)
        V, D, L = _ga_embed(all_vals, p, 1)
        if V.dtype != object and len(self.terms) > 1:
            peak = int(np.abs(V).max(initial=0))
            if peak * len(self.terms) > 2 ** 62:
                V = V.astype(object)
        acc = np.zeros((count, L), dtype=V.dtype)
        rs = []
        rem = np.arange(count, dtype=np.int64)
        for i in range(d - 1, -1, -1):
            rs.append(rem % mods[i])
            rem = rem // mods[i]
        rs = rs[::-1]
        for tS, tC, off, n in term_meta:
            tmods = [p ** (tS[i] + tC[i]) for i in range(d)]
            flat_src = None
            valid = None
            for i in range(d):
                dS = S[i] - tS[i]
                if dS > 0:
                    step = p ** dS
                    ok = rs[i] % step == 0
                    valid = ok if valid is None else valid & ok
                    src_i = (rs[i] // step) % tmods[i]
                else:
                    src_i = rs[i] % tmods[i]
                flat_src = src_i if flat_src is None else flat_src * tmods[i] + src_i
            rows = V[off:off + n]
            if valid is None:
                acc += rows[flat_src]
            else:
                acc[valid] += rows[flat_src[valid]]
        W = _ga_reduce(acc, p, L)
        return not W.any()

    def __eq__(self, other):
        if not isinstance(other, BruhatFunction):
            return NotImplemented
        return self.equals(other)

    __hash__ = None

    def to_obj(self, cell_cap: Optional[int] = None) -> dict:
        dense = self.densified(cell_cap)
        if dense.terms:
            f = dense.terms[0][0]
            S, C = max(f.S), max(f.C)
            uniform = dense
            if any(s != S for s in f.S) or any(c != C for c in f.C):
                uniform = BruhatFunction(
                    self.ctx,
                    self.dim,
                    [[self._pad_uniform(f, S, C, cell_cap)]],
                    _normalized=True,
                )
                f = uniform.terms[0][0]
            values = [v.to_obj() for v in f.table]
        else:
            S = C = 0
            values = [CycNumber.zero().to_obj()]
        return {
            "p": self.p,
            "d": self.dim,
            "S": S,
            "C": C,
            "values": values,
        }

    def _pad_uniform(self, f: Factor, S: int, C: int, cell_cap: Optional[int]) -> Factor:
        shape = tuple([self.p ** (S + C)] * self.dim)
        count = (self.p ** (S + C)) ** self.dim
        _check_cells(count, cell_cap)
        block = self._embed_factor(f, [S] * self.dim, [C] * self.dim)
        return Factor(self.p, tuple(range(self.dim)), [S] * self.dim, [C] * self.dim,
                      list(block.reshape(-1)))

    @classmethod
    def from_obj(cls, ctx: LocalContext, obj: dict) -> "BruhatFunction":
        d = int(obj["d"])
        S, C = int(obj["S"]), int(obj["C"])
        values = [CycNumber.from_obj(v) for v in obj["values"]]
        expected = (ctx.p ** (S + C)) ** d
        if len(values) != expected:
            raise ValueError("value table has the wrong length")
        return cls.from_dense(ctx, d, S, C, values)

    # -- affine pullback -----------------------------------------------------------

    def linear_pullback(self, A, b=None, cell_cap: Optional[int] = None) -> "BruhatFunction":
        """x -> f(Ax + b) for an invertible rational matrix A."""
        d = self.dim
        A = [[Fraction(A[i][j]) for j in range(d)] for i in range(d)]
        b = [Fraction(0)] * d if b is None else [Fraction(x) for x in b]
        Ainv = _invert(A)
        new_terms = []
        for term in self.terms:
            new_terms.append(self._pullback_term(term, A, Ainv, b, cell_cap))
        return BruhatFunction(self.ctx, d, new_terms)

    def translate(self, shifts, cell_cap: Optional[int] = None) -> "BruhatFunction":
        """x -> f(x + s)."""
        d = self.dim
        eye = [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]
        return self.linear_pullback(eye, shifts, cell_cap)

    def _pullback_term(self, term, A, Ainv, b, cell_cap) -> list[Factor]:
        p = self.p
        d = self.dim
        # group factors by coupled input columns
        groups: list[dict] = []
        for f in term:
            cols = set()
            for i in f.axes:
                for j in range(d):
                    if A[i][j]:
                        cols.add(j)
            merged = {"factors": [f], "cols": cols}
            keep = []
            for g in groups:
                if g["cols"] & merged["cols"]:
                    merged["factors"].extend(g["factors"])
                    merged["cols"] |= g["cols"]
                else:
                    keep.append(g)
            keep.append(merged)
            groups = keep
        out = []
        for g in groups:
            out.append(self._pullback_group(g["factors"], sorted(g["cols"]), A, Ainv, b, cell_cap))
        return out

    def _pullback_group(self, factors, cols, A, Ainv, b, cell_cap) -> Factor:
        p = self.p
        rows = sorted(a for f in factors for a in f.axes)
        if len(rows) != len(cols):
            raise SingularMatrix("affine map does not preserve the axis split")
        fS = {}
        fC = {}
        for f in factors:
            for k, a in enumerate(f.axes):
                fS[a] = f.S[k]
                fC[a] = f.C[k]
        # new support exponent per input axis from x = A^-1 (y - b)
        Sn, Cn = {}, {}
        for j in cols:
            bound = None
            for i in rows:
                if Ainv[j][i] == 0:
                    continue
                m_i = min(-fS[i], val_p(b[i], p)) if b[i] else -fS[i]
                cand = val_p(Ainv[j][i], p) + m_i
                bound = cand if bound is None else min(bound, cand)
            if bound is None:
                raise SingularMatrix("input axis unused by an invertible map")
            Sn[j] = -bound
        for j in cols:
            lev = None
            for i in rows:
                if A[i][j] == 0:
                    continue
                cand = fC[i] - val_p(A[i][j], p)
                lev = cand if lev is None else max(lev, cand)
            Cn[j] = max(lev, -Sn[j])
        shape = tuple(p ** (Sn[j] + Cn[j]) for j in cols)
        count = 1
        for s in shape:
            count *= s
        _check_cells(count, cell_cap)
        table = []
        for idx in np.ndindex(*shape):
            x = {j: Fraction(r) / Fraction(p) ** Sn[j] for j, r in zip(cols, idx)}
            prod = CycNumber.one()
            for f in factors:
                ys = []
                for i in f.axes:
                    y = b[i]
                    for j in cols:
                        if A[i][j]:
                            y += A[i][j] * x[j]
                    ys.append(PAdicPoint.from_rational(p, y))
                v = f.eval(ys)
                if v.is_zero():
                    prod = CycNumber.zero()
                    break
                prod = prod * v
            table.append(prod)
        return Factor(p, cols, [Sn[j] for j in cols], [Cn[j] for j in cols], table)

    # -- Fourier transforms -----------------------------------------------------

    def _require_selfdual(self):
        if not self.ctx.is_unramified:
            raise Unsupported("transforms need the unramified character (c = 0)")
        if self.ctx.measure_normalization != 1:
            raise Unsupported("transforms need the self-dual measure vol(Z_p) = 1")

    def partial_fourier(self, axis: int, sign: int = -1) -> "BruhatFunction":
        self._require_selfdual()
        if not 0 <= axis < self.dim:
            raise ValueError("axis out of range")
        terms = []
        for term in self.terms:
            fs = []
            for f in term:
                if axis in f.axes:
                    fs.append(f.partial_fourier(axis, sign))
                else:
                    fs.append(f)
            terms.append(fs)
        return BruhatFunction(self.ctx, self.dim, terms)

    def fourier(self, sign: int = -1) -> "BruhatFunction":
        if self.dim != 1:
            raise ValueError("fourier is the 1-dim transform; use partial_fourier")
        return self.partial_fourier(0, sign)

    def fourier_at(self, x: PAdicPoint, sign: int = -1) -> CycNumber:
        """Point value of fourier(sign) without materializing the table."""
        self._require_selfdual()
        if self.dim != 1:
            raise ValueError("fourier_at needs a 1-dim function")
        p = self.p
        total = CycNumber.zero()
        for term in self.terms:
            f = term[0]
            S, C = f.S[0], f.C[0]
            if not x.is_zero() and x.valuation < -C:
                continue
            A = S - x.valuation if not x.is_zero() else 0
            if x.is_zero() or A <= 0:
                part = f.integrate_table()
            else:
                pA = p ** A
                u = x.residue(A)
                acc = CycNumber.zero()
                # bucket table cells by phase exponent
                buckets: dict[int, list[int]] = {}
                for r, v in enumerate(f.table):
                    if v.is_zero():
                        continue
                    j = (sign * u * r) % pA
                    buckets.setdefault(j, []).append(r)
                for j, rs in buckets.items():
                    s = CycNumber.zero()
                    for r in rs:
                        s = s + f.table[r]
                    acc = acc + s * CycNumber.root_of_unity(Fraction(j, pA))
                part = acc * (Fraction(1) / Fraction(p) ** C)
            total = total + part
        return total

    def mat_fourier(self, cell_cap: Optional[int] = None) -> "BruhatFunction":
        """4-dim transform with kernel psi(tr(yx)): partial transforms with
        kernel psi(+uw) on each axis, then the transpose-pairing axis swap."""
        if self.dim != 4:
            raise ValueError("mat_fourier acts on 4-dim tables")
        self._require_selfdual()
        terms = []
        for term in self.terms:
            terms.append([f.multi_fourier([(a, +1) for a in f.axes]) for f in term])
        out = BruhatFunction(self.ctx, self.dim, terms)
        return out.permute_axes((0, 2, 1, 3))

    def permute_axes(self, perm: Sequence[int]) -> "BruhatFunction":
        """g(x_0,...,x_{d-1}) = f(x_perm[0], ..., x_perm[d-1])."""
        # f's slot i reads coordinate perm[i], so old axis i moves to perm[i]
        mapping = {i: perm[i] for i in range(self.dim)}
        terms = []
        for term in self.terms:
            terms.append([f.relabel(mapping) for f in term])
        return BruhatFunction(self.ctx, self.dim, terms, _normalized=True)


def _invert(A):
    """Exact inverse of a rational matrix; SingularMatrix when not invertible."""
    d = len(A)
    M = [row[:] + [Fraction(int(i == j)) for j in range(d)] for i, row in enumerate(A)]
    for col in range(d):
        piv = None
        for r in range(col, d):
            if M[r][col] != 0:
                piv = r
                break
        if piv is None:
            raise SingularMatrix("matrix is singular")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(d):
            if r != col and M[r][col] != 0:
                factor = M[r][col]
                M[r] = [x - factor * y for x, y in zip(M[r], M[col])]
    return [row[d:] for row in M]


def random_bruhat(ctx: LocalContext, dim: int, rng, max_S: int = 2, max_C: int = 2,
                  terms: int = 1, phase_level: int = 2) -> BruhatFunction:
    """Random tensor-product test function with small exact values."""
    p = ctx.p
    all_terms = []
    for _ in range(terms):
        fs = []
        for i in range(dim):
            S = rng.randint(0, max_S)
            C = rng.randint(0, max_C)
            n = p ** (S + C)
            vals = []
            for _ in range(n):
                kind = rng.random()
                if kind < 0.35:
                    vals.append(CycNumber.zero())
                elif kind < 0.8:
                    vals.append(CycNumber.rational(Fraction(rng.randint(-3, 3))))
                else:
                    k = rng.randint(0, phase_level)
                    pk = p ** k
                    root = CycNumber.root_of_unity(Fraction(rng.randrange(pk), pk))
                    vals.append(root * rng.randint(1, 2))
            if all(v.is_zero() for v in vals):
                vals[rng.randrange(n)] = CycNumber.one()
            fs.append(Factor(p, (i,), (S,), (C,), vals))
        all_terms.append(fs)
    return BruhatFunction(ctx, dim, all_terms)
