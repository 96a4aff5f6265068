"""Orbital integrals, intermediate functions, and Hankel transforms.

All operations reduce to two exact sweep engines over 4-entry matrix
arguments of a BruhatFunction:

  pair_sweep  sums G(entries(m, n)) psi(pm*m + pn*n + tw*m*n) over
              (m, n) in Q_p^2, where each entry is c*m, c*n, a constant,
              or B*m*n + D;
  line_sweep  sums G(A_i z + D_i) psi(c*z) over z in Q_p.

Both stratify by valuation shells. Within a shell the integrand is
constant on explicit unit-residue cells, so the sum is a finite exact
character sum, vectorized over integer grids and accumulated per distinct
(value combination, phase exponent) bucket. Outside the last shell the
integrand is constant on the remaining ball, which the pair engine
delegates to the line engine (one variable frozen at 0) and the line
engine evaluates at 0 directly. Support bounds make the shell ranges
finite: every variable occurs in at least one pure entry, and a
cross-term entry B*m*n + D kills all shells except those with
min(v(Bmn), v(D)) inside the support or v(Bmn) = v(D) (cancellation
diagonal).

Half-integer powers of p coming from measure normalizations stay exact
via HalfPower; everything else is CycNumber arithmetic.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .bruhat import BruhatFunction
from .cyclotomic import CycNumber, HalfPower
from .errors import BudgetExceeded, MismatchDetected
from .local import PAdicPoint, val_p

STRATUM_CAP = 20_000_000

Rational = Union[int, Fraction]


def _as_fraction(x) -> Fraction:
    if isinstance(x, PAdicPoint):
        return x.as_fraction()
    return Fraction(x)


class TorusPoint:
    """Point (t1, t2) of the diagonal torus; both coordinates nonzero."""

    __slots__ = ("p", "t1", "t2")

    def __init__(self, p: int, t1, t2):
        t1 = _as_fraction(t1)
        t2 = _as_fraction(t2)
        if t1 == 0 or t2 == 0:
            raise ValueError("torus points have nonzero coordinates")
        self.p = p
        self.t1 = t1
        self.t2 = t2

    @property
    def v1(self) -> int:
        return val_p(self.t1, self.p)

    @property
    def v2(self) -> int:
        return val_p(self.t2, self.p)

    def dual(self) -> "TorusPoint":
        """The point (t2^{-1}, t1^{-1}) used by the dual-side normalization."""
        return TorusPoint(self.p, 1 / self.t2, 1 / self.t1)

    def __repr__(self):
        return f"TorusPoint(p={self.p}, t1={self.t1}, t2={self.t2})"

    def __eq__(self, other):
        if not isinstance(other, TorusPoint):
            return NotImplemented
        return (self.p, self.t1, self.t2) == (other.p, other.t1, other.t2)

    __hash__ = None


def _coords(p: int, t) -> tuple[Fraction, Fraction]:
    if isinstance(t, TorusPoint):
        return t.t1, t.t2
    t1, t2 = t
    return _as_fraction(t1), _as_fraction(t2)


# ---------------------------------------------------------------------------
# exact index arithmetic
# ---------------------------------------------------------------------------


def _units(p: int, k: int) -> np.ndarray:
    r = np.arange(p ** k, dtype=np.int64)
    return r[r % p != 0]


def _unit_mod(x: Fraction, p: int, mod: int) -> int:
    if mod == 1:
        return 0
    v = val_p(x, p)
    u = x / Fraction(p) ** v
    return u.numerator * pow(u.denominator, -1, mod) % mod


def _fixed_axis_index(p: int, S: int, C: int, d: Fraction) -> Optional[int]:
    """Cell index of the constant entry d, or None when out of support."""
    if d == 0:
        return 0
    v = val_p(d, p)
    if v < -S:
        return None
    if v >= C:
        return 0
    u = _unit_mod(d, p, p ** (C - v))
    return (u * p ** (v + S)) % (p ** (S + C))


def _affine_index(p: int, S: int, C: int, A: Fraction, D: Fraction, w: int,
                  U: np.ndarray):
    """Cell indices and validity masks of entries A*(u p^w) + D over units u."""
    box = p ** (S + C)
    vA = val_p(A, p)
    g = vA + w
    vD = val_p(D, p) if D != 0 else None
    base = g if vD is None else min(g, vD)
    prec = C - base
    shape = np.shape(U)
    if prec <= 0:
        # the whole entry lands in the level-C lattice: cell 0
        return np.zeros(shape, dtype=np.int64), np.ones(shape, dtype=bool)
    mod = p ** prec
    uA = _unit_mod(A, p, mod)
    X = (uA * (U % mod)) % mod
    if g > base:
        X = (X * pow(p, g - base, mod)) % mod
    if vD is not None:
        uD = _unit_mod(D, p, mod)
        X = (X + uD * pow(p, vD - base, mod)) % mod
    t = np.zeros(shape, dtype=np.int64)
    tmp = X.copy()
    act = tmp != 0
    while True:
        div = act & (tmp % p == 0)
        if not div.any():
            break
        tmp[div] //= p
        t[div] += 1
        act = div
    is_zero = X == 0
    v_e = base + t
    ok = is_zero | (v_e >= -S)
    el = np.clip(v_e + S, 0, S + C)
    idx = (tmp * np.power(p, el)) % box
    idx[is_zero] = 0
    return idx.astype(np.int64), ok


def _phase_parts(p: int, parts):
    """Exponent modulus p^E and the exponent array for psi(sum c (u p^w))."""
    E = 0
    for c, w, _ in parts:
        E = max(E, -(val_p(c, p) + w))
    if E <= 0:
        return 1, 0
    pE = p ** E
    j = 0
    for c, w, U in parts:
        vc = val_p(c, p)
        uc = _unit_mod(c, p, pE)
        j = j + ((uc * (U % pE)) % pE) * pow(p, E + vc + w, pE)
    return pE, np.asarray(j % pE, dtype=np.int64)


def _factor_lut(f):
    vals = [CycNumber.zero()]
    seen: dict = {}
    lut = np.zeros(len(f.table), dtype=np.int64)
    for r, v in enumerate(f.table):
        if v.is_zero():
            continue
        key = (v.conductor, v.coeffs)
        vid = seen.get(key)
        if vid is None:
            vid = len(vals)
            vals.append(v)
            seen[key] = vid
        lut[r] = vid
    return lut, vals


class _TermView:
    """Per-term axis metadata plus value-id lookup tables."""

    def __init__(self, term):
        self.factors = list(term)
        self.SC: dict[int, tuple[int, int]] = {}
        for f in self.factors:
            for k, a in enumerate(f.axes):
                self.SC[a] = (f.S[k], f.C[k])
        self.luts = [_factor_lut(f) for f in self.factors]

    def flat_indices(self, idx_by_axis):
        """Per-factor flat table indices from per-axis cell indices."""
        flats = []
        for f in self.factors:
            flat = 0
            for k, a in enumerate(f.axes):
                flat = flat * f.shape[k] + idx_by_axis[a]
            flats.append(flat)
        return flats


def _accumulate(p: int, view: _TermView, idx_by_axis, masks, pE, j,
                scale: Fraction) -> CycNumber:
    ok = True
    for m in masks:
        ok = ok & m
    flats = view.flat_indices(idx_by_axis)
    sizes = []
    vids = []
    for (lut, vals), flat in zip(view.luts, flats):
        vid = lut[np.asarray(flat, dtype=np.int64)]
        ok = ok & (vid != 0)
        vids.append(vid)
        sizes.append(len(vals))
    bound = pE
    for s in sizes:
        bound *= s
    key = 0
    for vid, s in zip(vids, sizes):
        if bound > (1 << 62):
            vid = vid.astype(object)
        key = key * s + vid
    if pE > 1:
        key = key * pE + j
    keyb, okb = np.broadcast_arrays(np.asarray(key), np.asarray(ok))
    sel = keyb[okb]
    if sel.size == 0:
        return CycNumber.zero()
    uniq, counts = np.unique(sel, return_counts=True)
    combos: dict[int, dict[int, int]] = {}
    for k, cnt in zip(uniq.tolist(), counts.tolist()):
        if pE > 1:
            combo, jj = divmod(k, pE)
        else:
            combo, jj = k, 0
        combos.setdefault(combo, {})[jj] = int(cnt)
    total = CycNumber.zero()
    for combo, jcounts in combos.items():
        prod = CycNumber.one()
        rem = combo
        for (lut, vals), s in zip(reversed(view.luts), reversed(sizes)):
            rem, vid = divmod(rem, s)
            prod = prod * vals[vid]
        piece = CycNumber.from_monomial_counts(max(pE, 1), jcounts, scale)
        total = total + piece * prod
    return total


# ---------------------------------------------------------------------------
# line engine
# ---------------------------------------------------------------------------


def _line_term(ctx, view: _TermView, affine, phase: Fraction,
               floor: Optional[int] = None) -> CycNumber:
    p = ctx.p
    dim = len(affine)
    live = [(i, A, D) for i, (A, D) in enumerate(affine) if A != 0]
    if not live:
        raise ValueError("line sweep needs a z-dependent entry")
    fixed_idx: dict[int, int] = {}
    for i, (A, D) in enumerate(affine):
        if A != 0:
            continue
        S, C = view.SC[i]
        r = _fixed_axis_index(p, S, C, D)
        if r is None:
            return CycNumber.zero()
        fixed_idx[i] = r

    pins = set()
    los = []
    for i, A, D in live:
        S, _ = view.SC[i]
        vA = val_p(A, p)
        if D != 0 and val_p(D, p) < -S:
            pins.add(val_p(D, p) - vA)
        else:
            los.append(-S - vA)
    caps = [view.SC[i][1] - val_p(A, p) for i, A, _ in live]
    if phase:
        caps.append(-val_p(phase, p))

    if pins:
        if len(pins) > 1:
            return CycNumber.zero()
        w_star = pins.pop()
        if los and w_star < max(los):
            return CycNumber.zero()
        if floor is not None and w_star < floor:
            return CycNumber.zero()
        shells = [w_star]
        include_tail = False
        w_cap = w_star + 1
    else:
        w_lo = max(los)
        if floor is not None:
            w_lo = max(w_lo, floor)
        w_cap = max([w_lo] + caps)
        shells = range(w_lo, w_cap)
        include_tail = True

    total = CycNumber.zero()
    for w in shells:
        lam = max([w + 1] + caps)
        U = _units(p, lam - w)
        idx_by_axis: dict = dict(fixed_idx)
        masks = []
        for i, A, D in live:
            S, C = view.SC[i]
            idx, ok = _affine_index(p, S, C, A, D, w, U)
            idx_by_axis[i] = idx
            masks.append(ok)
        parts = [(phase, w, U)] if phase else []
        pE, j = _phase_parts(p, parts)
        total = total + _accumulate(
            p, view, idx_by_axis, masks, pE, j, Fraction(p) ** (-lam)
        )
    if include_tail:
        prod = CycNumber.one()
        dead = False
        idx_by_axis = {}
        for i, (A, D) in enumerate(affine):
            S, C = view.SC[i]
            r = _fixed_axis_index(p, S, C, D)
            if r is None:
                dead = True
                break
            idx_by_axis[i] = r
        if not dead:
            for f, flat in zip(view.factors, view.flat_indices(idx_by_axis)):
                v = f.table[flat]
                if v.is_zero():
                    dead = True
                    break
                prod = prod * v
        if not dead:
            total = total + prod * (Fraction(p) ** (-w_cap))
    return total


def line_sweep(G: BruhatFunction, affine: Sequence[tuple], phase) -> CycNumber:
    """Exact integral of G(A_0 z + D_0, ...) psi(phase * z) over z in Q_p."""
    G._require_selfdual()
    affine = [(Fraction(A), Fraction(D)) for A, D in affine]
    phase = Fraction(phase)
    total = CycNumber.zero()
    for term in G.terms:
        total = total + _line_term(G.ctx, _TermView(term), affine, phase)
    return total


# ---------------------------------------------------------------------------
# pair engine
# ---------------------------------------------------------------------------


def _normalize_assigns(assigns):
    out = []
    for a in assigns:
        if a[0] in ("m", "n") and Fraction(a[1]) == 0:
            out.append(("fixed", Fraction(0)))
        elif a[0] == "cross" and Fraction(a[1]) == 0:
            out.append(("fixed", Fraction(a[2])))
        elif a[0] == "cross":
            out.append(("cross", Fraction(a[1]), Fraction(a[2])))
        else:
            out.append((a[0], Fraction(a[1])))
    return out


def _pair_term(ctx, view: _TermView, assigns, ph_m: Fraction, ph_n: Fraction,
               tw: Fraction) -> CycNumber:
    p = ctx.p
    m_axes = [(i, a[1]) for i, a in enumerate(assigns) if a[0] == "m"]
    n_axes = [(i, a[1]) for i, a in enumerate(assigns) if a[0] == "n"]
    cross = [(i, a[1], a[2]) for i, a in enumerate(assigns) if a[0] == "cross"]
    fixed = [(i, a[1]) for i, a in enumerate(assigns) if a[0] == "fixed"]
    if not m_axes or not n_axes:
        raise ValueError("pair sweep needs a pure entry in each variable")

    fixed_idx: dict[int, int] = {}
    for i, d in fixed:
        S, C = view.SC[i]
        r = _fixed_axis_index(p, S, C, d)
        if r is None:
            return CycNumber.zero()
        fixed_idx[i] = r

    a_min = max(-view.SC[i][0] - val_p(c, p) for i, c in m_axes)
    b_min = max(-view.SC[i][0] - val_p(c, p) for i, c in n_axes)

    caps_m = [view.SC[i][1] - val_p(c, p) for i, c in m_axes]
    caps_n = [view.SC[i][1] - val_p(c, p) for i, c in n_axes]
    if ph_m:
        caps_m.append(-val_p(ph_m, p))
    if ph_n:
        caps_n.append(-val_p(ph_n, p))
    capsA = list(caps_m)
    for i, B, _ in cross:
        capsA.append(view.SC[i][1] - val_p(B, p) - b_min)
    if tw:
        capsA.append(-val_p(tw, p) - b_min)
    a_cap = max([a_min] + capsA)

    def n_cap_at(a: int) -> int:
        out = list(caps_n)
        for i, B, _ in cross:
            out.append(view.SC[i][1] - val_p(B, p) - a)
        if tw:
            out.append(-val_p(tw, p) - a)
        return max([b_min] + out)

    def stratum_live(a: int, b: int) -> bool:
        for i, B, D in cross:
            S, _ = view.SC[i]
            g = val_p(B, p) + a + b
            if D == 0:
                if g < -S:
                    return False
            else:
                vD = val_p(D, p)
                if min(g, vD) < -S and g != vD:
                    return False
        return True

    def tail_affine(kind: str):
        # entries as functions of the remaining variable (other one is 0)
        out = []
        for i, a in enumerate(assigns):
            if a[0] == "fixed":
                out.append((Fraction(0), a[1]))
            elif a[0] == "cross":
                out.append((Fraction(0), a[2]))
            elif a[0] == kind:
                out.append((a[1], Fraction(0)))
            else:
                out.append((Fraction(0), Fraction(0)))
        return out

    total = CycNumber.zero()
    m_line = tail_affine("m")
    for a in range(a_min, a_cap):
        b_cap = n_cap_at(a)
        for b in range(b_min, b_cap):
            if not stratum_live(a, b):
                continue
            capsA_b = list(caps_m)
            capsB_a = list(caps_n)
            for i, B, _ in cross:
                vB = val_p(B, p)
                capsA_b.append(view.SC[i][1] - vB - b)
                capsB_a.append(view.SC[i][1] - vB - a)
            if tw:
                vt = val_p(tw, p)
                capsA_b.append(-vt - b)
                capsB_a.append(-vt - a)
            lam1 = max([a + 1] + capsA_b)
            lam2 = max([b + 1] + capsB_a)
            k1, k2 = lam1 - a, lam2 - b
            count = (p - 1) ** 2 * p ** (k1 + k2 - 2)
            if count > STRATUM_CAP:
                raise BudgetExceeded(
                    f"stratum ({a},{b}) needs {count} cells > {STRATUM_CAP}"
                )
            U1 = _units(p, k1)
            U2 = _units(p, k2)
            U1c = U1[:, None]
            U2c = U2[None, :]
            prodU = U1c * U2c
            idx_by_axis: dict = dict(fixed_idx)
            masks = []
            for i, c in m_axes:
                S, C = view.SC[i]
                idx, ok = _affine_index(p, S, C, c, Fraction(0), a, U1)
                idx_by_axis[i] = idx[:, None]
                masks.append(ok[:, None])
            for i, c in n_axes:
                S, C = view.SC[i]
                idx, ok = _affine_index(p, S, C, c, Fraction(0), b, U2)
                idx_by_axis[i] = idx[None, :]
                masks.append(ok[None, :])
            for i, B, D in cross:
                S, C = view.SC[i]
                idx, ok = _affine_index(p, S, C, B, D, a + b, prodU)
                idx_by_axis[i] = idx
                masks.append(ok)
            parts = []
            if ph_m:
                parts.append((ph_m, a, U1c))
            if ph_n:
                parts.append((ph_n, b, U2c))
            if tw:
                parts.append((tw, a + b, prodU))
            pE, j = _phase_parts(p, parts)
            total = total + _accumulate(
                p, view, idx_by_axis, masks, pE, j,
                Fraction(p) ** (-(lam1 + lam2)),
            )
        # n in the deep ball p^b_cap Z_p: frozen at 0, m still on shell a
        shell_val = _line_term(ctx, view, m_line, ph_m, floor=a) - _line_term(
            ctx, view, m_line, ph_m, floor=a + 1
        )
        if not shell_val.is_zero():
            total = total + shell_val * (Fraction(p) ** (-b_cap))
    # m in the deep ball p^a_cap Z_p: frozen at 0, full n line
    tail = _line_term(ctx, view, tail_affine("n"), ph_n)
    if not tail.is_zero():
        total = total + tail * (Fraction(p) ** (-a_cap))
    return total


def pair_sweep(G: BruhatFunction, assigns: Sequence[tuple], phase_m, phase_n,
               twist=0) -> CycNumber:
    """Exact two-variable sweep; see the module docstring for the grammar."""
    G._require_selfdual()
    assigns = _normalize_assigns(assigns)
    ph_m, ph_n, tw = Fraction(phase_m), Fraction(phase_n), Fraction(twist)
    total = CycNumber.zero()
    for term in G.terms:
        total = total + _pair_term(G.ctx, _TermView(term), assigns, ph_m, ph_n, tw)
    return total


# ---------------------------------------------------------------------------
# orbital family
# ---------------------------------------------------------------------------


def _abs_p(x: Fraction, p: int) -> Fraction:
    return Fraction(p) ** (-val_p(x, p))


def orbital(Phi: BruhatFunction, t, character_sign: int = 1) -> CycNumber:
    """Weighted double unipotent integral of Phi at the torus point t.

    The integrand is Phi([[t1 n1, t1 n1 n2 + t2], [t1, t1 n2]]) against
    psi(n1 + n2)^(-character_sign). t may be a TorusPoint or a pair of
    rationals; t2 = 0 (the degenerate boundary) is allowed in pair form.
    """
    if character_sign not in (1, -1):
        raise ValueError("character_sign must be +1 or -1")
    t1, t2 = _coords(Phi.p, t)
    if t1 == 0:
        raise ValueError("orbital integrals need t1 != 0")
    s = Fraction(-character_sign)
    assigns = [("m", t1), ("cross", t1, t2), ("fixed", t1), ("n", t1)]
    return pair_sweep(Phi, assigns, s, s)


def orbital_vanishes(Phi: BruhatFunction, t) -> bool:
    """Cheap support filter: True means the orbital integral is surely 0."""
    t1, t2 = _coords(Phi.p, t)
    p = Phi.p
    if t1 == 0:
        return True
    S = [Phi.axis_S(i) for i in range(4)]
    v1 = val_p(t1, p)
    if v1 < -S[2]:
        return True
    if t2 != 0 and val_p(t2, p) < min(-S[1], -(S[0] + S[3] + v1)):
        return True
    return False


def push_std_at(Phi: BruhatFunction, t) -> HalfPower:
    """Normalized standard pushforward value f / (dt)^{1/2} at t."""
    t1, t2 = _coords(Phi.p, t)
    p = Phi.p
    m = -(3 * val_p(t1, p) + val_p(t2, p))
    return HalfPower(p, m, orbital(Phi, t, 1))


def push_dual_at(Phi: BruhatFunction, t) -> HalfPower:
    """Normalized dual-side pushforward value at t (data already on the
    transformed side): |det t|^{-1} delta^{1/2}(t) O^{psi^{-1}}_{w t^{-1} w}."""
    t1, t2 = _coords(Phi.p, t)
    p = Phi.p
    m = val_p(t1, p) + 3 * val_p(t2, p)
    return HalfPower(p, m, orbital(Phi, (1 / t2, 1 / t1), -1))


# -- intermediate (standard side) --------------------------------------------


def intermediate(Phi: BruhatFunction, t1, t2) -> CycNumber:
    """phi-tilde(t1, t2): slot-2 transform of the orbital in its second
    torus coordinate, evaluated at -1/t2, with the |t1| psi(-t2/t1)
    normalization. t1 = 0 is allowed (matrix-form route); t2 must be nonzero.
    """
    t1, t2 = _as_fraction(t1), _as_fraction(t2)
    if t2 == 0:
        raise ValueError("intermediate needs t2 != 0")
    if t1 == 0:
        return intermediate_zform(Phi, t1, t2)
    return intermediate_fubini(Phi, t1, t2)


def intermediate_fubini(Phi: BruhatFunction, t1, t2) -> CycNumber:
    """Primary route: the slot variable is integrated first, leaving one
    partial transform of Phi and a twisted two-variable sweep."""
    t1, t2 = _as_fraction(t1), _as_fraction(t2)
    if t1 == 0 or t2 == 0:
        raise ValueError("this route needs t1, t2 != 0")
    p = Phi.p
    G = Phi.partial_fourier(1, -1)
    assigns = [("m", t1), ("fixed", -1 / t2), ("fixed", t1), ("n", t1)]
    body = pair_sweep(G, assigns, Fraction(-1), Fraction(-1), -t1 / t2)
    return body * Phi.ctx.psi(-t2 / t1) * _abs_p(t1, p)


def intermediate_zform(Phi: BruhatFunction, t1, t2) -> CycNumber:
    """Closed 1-dim form: |t2| integral of the doubly partially transformed
    function along [[z, -1/t2], [t1, t1 t2 z - t2]] against psi(-t2 z).
    Valid for all t1 including 0."""
    t1, t2 = _as_fraction(t1), _as_fraction(t2)
    if t2 == 0:
        raise ValueError("intermediate needs t2 != 0")
    p = Phi.p
    Psi2 = Phi.partial_fourier(1, -1).partial_fourier(0, -1)
    affine = [
        (Fraction(1), Fraction(0)),
        (Fraction(0), -1 / t2),
        (Fraction(0), t1),
        (t1 * t2, -t2),
    ]
    return line_sweep(Psi2, affine, -t2) * _abs_p(t2, p)


def intermediate_via_materialization(Phi: BruhatFunction, t1, t2) -> CycNumber:
    """Reference route: build the orbital in its second coordinate as a
    1-dim table over a sufficient box, transform, evaluate at -1/t2."""
    t1, t2 = _as_fraction(t1), _as_fraction(t2)
    if t1 == 0 or t2 == 0:
        raise ValueError("this route needs t1, t2 != 0")
    p = Phi.p
    ctx = Phi.ctx
    v1 = val_p(t1, p)
    S_g = max(Phi.axis_S(1), Phi.axis_S(0) + Phi.axis_S(3) + v1)
    C_g = max(Phi.axis_C(1), -S_g)
    vals = [
        orbital(Phi, (t1, Fraction(r) * Fraction(p) ** (-S_g)), 1)
        for r in range(p ** (S_g + C_g))
    ]
    g = BruhatFunction.from_dense(ctx, 1, S_g, C_g, vals)
    x = PAdicPoint.from_rational(p, -1 / t2)
    return g.fourier_at(x, sign=-1) * ctx.psi(-t2 / t1) * _abs_p(t1, p)


# -- intermediate (dual side) -------------------------------------------------


def intermediate_dual(Phi: BruhatFunction, t1, t2) -> CycNumber:
    """Dual intermediate function; t2 = None means the boundary value at
    infinity (the Schwartz extension), evaluated exactly."""
    t1 = _as_fraction(t1)
    if t1 == 0:
        raise ValueError("the dual intermediate needs t1 != 0")
    if t2 is None:
        return intermediate_dual_zform(Phi, t1, None)
    t2 = _as_fraction(t2)
    if t2 == 0:
        raise ValueError("t2 = 0 is not in the dual domain; use t2 = None for infinity")
    return intermediate_dual_fubini(Phi, t1, t2)


def intermediate_dual_fubini(Phi: BruhatFunction, t1, t2) -> CycNumber:
    t1, t2 = _as_fraction(t1), _as_fraction(t2)
    if t1 == 0 or t2 == 0:
        raise ValueError("this route needs t1, t2 != 0")
    p = Phi.p
    G = Phi.partial_fourier(1, +1)
    assigns = [
        ("m", 1 / t2),
        ("fixed", -t1),
        ("fixed", 1 / t2),
        ("n", 1 / t2),
    ]
    body = pair_sweep(G, assigns, Fraction(1), Fraction(1), t1 / t2)
    return body * Phi.ctx.psi(t2 / t1) * (1 / _abs_p(t2, p))


def intermediate_dual_zform(Phi: BruhatFunction, t1, t2) -> CycNumber:
    """Closed 1-dim form of the dual intermediate; t2 = None evaluates the
    boundary value at infinity exactly (entries [[z, -t1], [0, -1/t1]])."""
    t1 = _as_fraction(t1)
    if t1 == 0:
        raise ValueError("the dual intermediate needs t1 != 0")
    p = Phi.p
    Psi2 = Phi.partial_fourier(1, +1).partial_fourier(0, +1)
    if t2 is None:
        affine = [
            (Fraction(1), Fraction(0)),
            (Fraction(0), -t1),
            (Fraction(0), Fraction(0)),
            (Fraction(0), -1 / t1),
        ]
    else:
        t2 = _as_fraction(t2)
        if t2 == 0:
            raise ValueError("t2 = 0 is not in the dual domain")
        affine = [
            (Fraction(1), Fraction(0)),
            (Fraction(0), -t1),
            (Fraction(0), 1 / t2),
            (1 / (t1 * t2), -1 / t1),
        ]
    return line_sweep(Psi2, affine, 1 / t1) * (1 / _abs_p(t1, p))


# -- Hankel routes -------------------------------------------------------------


def hankel_via_composition(Phi: BruhatFunction, t) -> HalfPower:
    """Hankel value through the intermediate function: the slot-1 transform
    of phi-tilde(., t2) at -1/t1 with the |t1 t2|^{-1/2} normalization."""
    t1, t2 = _coords(Phi.p, t)
    p = Phi.p
    Psi2 = Phi.partial_fourier(1, -1).partial_fourier(0, -1)
    assigns = [
        ("m", Fraction(1)),
        ("fixed", -1 / t2),
        ("n", Fraction(1)),
        ("cross", t2, -t2),
    ]
    body = pair_sweep(Psi2, assigns, -t2, 1 / t1)
    return HalfPower(p, val_p(t1, p) - val_p(t2, p), body)


def hankel_via_upstairs(Phi: BruhatFunction, t) -> HalfPower:
    """Hankel value as the dual pushforward of the matrix transform."""
    return push_dual_at(Phi.mat_fourier(), t)


def hankel(Phi: BruhatFunction, t) -> HalfPower:
    return hankel_via_composition(Phi, t)


def hankel_roundtrip(Phi: BruhatFunction, t) -> HalfPower:
    """Inverse composition applied to the Hankel image: integrate the dual
    intermediate of the matrix transform over the inverted second slot
    against the slot-2 character. Equals push_std_at(Phi, t) pointwise.

    The integral is an exact shell sum: cell levels are derived from the
    (S, C) data of the doubly transformed function, and the stabilized
    small-argument tail is summed in closed form.
    """
    t1, t2 = _coords(Phi.p, t)
    p = Phi.p
    ctx = Phi.ctx
    Psi = Phi.mat_fourier()
    Psi2 = Psi.partial_fourier(1, +1).partial_fourier(0, +1)
    S0, S2 = Psi2.axis_S(0), Psi2.axis_S(2)
    C2, C3 = Psi2.axis_C(2), Psi2.axis_C(3)
    v1, v2 = val_p(t1, p), val_p(t2, p)
    # support: the integrand vanishes once the inverted slot leaves axis 2
    k_min = -S2
    # stabilization: below this level the value table cannot see the slot
    K = max(C2, C3 + S0 + v1, k_min)
    lam0 = max(1, C2 - k_min, C3 + S0 + v1 - k_min)
    if (K - k_min + 1) * p ** lam0 > 500_000:
        raise BudgetExceeded("hankel_roundtrip: shell enumeration too large")
    body = CycNumber.zero()
    for k in range(k_min, K):
        lam = max(1, C2 - k, C3 + S0 + v1 - k)
        if v2 + k + lam < 0:
            continue  # kernel integrates to 0 on every cell of this shell
        pk = Fraction(p) ** k
        vol = Fraction(1) / Fraction(p) ** (k + lam)
        for u in range(1, p ** lam):
            if u % p == 0:
                continue
            x = pk * u
            val = intermediate_dual_zform(Psi, t1, 1 / x)
            if not val.is_zero():
                body = body + val * ctx.psi(-t2 * x) * vol
    if v2 + K >= 0:
        tail = intermediate_dual_zform(Psi, t1, None)
        probe = intermediate_dual_zform(Psi, t1, Fraction(p) ** (-K))
        if tail != probe:
            raise MismatchDetected(
                f"dual intermediate did not stabilize at level {K}"
            )
        body = body + tail * (Fraction(1) / Fraction(p) ** K)
    return HalfPower(p, -(v1 + v2), body)


# -- degenerate and central values ---------------------------------------------


def irr1(Phi: BruhatFunction, t1) -> CycNumber:
    """Degenerate boundary value of the normalized standard pushforward
    (t2 -> 0 limit), which is the orbital integral at (t1, 0)."""
    t1 = _as_fraction(t1)
    return orbital(Phi, (t1, Fraction(0)), 1)


def irr1_dual(Phi: BruhatFunction, t2) -> CycNumber:
    """Degenerate boundary value on the dual side: the sign-flipped orbital
    at (1/t2, 0)."""
    t2 = _as_fraction(t2)
    if t2 == 0:
        raise ValueError("irr1_dual needs t2 != 0")
    return orbital(Phi, (1 / t2, Fraction(0)), -1)


def irr1_dual_via_composition(Phi: BruhatFunction, t2) -> CycNumber:
    """|t2| times the slot-1 transform of phi-tilde(., t2) at 0; equals
    irr1_dual of the matrix transform of Phi."""
    t2 = _as_fraction(t2)
    if t2 == 0:
        raise ValueError("needs t2 != 0")
    p = Phi.p
    Psi2 = Phi.partial_fourier(1, -1).partial_fourier(0, -1)
    assigns = [
        ("m", Fraction(1)),
        ("fixed", -1 / t2),
        ("n", Fraction(1)),
        ("cross", t2, -t2),
    ]
    body = pair_sweep(Psi2, assigns, -t2, Fraction(0))
    return body * _abs_p(t2, p) ** 2


def central_std(Phi: BruhatFunction, z) -> CycNumber:
    """Integral of Phi along z I n(x) against psi^{-1}(x)."""
    z = _as_fraction(z)
    if z == 0:
        raise ValueError("central values need z != 0")
    affine = [
        (Fraction(0), z),
        (z, Fraction(0)),
        (Fraction(0), Fraction(0)),
        (Fraction(0), z),
    ]
    return line_sweep(Phi, affine, Fraction(-1))


def central_dual(Phi: BruhatFunction, z) -> CycNumber:
    """Integral of Phi along z^{-1} I n(x) against psi(x)."""
    z = _as_fraction(z)
    if z == 0:
        raise ValueError("central values need z != 0")
    w = 1 / z
    affine = [
        (Fraction(0), w),
        (w, Fraction(0)),
        (Fraction(0), Fraction(0)),
        (Fraction(0), w),
    ]
    return line_sweep(Phi, affine, Fraction(1))


def irr2(Phi: BruhatFunction, t2) -> CycNumber:
    """Intermediate value at t1 = 0, verified through both defining routes:
    the closed 1-dim form and |t2|^2 times the central integral at -t2."""
    t2 = _as_fraction(t2)
    if t2 == 0:
        raise ValueError("irr2 needs t2 != 0")
    p = Phi.p
    direct = intermediate_zform(Phi, Fraction(0), t2)
    via_central = central_std(Phi, -t2) * _abs_p(t2, p) ** 2
    if direct != via_central:
        raise MismatchDetected(
            f"irr2 routes disagree at t2={t2}: "
            f"intermediate={direct!r}, central={via_central!r}"
        )
    return direct


def irr2_dual(Phi: BruhatFunction, t1) -> CycNumber:
    """Dual intermediate value at infinity, verified through both defining
    routes: the closed 1-dim form and |t1|^{-2} times the dual central
    integral at -t1."""
    t1 = _as_fraction(t1)
    if t1 == 0:
        raise ValueError("irr2_dual needs t1 != 0")
    p = Phi.p
    direct = intermediate_dual_zform(Phi, t1, None)
    via_central = central_dual(Phi, -t1) * _abs_p(t1, p) ** -2
    if direct != via_central:
        raise MismatchDetected(
            f"irr2_dual routes disagree at t1={t1}: "
            f"intermediate={direct!r}, central={via_central!r}"
        )
    return direct


# -- conjugation helper ----------------------------------------------------------


def unipotent_sandwich(Phi: BruhatFunction, a, b) -> BruhatFunction:
    """x -> Phi(n(a) x n(b)) for upper-triangular unipotents n(a), n(b)."""
    a, b = Fraction(a), Fraction(b)
    A = [
        [Fraction(1), Fraction(0), a, Fraction(0)],
        [b, Fraction(1), a * b, a],
        [Fraction(0), Fraction(0), Fraction(1), Fraction(0)],
        [Fraction(0), Fraction(0), b, Fraction(1)],
    ]
    return Phi.linear_pullback(A)
