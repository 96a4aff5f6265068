"""Brute-force reference integrators used to certify the fast engines.

Every routine here computes its integral as a flat Riemann sum over a
uniform-level grid: crude support bounds from the per-axis envelopes of the
function, one global constancy level per variable, and a margin that makes
both strictly larger than anything the production engines derive. No
stratification, no cell decompositions, no shared kernels beyond pointwise
evaluation and the additive character; the compact-group average behind the
convolution oracle likewise enumerates every unit residue matrix at one
uniform level. Values are exact; a case whose grid would exceed the budget
raises BudgetExceeded instead of degrading.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .bruhat import BruhatFunction
from .cyclotomic import CycNumber
from .errors import BudgetExceeded
from .local import INF, val_p

DEFAULT_BUDGET = 500_000


def _v(x, p: int):
    return val_p(Fraction(x), p)


def _axis_env(G: BruhatFunction):
    """Per-axis (S, C) envelopes over all terms."""
    return (
        [G.axis_S(i) for i in range(G.dim)],
        [G.axis_C(i) for i in range(G.dim)],
    )


def _reps(p: int, lo: int, level: int):
    """Representatives of the cells of level `level` inside p^lo Z_p."""
    if level < lo:
        level = lo
    n = p ** (level - lo)
    step = Fraction(1, p ** (-lo)) if lo < 0 else Fraction(p ** lo)
    return [r * step for r in range(n)], level, n


def _affine_lo(S: int, A: Fraction, D: Fraction, p: int) -> int:
    """Lower valuation bound on z from support of the entry A z + D."""
    vA = _v(A, p)
    if D == 0 or _v(D, p) >= -S:
        return -S - vA
    # the constant part sticks out of the support: only the cancellation
    # shell v(Az) = v(D) can survive
    return _v(D, p) - vA


def oracle_pair_integral(
    G: BruhatFunction,
    assigns: Sequence[tuple],
    phase_m: Fraction,
    phase_n: Fraction,
    twist: Fraction = Fraction(0),
    *,
    margin: int = 1,
    budget: Optional[int] = None,
    cost_only: bool = False,
):
    """Sum over (m, n) of G(entries) psi(phase_m m + phase_n n + twist m n).

    assigns: one 4-tuple entry spec per axis, each of
      ("m", c)        entry = c * m
      ("n", c)        entry = c * n
      ("fixed", d)    entry = d
      ("cross", B, D) entry = B * m * n + D
    """
    G._require_selfdual()
    p = G.p
    ctx = G.ctx
    S, C = _axis_env(G)
    phase_m, phase_n, twist = Fraction(phase_m), Fraction(phase_n), Fraction(twist)

    m_axes = [(i, Fraction(a[1])) for i, a in enumerate(assigns) if a[0] == "m" and a[1]]
    n_axes = [(i, Fraction(a[1])) for i, a in enumerate(assigns) if a[0] == "n" and a[1]]
    cross = [
        (i, Fraction(a[1]), Fraction(a[2]))
        for i, a in enumerate(assigns)
        if a[0] == "cross" and a[1]
    ]
    if not m_axes or not n_axes:
        raise ValueError("pair integral needs at least one pure axis per variable")

    a_lo = max(-S[i] - _v(c, p) for i, c in m_axes) - margin
    b_lo = max(-S[i] - _v(c, p) for i, c in n_axes) - margin

    lm = [0] + [C[i] - _v(c, p) for i, c in m_axes]
    ln = [0] + [C[i] - _v(c, p) for i, c in n_axes]
    if phase_m:
        lm.append(-_v(phase_m, p))
    if phase_n:
        ln.append(-_v(phase_n, p))
    for i, B, D in cross:
        lm.append(C[i] - _v(B, p) - b_lo)
        ln.append(C[i] - _v(B, p) - a_lo)
    if twist:
        lm.append(-_v(twist, p) - b_lo)
        ln.append(-_v(twist, p) - a_lo)
    lam_m = max(lm) + margin
    lam_n = max(ln) + margin

    ms, lam_m, nm = _reps(p, a_lo, lam_m)
    ns, lam_n, nn = _reps(p, b_lo, lam_n)
    cost = nm * nn
    if cost_only:
        return cost
    cap = DEFAULT_BUDGET if budget is None else budget
    if cost > cap:
        raise BudgetExceeded(f"oracle grid has {cost} cells > {cap}")

    scale = Fraction(1, p ** (lam_m + lam_n))
    total = CycNumber.zero()
    for m in ms:
        entries_m = [None] * 4
        for i, a in enumerate(assigns):
            if a[0] == "m":
                entries_m[i] = Fraction(a[1]) * m
            elif a[0] == "fixed":
                entries_m[i] = Fraction(a[1])
        for n in ns:
            xs = list(entries_m)
            for i, a in enumerate(assigns):
                if a[0] == "n":
                    xs[i] = Fraction(a[1]) * n
                elif a[0] == "cross":
                    xs[i] = Fraction(a[1]) * m * n + Fraction(a[2])
            val = G.eval_rational(xs)
            if val.is_zero():
                continue
            ph = phase_m * m + phase_n * n + twist * m * n
            total = total + val * ctx.psi(ph)
    return total * scale


def oracle_line_integral(
    G: BruhatFunction,
    affine: Sequence[tuple],
    phase: Fraction,
    *,
    margin: int = 1,
    budget: Optional[int] = None,
    cost_only: bool = False,
):
    """Sum over z of G(A_0 z + D_0, ..., A_{d-1} z + D_{d-1}) psi(phase * z)."""
    G._require_selfdual()
    p = G.p
    ctx = G.ctx
    S, C = _axis_env(G)
    phase = Fraction(phase)
    affine = [(Fraction(A), Fraction(D)) for A, D in affine]
    live = [(i, A, D) for i, (A, D) in enumerate(affine) if A]
    if not live:
        raise ValueError("line integral needs a z-dependent axis")

    lo = max(_affine_lo(S[i], A, D, p) for i, A, D in live) - margin
    caps = [0] + [C[i] - _v(A, p) for i, A, _ in live]
    if phase:
        caps.append(-_v(phase, p))
    lam = max(caps) + margin

    zs, lam, nz = _reps(p, lo, lam)
    if cost_only:
        return nz
    cap = DEFAULT_BUDGET if budget is None else budget
    if nz > cap:
        raise BudgetExceeded(f"oracle grid has {nz} cells > {cap}")

    scale = Fraction(1, p ** lam)
    total = CycNumber.zero()
    for z in zs:
        xs = [A * z + D for A, D in affine]
        val = G.eval_rational(xs)
        if val.is_zero():
            continue
        total = total + val * ctx.psi(phase * z)
    return total * scale


def _orbital_assigns(t1: Fraction, t2: Fraction):
    return [("m", t1), ("cross", t1, t2), ("fixed", t1), ("n", t1)]


def oracle_orbital(
    Phi: BruhatFunction,
    t1,
    t2,
    character_sign: int = 1,
    *,
    margin: int = 1,
    budget: Optional[int] = None,
    cost_only: bool = False,
):
    """Orbital integral by flat double Riemann sum.

    Integrand: Phi([[t1 n1, t1 n1 n2 + t2], [t1, t1 n2]]) with weight
    psi(n1 + n2)^(-character_sign).
    """
    t1, t2 = Fraction(t1), Fraction(t2)
    if t1 == 0:
        raise ValueError("orbital integrals need t1 != 0")
    s = -character_sign
    return oracle_pair_integral(
        Phi,
        _orbital_assigns(t1, t2),
        Fraction(s),
        Fraction(s),
        margin=margin,
        budget=budget,
        cost_only=cost_only,
    )


def oracle_central(
    Phi: BruhatFunction,
    z,
    dual: bool = False,
    *,
    margin: int = 1,
    budget: Optional[int] = None,
):
    """Central degenerate integral of Phi along z I n(x) against psi^{-1}(x);
    the dual variant uses z^{-1} I n(x) against psi(x)."""
    z = Fraction(z)
    if z == 0:
        raise ValueError("central integrals need z != 0")
    w = 1 / z if dual else z
    sign = Fraction(1 if dual else -1)
    affine = [(Fraction(0), w), (w, Fraction(0)), (Fraction(0), Fraction(0)),
              (Fraction(0), w)]
    return oracle_line_integral(Phi, affine, sign, margin=margin, budget=budget)


def oracle_fourier_at(
    G: BruhatFunction,
    x,
    sign: int = -1,
    *,
    margin: int = 1,
    budget: Optional[int] = None,
):
    """1-dim transform value integral G(y) psi(sign * x y) dy, brute force."""
    G._require_selfdual()
    if G.dim != 1:
        raise ValueError("oracle_fourier_at needs a 1-dim function")
    p = G.p
    x = Fraction(x)
    S, C = _axis_env(G)
    lo = -S[0] - margin
    lam = max(C[0], 0 if x == 0 else -_v(x, p), 0) + margin
    ys, lam, ny = _reps(p, lo, lam)
    cap = DEFAULT_BUDGET if budget is None else budget
    if ny > cap:
        raise BudgetExceeded(f"oracle grid has {ny} cells > {cap}")
    total = CycNumber.zero()
    for y in ys:
        val = G.eval_rational([y])
        if val.is_zero():
            continue
        total = total + val * G.ctx.psi(sign * x * y)
    return total * Fraction(1, p ** lam)


def oracle_mat_fourier_at(
    Phi: BruhatFunction,
    xs,
    *,
    margin: int = 1,
    budget: Optional[int] = None,
):
    """Matrix transform value integral Phi(y) psi(tr(y x)) d+y, brute force.

    tr(y x) with y = [[y0, y1], [y2, y3]], x = [[x0, x1], [x2, x3]] is
    y0 x0 + y1 x2 + y2 x1 + y3 x3.
    """
    Phi._require_selfdual()
    if Phi.dim != 4:
        raise ValueError("oracle_mat_fourier_at needs a 4-dim function")
    p = Phi.p
    xs = [Fraction(c) for c in xs]
    pair = [xs[0], xs[2], xs[1], xs[3]]
    S, C = _axis_env(Phi)
    los = [-S[i] - margin for i in range(4)]
    lams = [
        max(C[i], 0 if pair[i] == 0 else -_v(pair[i], p), 0) + margin
        for i in range(4)
    ]
    grids = []
    count = 1
    for i in range(4):
        reps, lam, n = _reps(p, los[i], lams[i])
        grids.append(reps)
        lams[i] = lam
        count *= n
    cap = DEFAULT_BUDGET if budget is None else budget
    if count > cap:
        raise BudgetExceeded(f"oracle grid has {count} cells > {cap}")
    total = CycNumber.zero()
    for y0 in grids[0]:
        for y1 in grids[1]:
            for y2 in grids[2]:
                for y3 in grids[3]:
                    val = Phi.eval_rational([y0, y1, y2, y3])
                    if val.is_zero():
                        continue
                    tr = y0 * pair[0] + y1 * pair[1] + y2 * pair[2] + y3 * pair[3]
                    total = total + val * Phi.ctx.psi(tr)
    return total * Fraction(1, p ** sum(lams))


def _hermite_reps(p: int, a: int, b: int):
    """All upper-triangular Hermite forms with elementary divisors
    (p^a, p^b): [[p^c1, m], [0, p^c2]] with c1 + c2 = a + b, the
    off-diagonal entry scanned over the full range 0 <= m < p^c1 and kept
    when the entry gcd has valuation exactly b."""
    if a < b:
        raise ValueError("need a >= b")
    reps = []
    for c1 in range(a + b + 1):
        c2 = a + b - c1
        for m in range(p ** c1):
            g = min(c1, c2) if m == 0 else min(c1, c2, val_p(m, p))
            if g == b:
                reps.append((p ** c1, m, p ** c2))
    return reps


def _unit_count(p: int, level: int) -> int:
    return p ** (4 * (level - 1)) * (p * p - 1) * (p * p - p)


@lru_cache(maxsize=8)
def _unit_residue_matrices(p: int, level: int):
    """Every 2x2 matrix over Z/p^level with unit determinant."""
    q = p ** level
    out = []
    for k00, k01, k10, k11 in product(range(q), repeat=4):
        if (k00 * k11 - k01 * k10) % p:
            out.append((k00, k01, k10, k11))
    return tuple(out)


def _unit_average(Phi: BruhatFunction, y, level: int, side: str):
    """Exact average of k -> Phi(k y) (side "left") or k -> Phi(y k)
    (side "right") over the unit residue matrices at the given level;
    y is a row-major 2x2 of Fractions."""
    total = CycNumber.zero()
    units = _unit_residue_matrices(Phi.p, level)
    y00, y01, y10, y11 = y
    for k00, k01, k10, k11 in units:
        if side == "left":
            arg = [k00 * y00 + k01 * y10, k00 * y01 + k01 * y11,
                   k10 * y00 + k11 * y10, k10 * y01 + k11 * y11]
        else:
            arg = [y00 * k00 + y01 * k10, y00 * k01 + y01 * k11,
                   y10 * k00 + y11 * k10, y10 * k01 + y11 * k11]
        val = Phi.eval_rational(arg)
        if not val.is_zero():
            total = total + val
    return total * Fraction(1, len(units))


def oracle_hecke(
    h,
    Phi: BruhatFunction,
    x,
    side: str = "left",
    *,
    margin: int = 1,
    budget: Optional[int] = None,
    level: Optional[int] = None,
):
    """Convolution value at one matrix point by direct residue enumeration.

    side "left" sums, over every Hermite representative g of every
    double coset in h, the average of k -> Phi(k g^{-1} x) over unit
    residue matrices k; side "right" averages k -> Phi(x g k). The
    averaging level is the crude global bound (max constancy level plus
    the argument's denominator depth) plus the margin, uniform over k.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    Phi._require_selfdual()
    if Phi.dim != 4:
        raise ValueError("oracle_hecke needs a 4-dim function")
    p = Phi.p
    pairs = getattr(h, "pairs", h)
    xs = [Fraction(c) for c in x]
    if len(xs) != 4:
        raise ValueError("x must be a row-major 2x2 matrix")
    _, C = _axis_env(Phi)
    cmax = max(C)

    jobs = []
    cost = 0
    for (a, b), coeff in pairs.items():
        for d1, m, d2 in _hermite_reps(p, a, b):
            if side == "left":
                det = Fraction(d1 * d2)
                y = [Fraction(d2) / det * xs[0] - Fraction(m) / det * xs[2],
                     Fraction(d2) / det * xs[1] - Fraction(m) / det * xs[3],
                     Fraction(d1) / det * xs[2],
                     Fraction(d1) / det * xs[3]]
            else:
                y = [xs[0] * d1, xs[0] * m + xs[1] * d2,
                     xs[2] * d1, xs[2] * m + xs[3] * d2]
            vals = [_v(c, p) for c in y if c]
            depth = max([0] + [-v for v in vals])
            lam = level if level is not None else max(1, cmax + depth) + margin
            cost += _unit_count(p, lam)
            jobs.append((coeff, y, lam))
    cap = DEFAULT_BUDGET if budget is None else budget
    if cost > cap:
        raise BudgetExceeded(f"oracle unit-group sweep has {cost} points > {cap}")

    total = CycNumber.zero()
    for coeff, y, lam in jobs:
        total = total + _unit_average(Phi, y, lam, side) * coeff
    return total


def oracle_arch_fft(f, n: int = 40, spacing: Optional[float] = None):
    """Dense-grid discrete approximation of the archimedean matrix
    transform. Samples the function on a centered uniform 4-dim grid,
    takes one FFT with the centering twiddles, and applies the trace
    pairing's off-diagonal axis swap.

    Returns (coords, grid, estimate): the shared 1-dim coordinate array
    (spacing defaults to 1/sqrt(n), making the frequency grid coincide
    with the spatial one), the transformed grid, and a crude aliasing
    estimate (single-axis Gaussian tail mass beyond the half extent,
    times a union-bound factor of 16 for the eight box faces on both
    sides of the transform).
    """
    if n % 4:
        raise ValueError("n must be divisible by 4 (centering phase)")
    delta = float(spacing) if spacing is not None else 1.0 / math.sqrt(n)
    coords = (np.arange(n) - n // 2) * delta
    vals = f.eval_separable([coords] * 4)
    mask = np.where(np.arange(n) % 2, -1.0, 1.0)
    m4 = (mask[:, None, None, None] * mask[None, :, None, None]
          * mask[None, None, :, None] * mask[None, None, None, :])
    W = np.fft.fftn(vals * m4) * m4 * delta ** 4
    half = n // 2 * delta

    def tail(k: int) -> float:
        amp = 2.0 ** 0.25 * (2.0 * math.sqrt(math.pi)) ** k \
            / math.sqrt(float(2 ** k) * math.factorial(k))
        r = max(half, 1.0)
        return amp * r ** max(k - 1, 0) * math.exp(-math.pi * r * r) / math.pi

    est = 16.0 * sum(abs(c) * max(tail(k) for k in key)
                     for key, c in f.coeffs.items())
    return coords, W.transpose(0, 2, 1, 3), est


def oracle_intermediate(
    Phi: BruhatFunction,
    t1,
    t2,
    *,
    margin: int = 1,
    budget: Optional[int] = None,
):
    """Intermediate function by composing the brute orbital with a brute
    slot-2 transform: |t1| psi(-t2/t1) * sum_y O_(t1, y)(Phi) psi(y/t2)."""
    p = Phi.p
    ctx = Phi.ctx
    t1, t2 = Fraction(t1), Fraction(t2)
    if t1 == 0 or t2 == 0:
        raise ValueError("the brute intermediate route needs t1, t2 != 0")
    S, C = _axis_env(Phi)
    v1 = _v(t1, p)
    y_lo = min(-S[1], -(S[0] + S[3] + v1)) - margin
    lam = max(C[1], -_v(Fraction(1) / t2, p), 0) + margin
    ys, lam, ny = _reps(p, y_lo, lam)
    cap = DEFAULT_BUDGET if budget is None else budget
    total = CycNumber.zero()
    spent = 0
    for y in ys:
        inner_cost = oracle_orbital(Phi, t1, y, cost_only=True)
        spent += inner_cost
        if spent > cap:
            raise BudgetExceeded(f"oracle intermediate spent {spent} cells > {cap}")
        val = oracle_orbital(Phi, t1, y, budget=cap)
        if val.is_zero():
            continue
        total = total + val * ctx.psi(y / t2)
    return total * ctx.psi(-t2 / t1) * (Fraction(p) ** (-(lam + v1)))
