"""Floating-point mirror of the local theory at the real place.

Test functions are finite sums of products of L2-normalized Hermite
functions in the exp(-pi x^2) convention, one per matrix entry. The class
is closed under every Fourier step used by the engine: a partial transform
multiplies each coefficient by a fourth root of unity, so the 4-dim matrix
transform is exact and quadrature error enters only through orbital-type
integrals. Those are computed by composite Gauss-Legendre panels with
dyadic refinement; every value carries an error estimate of at least the
last refinement gap, and a refinement that stalls above the target raises
ToleranceNotMet.

Character convention at the real place: psi(x) = exp(-2 pi i x), the
standard choice making the product over all places trivial on rationals.
The 1-dim transform with kernel psi^{-1}(xy) sends the k-th Hermite
function to i^k times itself; the matrix transform pairs entries through
the trace form (kernel psi(tr(yx))), i.e. multiplier (-i)^k per axis plus
the off-diagonal swap. Self-dual measure for this psi is Lebesgue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import ToleranceNotMet

HERMITE_MAX = 16  # desk scale; keeps every grid and recurrence small


def hermite_values(k_max: int, x):
    """Stack of h_0..h_{k_max} evaluated on the array x.

    h_k(x) = 2^{1/4} H_k(sqrt(2 pi) x) exp(-pi x^2) / sqrt(2^k k!), by the
    stable three-term recurrence.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((k_max + 1,) + x.shape, dtype=float)
    out[0] = 2.0 ** 0.25 * np.exp(-math.pi * x * x)
    if k_max >= 1:
        out[1] = 2.0 * math.sqrt(math.pi) * x * out[0]
    for k in range(1, k_max):
        out[k + 1] = (2.0 * math.sqrt(math.pi) / math.sqrt(k + 1)) * x * out[k] \
            - math.sqrt(k / (k + 1.0)) * out[k - 1]
    return out


class ArchSchwartz:
    """Finite Hermite-tensor expansion on the four matrix entries."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        data: dict[tuple[int, int, int, int], complex] = {}
        for key, c in (coeffs.items() if isinstance(coeffs, dict) else coeffs):
            key = tuple(int(k) for k in key)
            if len(key) != 4 or min(key) < 0:
                raise ValueError(f"bad multi-index {key}")
            if sum(key) > HERMITE_MAX:
                raise ValueError(f"total degree {sum(key)} exceeds {HERMITE_MAX}")
            c = complex(c)
            if c != 0:
                data[key] = data.get(key, 0j) + c
        self.coeffs = {k: v for k, v in sorted(data.items()) if v != 0}

    @classmethod
    def gaussian(cls) -> "ArchSchwartz":
        return cls({(0, 0, 0, 0): 1.0})

    @classmethod
    def random(cls, rng, k_max: int = 4, terms: int = 5,
               real: bool = False) -> "ArchSchwartz":
        items = []
        for _ in range(terms):
            while True:
                key = tuple(rng.randint(0, k_max) for _ in range(4))
                if sum(key) <= min(k_max * 2, HERMITE_MAX):
                    break
            c = rng.uniform(-1, 1) + (0 if real else 1j * rng.uniform(-1, 1))
            items.append((key, c))
        return cls(items)

    @property
    def k_max(self) -> int:
        return max((max(k) for k in self.coeffs), default=0)

    def __add__(self, other):
        if not isinstance(other, ArchSchwartz):
            return NotImplemented
        return ArchSchwartz(list(self.coeffs.items()) + list(other.coeffs.items()))

    def scale(self, c) -> "ArchSchwartz":
        c = complex(c)
        return ArchSchwartz({k: v * c for k, v in self.coeffs.items()})

    def __sub__(self, other):
        if not isinstance(other, ArchSchwartz):
            return NotImplemented
        return self + other.scale(-1)

    def norm(self) -> float:
        """L2 norm; the Hermite tensors are orthonormal."""
        return math.sqrt(sum(abs(c) ** 2 for c in self.coeffs.values()))

    def envelope_radius(self, tol: float) -> float:
        """Radius beyond which every basis factor is below tol,
        R = sqrt(K/pi + ln(1/tol)/pi) + 1."""
        k = self.k_max
        return math.sqrt(k / math.pi + math.log(1.0 / tol) / math.pi) + 1.0

    def partial_transform(self, axis: int, sign: int = -1) -> "ArchSchwartz":
        """Exact 1-dim transform along one entry. sign -1 is the
        psi^{-1}(xy) orientation (multiplier i^k), sign +1 the psi(xy)
        one (multiplier (-i)^k)."""
        if axis not in (0, 1, 2, 3):
            raise ValueError("axis must be 0..3")
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        w = 1j * (-sign)
        return ArchSchwartz({k: c * w ** k[axis]
                             for k, c in self.coeffs.items()})

    def reflection(self) -> "ArchSchwartz":
        """f(-x); flips each coefficient by the parity of its degree."""
        return ArchSchwartz({k: c * (-1) ** (sum(k) % 2)
                             for k, c in self.coeffs.items()})

    def eval_grid(self, entries):
        """Pointwise values on four broadcastable coordinate arrays."""
        if len(entries) != 4:
            raise ValueError("need four matrix entries")
        arrs = np.broadcast_arrays(*[np.asarray(e, dtype=float)
                                     for e in entries])
        if not self.coeffs:
            return np.zeros(arrs[0].shape, dtype=complex)
        km = self.k_max
        stacks = [hermite_values(km, a) for a in arrs]
        out = np.zeros(arrs[0].shape, dtype=complex)
        for (k0, k1, k2, k3), c in self.coeffs.items():
            out += c * (stacks[0][k0] * stacks[1][k1]
                        * stacks[2][k2] * stacks[3][k3])
        return out

    def eval_separable(self, axes_coords):
        """Values on the product grid of four 1-dim coordinate arrays;
        avoids materializing per-axis stacks in four dimensions."""
        if len(axes_coords) != 4:
            raise ValueError("need four coordinate axes")
        coords = [np.asarray(a, dtype=float).ravel() for a in axes_coords]
        shape = tuple(len(a) for a in coords)
        if not self.coeffs:
            return np.zeros(shape, dtype=complex)
        km = self.k_max
        stacks = [hermite_values(km, a) for a in coords]
        out = np.zeros(shape, dtype=complex)
        for (k0, k1, k2, k3), c in self.coeffs.items():
            blk = np.multiply.outer(np.multiply.outer(stacks[0][k0],
                                                      stacks[1][k1]),
                                    np.multiply.outer(stacks[2][k2],
                                                      stacks[3][k3]))
            out += c * blk
        return out

    def __repr__(self):
        return f"ArchSchwartz({len(self.coeffs)} terms, k_max={self.k_max})"


def arch_fourier(f: ArchSchwartz) -> ArchSchwartz:
    """Matrix transform with kernel psi(tr(yx)): diagonal multiplier
    (-i)^{total degree} plus the swap of the two off-diagonal entries."""
    out = {}
    for (k0, k1, k2, k3), c in f.coeffs.items():
        out[(k0, k2, k1, k3)] = c * (-1j) ** ((k0 + k1 + k2 + k3) % 4)
    return ArchSchwartz(out)


@dataclass(frozen=True)
class QuadratureConfig:
    radius: Optional[float] = None  # None: derived from the envelope
    nodes: int = 12
    tol: float = 1e-8
    max_rounds: int = 9

    def __post_init__(self):
        if self.nodes < 2 or self.max_rounds < 1 or self.tol <= 0:
            raise ValueError("bad quadrature configuration")


DEFAULT_CFG = QuadratureConfig()


class QuadratureResult(NamedTuple):
    value: complex
    error: float

    def __complex__(self):
        return complex(self.value)


def _panels(lo: float, hi: float, m: int, nq: int):
    """Composite Gauss-Legendre nodes and weights, m panels of nq nodes."""
    x, w = np.polynomial.legendre.leggauss(nq)
    edges = np.linspace(lo, hi, m + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _refine_1d(integrand, lo: float, hi: float, cfg: QuadratureConfig,
               m0: int) -> QuadratureResult:
    m = max(4, m0)
    prev = None
    for _ in range(cfg.max_rounds):
        nodes, weights = _panels(lo, hi, m, cfg.nodes)
        cur = complex(np.sum(integrand(nodes) * weights))
        if prev is not None:
            err = abs(cur - prev)
            if err <= cfg.tol:
                return QuadratureResult(cur, err)
        prev = cur
        m *= 2
    raise ToleranceNotMet(
        f"1-dim refinement stalled above {cfg.tol} after {cfg.max_rounds} rounds")


def _refine_2d(integrand, box, cfg: QuadratureConfig, m0) -> QuadratureResult:
    ma, mb = (max(4, m) for m in m0)
    prev = None
    for _ in range(cfg.max_rounds):
        na, wa = _panels(box[0][0], box[0][1], ma, cfg.nodes)
        nb, wb = _panels(box[1][0], box[1][1], mb, cfg.nodes)
        vals = integrand(na[:, None], nb[None, :])
        cur = complex(np.sum((wa[:, None] * wb[None, :]) * vals))
        if prev is not None:
            err = abs(cur - prev)
            if err <= cfg.tol:
                return QuadratureResult(cur, err)
        prev = cur
        ma *= 2
        mb *= 2
    raise ToleranceNotMet(
        f"2-dim refinement stalled above {cfg.tol} after {cfg.max_rounds} rounds")


def arch_orbital(f: ArchSchwartz, t1: float, t2: float,
                 cfg: QuadratureConfig = DEFAULT_CFG,
                 character_sign: int = 1) -> QuadratureResult:
    """Double unipotent integral at the real place: the integrand is
    f([[t1 n1, t1 n1 n2 + t2], [t1, t1 n2]]) against psi(n1+n2) to the
    power -character_sign."""
    if t1 == 0:
        raise ValueError("orbital integrals need t1 != 0")
    if character_sign not in (1, -1):
        raise ValueError("character_sign must be +1 or -1")
    if not f.coeffs:
        return QuadratureResult(0j, 0.0)
    t1, t2 = float(t1), float(t2)
    r = (cfg.radius if cfg.radius is not None
         else f.envelope_radius(cfg.tol)) / abs(t1)
    s = 2.0 * math.pi * character_sign

    def integrand(a, b):
        vals = f.eval_grid([t1 * a, t1 * a * b + t2,
                            np.full(np.broadcast_shapes(a.shape, b.shape), t1),
                            t1 * b])
        return vals * np.exp(1j * s * (a + b))

    m0 = int(math.ceil(2 * r)) + 2
    return _refine_2d(integrand, ((-r, r), (-r, r)), cfg, (m0, m0))


def arch_intermediate(f: ArchSchwartz, t1: float, t2: float,
                      cfg: QuadratureConfig = DEFAULT_CFG) -> QuadratureResult:
    """Intermediate value: |t2| times the line integral of the doubly
    transformed function along [[z, -1/t2], [t1, t1 t2 z - t2]] against
    psi(-t2 z). t1 = 0 is allowed; t2 must be nonzero."""
    t1, t2 = float(t1), float(t2)
    if t2 == 0:
        raise ValueError("intermediate needs t2 != 0")
    if not f.coeffs:
        return QuadratureResult(0j, 0.0)
    g = f.partial_transform(1, -1).partial_transform(0, -1)
    r = cfg.radius if cfg.radius is not None else g.envelope_radius(cfg.tol)

    def integrand(z):
        vals = g.eval_grid([z, np.full(z.shape, -1.0 / t2),
                            np.full(z.shape, t1), t1 * t2 * z - t2])
        return vals * np.exp(2j * math.pi * t2 * z)

    m0 = int(math.ceil(2 * r * max(1.0, abs(t2)))) + 2
    res = _refine_1d(integrand, -r, r, cfg, m0)
    return QuadratureResult(res.value * abs(t2), res.error * abs(t2))


def arch_intermediate_dual(f: ArchSchwartz, t1: float, t2,
                           cfg: QuadratureConfig = DEFAULT_CFG) -> QuadratureResult:
    """Dual intermediate value; t2 = None is the boundary value at
    infinity (entries [[z, -t1], [0, -1/t1]])."""
    t1 = float(t1)
    if t1 == 0:
        raise ValueError("the dual intermediate needs t1 != 0")
    if not f.coeffs:
        return QuadratureResult(0j, 0.0)
    g = f.partial_transform(1, +1).partial_transform(0, +1)
    r = cfg.radius if cfg.radius is not None else g.envelope_radius(cfg.tol)

    if t2 is None:
        def entries(z):
            zero = np.zeros(z.shape)
            return [z, np.full(z.shape, -t1), zero,
                    np.full(z.shape, -1.0 / t1)]
    else:
        t2 = float(t2)
        if t2 == 0:
            raise ValueError("t2 = 0 is not in the dual domain; use None")

        def entries(z):
            return [z, np.full(z.shape, -t1),
                    np.full(z.shape, 1.0 / t2),
                    z / (t1 * t2) - 1.0 / t1]

    def integrand(z):
        return g.eval_grid(entries(z)) * np.exp(-2j * math.pi * z / t1)

    m0 = int(math.ceil(2 * r * max(1.0, 1.0 / abs(t1)))) + 2
    res = _refine_1d(integrand, -r, r, cfg, m0)
    return QuadratureResult(res.value / abs(t1), res.error / abs(t1))


def arch_hankel_composition(f: ArchSchwartz, t1: float, t2: float,
                            cfg: QuadratureConfig = DEFAULT_CFG) -> QuadratureResult:
    """Hankel value through the intermediate function: a slot-1 transform
    of the intermediate at -1/t1, collapsed into one 2-dim sweep of the
    doubly transformed function with the |t1|^{-1/2} |t2|^{1/2} weight."""
    t1, t2 = float(t1), float(t2)
    if t1 == 0 or t2 == 0:
        raise ValueError("hankel values need t1, t2 != 0")
    if not f.coeffs:
        return QuadratureResult(0j, 0.0)
    g = f.partial_transform(1, -1).partial_transform(0, -1)
    r = cfg.radius if cfg.radius is not None else g.envelope_radius(cfg.tol)

    def integrand(m, n):
        shape = np.broadcast_shapes(m.shape, n.shape)
        vals = g.eval_grid([m + np.zeros(shape),
                            np.full(shape, -1.0 / t2),
                            n + np.zeros(shape),
                            t2 * m * n - t2])
        return vals * np.exp(2j * math.pi * (t2 * m - n / t1))

    m0 = int(math.ceil(2 * r * max(1.0, abs(t2)))) + 2
    n0 = int(math.ceil(2 * r * max(1.0, 1.0 / abs(t1)))) + 2
    res = _refine_2d(integrand, ((-r, r), (-r, r)), cfg, (m0, n0))
    w = math.sqrt(abs(t2)) / math.sqrt(abs(t1))
    return QuadratureResult(res.value * w, res.error * w)


def arch_hankel_upstairs(f: ArchSchwartz, t1: float, t2: float,
                         cfg: QuadratureConfig = DEFAULT_CFG) -> QuadratureResult:
    """Hankel value as the dual pushforward of the exact matrix transform:
    |t1|^{-1/2} |t2|^{-3/2} times the conjugate-character orbital of the
    transform at the inverted swapped point."""
    t1, t2 = float(t1), float(t2)
    if t1 == 0 or t2 == 0:
        raise ValueError("hankel values need t1, t2 != 0")
    res = arch_orbital(arch_fourier(f), 1.0 / t2, 1.0 / t1, cfg,
                       character_sign=-1)
    w = 1.0 / (math.sqrt(abs(t1)) * abs(t2) ** 1.5)
    return QuadratureResult(res.value * w, res.error * w)
