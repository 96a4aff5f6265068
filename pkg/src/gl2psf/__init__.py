"""Exact p-adic harmonic analysis on GL(2) with a numeric real-place mirror.

Layers, bottom up: exact cyclotomic scalars, local fields and Schwartz
tables, orbital integrals and Hankel transforms, Hecke convolution, the
Hermite-based archimedean mirror, and the truncated global summation
identities. Brute-force oracles certify every fast path.
"""

__version__ = "0.1.0"
