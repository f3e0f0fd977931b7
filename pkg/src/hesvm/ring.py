"""Negacyclic polynomial ring Z_q[X]/(X^n+1) in RNS form.

A `RingPoly` stores one residue row per active chain modulus.  All operations
are pure: they validate compatibility and return fresh objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ntt import NttTables, U64, is_prime

COEFF = "coeff"
EVAL = "eval"


class RingError(ValueError):
    """Parameter, domain or level mismatch between ring operands."""


@dataclass(frozen=True)
class RingParams:
    """Ring degree and ordered modulus chain q_1 (base) .. q_L (top)."""

    n: int
    moduli: tuple[int, ...]

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise RingError("n must be a power of two, n >= 8")
        if len(set(self.moduli)) != len(self.moduli):
            raise RingError("moduli must be pairwise distinct")
        for q in self.moduli:
            if q % 2 == 0 or q % (2 * self.n) != 1:
                raise RingError(f"modulus {q} must be odd and 1 mod 2n")
            if q.bit_length() > 62:
                raise RingError(f"modulus {q} exceeds 62 bits")
            if not is_prime(q):
                raise RingError(f"modulus {q} is not prime")

    @property
    def level_count(self) -> int:
        return len(self.moduli)


def make_tables(params: RingParams, extra_primes: tuple[int, ...] = ()) -> NttTables:
    """NTT tables over the chain moduli plus any key-switching primes."""
    return NttTables(params.n, list(params.moduli) + list(extra_primes))


@dataclass
class RingPoly:
    params: RingParams
    residues: np.ndarray  # (level, n) uint64, row i for modulus q_{i+1}
    domain: str
    level: int

    def __post_init__(self):
        if self.residues.shape != (self.level, self.params.n):
            raise RingError("residue matrix shape does not match level and n")
        if self.domain not in (COEFF, EVAL):
            raise RingError(f"unknown domain {self.domain!r}")

    @property
    def rows(self) -> np.ndarray:
        return np.arange(self.level)

    def copy(self) -> "RingPoly":
        return RingPoly(self.params, self.residues.copy(), self.domain, self.level)


def _check_compat(a: RingPoly, b: RingPoly, domain: str | None = None):
    if a.params is not b.params and a.params != b.params:
        raise RingError("operands built over different ring parameters")
    if a.level != b.level:
        raise RingError(f"level mismatch: {a.level} vs {b.level}")
    if a.domain != b.domain:
        raise RingError(f"domain mismatch: {a.domain} vs {b.domain}")
    if domain is not None and a.domain != domain:
        raise RingError(f"operation requires {domain} domain, got {a.domain}")


def ntt_forward(p: RingPoly, t: NttTables) -> RingPoly:
    if p.domain != COEFF:
        raise RingError("ntt_forward expects a coefficient-domain polynomial")
    if p.level > len(t.primes):
        raise RingError("level beyond table range")
    return RingPoly(p.params, t.forward(p.residues, p.rows), EVAL, p.level)


def ntt_inverse(p: RingPoly, t: NttTables) -> RingPoly:
    if p.domain != EVAL:
        raise RingError("ntt_inverse expects an evaluation-domain polynomial")
    if p.level > len(t.primes):
        raise RingError("level beyond table range")
    return RingPoly(p.params, t.inverse(p.residues, p.rows), COEFF, p.level)


def poly_mul(a: RingPoly, b: RingPoly, t: NttTables) -> RingPoly:
    _check_compat(a, b, domain=EVAL)
    return RingPoly(a.params, t.mul(a.residues, b.residues, a.rows), EVAL, a.level)


def poly_add(a: RingPoly, b: RingPoly, t: NttTables) -> RingPoly:
    _check_compat(a, b)
    return RingPoly(a.params, t.add(a.residues, b.residues, a.rows), a.domain, a.level)


def poly_sub(a: RingPoly, b: RingPoly, t: NttTables) -> RingPoly:
    _check_compat(a, b)
    return RingPoly(a.params, t.sub(a.residues, b.residues, a.rows), a.domain, a.level)


def poly_neg(a: RingPoly, t: NttTables) -> RingPoly:
    return RingPoly(a.params, t.neg(a.residues, a.rows), a.domain, a.level)


def drop_level(a: RingPoly) -> RingPoly:
    """Discard the top residue row (modulus switching support)."""
    if a.level < 2:
        raise RingError("already at level 1, cannot drop further")
    return RingPoly(a.params, a.residues[:-1].copy(), a.domain, a.level - 1)


def from_signed_coeffs(params: RingParams, coeffs: np.ndarray, t: NttTables,
                       level: int | None = None) -> RingPoly:
    level = params.level_count if level is None else level
    rows = np.arange(level)
    return RingPoly(params, t.reduce_signed(coeffs, rows), COEFF, level)


# -- randomness: every sampler takes an explicit np.random.Generator --

def sample_ternary(params: RingParams, rng: np.random.Generator, t: NttTables,
                   level: int | None = None) -> RingPoly:
    coeffs = rng.integers(-1, 2, size=params.n, dtype=np.int64)
    return from_signed_coeffs(params, coeffs, t, level)


def sample_gaussian(params: RingParams, stddev: float, rng: np.random.Generator,
                    t: NttTables, level: int | None = None) -> RingPoly:
    if stddev <= 0:
        raise RingError("gaussian stddev must be positive")
    coeffs = np.rint(rng.normal(0.0, stddev, size=params.n)).astype(np.int64)
    return from_signed_coeffs(params, coeffs, t, level)


def sample_uniform(params: RingParams, rng: np.random.Generator,
                   level: int | None = None) -> RingPoly:
    level = params.level_count if level is None else level
    res = np.empty((level, params.n), dtype=U64)
    for i in range(level):
        res[i] = rng.integers(0, params.moduli[i], size=params.n, dtype=np.uint64)
    return RingPoly(params, res, COEFF, level)
