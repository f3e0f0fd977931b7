"""Leveled CKKS over the RNS ring: encoding, keys, and homomorphic ops.

Scale management is exact: every ciphertext carries the true scale it was
computed at, and plaintext operands are encoded at whatever scale makes the
result land where the caller wants it.  The noise budget is a tracked
estimate (modulus bits minus scale bits minus per-operation charges), not a
cryptographic measurement.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import ring
from .ntt import NttTables, U64, find_ntt_primes
from .ring import COEFF, EVAL, RingParams, RingPoly

NOISE_FRESH = 8.0       # charge on a fresh encryption
NOISE_ADD = 0.1         # per homomorphic addition
NOISE_KEYSWITCH = 0.5   # per relinearization / rotation hop
NOISE_PTMUL = 0.5       # per plaintext multiplication
NOISE_DECODE = 2.0      # decode/rounding charge, used in stage reporting


class CkksError(Exception):
    pass


class LevelExhausted(CkksError):
    """No levels left for the requested multiplicative operation."""


class ScaleMismatch(CkksError):
    pass


class KeyError_(CkksError):
    """Missing rotation key or wrong key material."""


@dataclass(frozen=True)
class CkksParams:
    ring: RingParams
    special_modulus: int
    delta: float = 2.0**20
    # Noise profile tuned for precision at delta = 2^20: slot error scales
    # with sqrt(n/2) times the coefficient noise, so both the error width and
    # the secret weight are kept small.  Not a hardened configuration.
    error_stddev: float = 0.25
    secret_weight: int = 8
    security_label: str = "toy"

    def __post_init__(self):
        if self.delta < 2**10:
            raise CkksError("delta must be at least 2^10")
        if not 0 < self.secret_weight <= self.ring.n:
            raise CkksError("secret weight must be in (0, n]")
        if self.error_stddev <= 0:
            raise CkksError("error stddev must be positive")
        for q in self.ring.moduli[:-1]:
            if math.log2(self.delta) >= q.bit_length():
                raise CkksError("log2(delta) must stay below every non-top modulus size")
        if self.special_modulus in self.ring.moduli:
            raise CkksError("special modulus must differ from the chain moduli")

    @property
    def slots(self) -> int:
        return self.ring.n // 2

    @property
    def level_count(self) -> int:
        return self.ring.level_count

    def digest(self) -> bytes:
        blob = "|".join(
            [str(self.ring.n)]
            + [str(q) for q in self.ring.moduli]
            + [str(self.special_modulus), repr(self.delta)]
        ).encode()
        return hashlib.sha256(blob).digest()


@lru_cache(maxsize=8)
def _profile_primes(n: int, pattern: tuple[int, ...], special_bits: int) -> tuple[tuple[int, ...], int]:
    primes: list[int] = []
    for bits in pattern:
        # middle primes sit just above delta so rescale keeps the scale sane
        above = bits <= 24
        primes += find_ntt_primes(n, bits, 1, skip=tuple(primes), above_only=above)
    special = find_ntt_primes(n, special_bits, 1, skip=tuple(primes))[0]
    return tuple(primes), special


def desk_params(delta: float = 2.0**20) -> CkksParams:
    """Small profile for tests and CI: n=8192, depth-3 chain."""
    primes, special = _profile_primes(8192, (56, 20, 20, 20), 60)
    return CkksParams(RingParams(8192, primes), special, delta=delta)


def paper_scale_params(delta: float = 2.0**20) -> CkksParams:
    """Large profile: n=32768, depth-3 chain with a two-prime base."""
    primes, special = _profile_primes(32768, (45, 45, 20, 20, 20), 60)
    return CkksParams(RingParams(32768, primes), special, delta=delta)


@dataclass
class Plaintext:
    poly: RingPoly  # coefficient domain
    scale: float
    level: int
    slot_count: int


@dataclass
class SecretKey:
    coeffs: np.ndarray          # ternary, int64, length n
    s_eval: RingPoly            # NTT form over the full chain


@dataclass
class PublicKey:
    b: RingPoly
    a: RingPoly


@dataclass
class KeySwitchKey:
    """Per-digit RLWE encryptions of P * g_j * s' over the extended basis."""

    b: np.ndarray  # (digits, level_count+1, n) uint64, eval domain
    a: np.ndarray


@dataclass
class RelinKey:
    ksk: KeySwitchKey


@dataclass
class RotationKeys:
    steps: dict[int, KeySwitchKey]   # rotation step -> key
    galois: dict[int, int]           # rotation step -> automorphism exponent


@dataclass
class Ciphertext:
    parts: tuple[RingPoly, ...]
    scale: float
    level: int
    noise_bits_estimate: float

    def __post_init__(self):
        if len(self.parts) not in (2, 3):
            raise CkksError("ciphertexts have 2 parts (3 transiently before relinearization)")


class CkksEngine:
    """Holds the NTT tables and implements the scheme operations.

    Immutable after construction; safe to share across threads.  Encryption
    and key generation take an explicit numpy Generator.
    """

    def __init__(self, params: CkksParams):
        self.params = params
        self.ring_params = params.ring
        self.n = params.ring.n
        self.slots = params.slots
        self.L = params.ring.level_count
        self.moduli = params.ring.moduli
        self.special = params.special_modulus
        self.tables = NttTables(self.n, list(self.moduli) + [self.special])
        self._sp_row = self.L  # row index of the special prime in the tables

        self._p_mod_q = [self.special % q for q in self.moduli]
        self._p_inv_q = [pow(self.special, -1, q) for q in self.moduli]
        self._q_inv = [
            [pow(self.moduli[top], -1, self.moduli[i]) for i in range(top)]
            for top in range(self.L)
        ]

        # slot <-> evaluation-point bookkeeping for the canonical embedding
        n = self.n
        two_n = 2 * n
        g = 1
        self._slot_to_eval = np.empty(self.slots, dtype=np.int64)
        for j in range(self.slots):
            self._slot_to_eval[j] = (g - 1) // 2
            g = (g * 5) % two_n
        self._zeta_pows = np.exp(1j * np.pi * np.arange(n) / n)
        self._auto_perm_cache: dict[int, np.ndarray] = {}
        # cumulative log2 of the chain moduli, indexed by level
        self._mod_bits = [0.0]
        for q in self.moduli:
            self._mod_bits.append(self._mod_bits[-1] + math.log2(q))

    # ---------------- encoding ----------------

    def encode(self, values, scale: float, level: int | None = None) -> Plaintext:
        level = self.L if level is None else level
        values = np.asarray(values)
        if values.ndim != 1:
            raise CkksError("encode expects a 1-D vector")
        if len(values) > self.slots:
            raise CkksError(f"too many values: {len(values)} > {self.slots} slots")
        if not np.all(np.isfinite(values)):
            raise CkksError("encode requires finite inputs")
        if scale <= 0:
            raise CkksError("scale must be positive")
        z = np.zeros(self.slots, dtype=np.complex128)
        z[: len(values)] = values
        ev = np.zeros(self.n, dtype=np.complex128)
        ev[self._slot_to_eval] = z
        ev[self.n - 1 - self._slot_to_eval] = np.conj(z)
        t = np.fft.fft(ev) / self.n
        m = (t * np.conj(self._zeta_pows)).real
        coeffs = np.rint(m * scale)
        if np.max(np.abs(coeffs), initial=0.0) >= 2**62:
            raise CkksError("encoded coefficients overflow 62 bits; lower the scale")
        poly = ring.from_signed_coeffs(self.ring_params, coeffs.astype(np.int64), self.tables, level)
        return Plaintext(poly, float(scale), level, len(values))

    def decode(self, pt: Plaintext) -> np.ndarray:
        """Slot values as complex128; real payloads live in the real part."""
        if pt.poly.domain != COEFF:
            raise CkksError("decode expects a coefficient-domain plaintext")
        base = self.tables.center(pt.poly.residues[:1], np.array([0]))[0]
        t = base.astype(np.float64) * self._zeta_pows
        ev = self.n * np.fft.ifft(t)
        return ev[self._slot_to_eval] / pt.scale

    def encode_like(self, ct: Ciphertext, values) -> Plaintext:
        return self.encode(values, ct.scale, ct.level)

    # ---------------- key generation ----------------

    def _sparse_ternary(self, rng: np.random.Generator) -> np.ndarray:
        coeffs = np.zeros(self.n, dtype=np.int64)
        pos = rng.choice(self.n, size=self.params.secret_weight, replace=False)
        coeffs[pos] = rng.choice(np.array([-1, 1], dtype=np.int64), size=len(pos))
        return coeffs

    def keygen(self, rng: np.random.Generator, rot_steps: tuple[int, ...] | None = None):
        sk_coeffs = self._sparse_ternary(rng)
        s_poly = ring.from_signed_coeffs(self.ring_params, sk_coeffs, self.tables)
        sk = SecretKey(sk_coeffs, ring.ntt_forward(s_poly, self.tables))

        a = self._uniform_eval(rng, self.rows_at(self.L))
        e = self._gauss_eval(rng, self.rows_at(self.L))
        b = self.tables.add(self.tables.neg(self.tables.mul(a, sk.s_eval.residues, self.rows_at(self.L)), self.rows_at(self.L)), e, self.rows_at(self.L))
        pk = PublicKey(
            RingPoly(self.ring_params, b, EVAL, self.L),
            RingPoly(self.ring_params, a, EVAL, self.L),
        )

        s2 = self.tables.mul(sk.s_eval.residues, sk.s_eval.residues, self.rows_at(self.L))
        s2_ext = self._extend_eval_from_chain(s2, sk_coeffs, square=True)
        rlk = RelinKey(self._make_ksk(s2_ext, sk, rng))

        if rot_steps is None:
            rot_steps = tuple(1 << i for i in range((self.slots).bit_length() - 1))
        steps = {}
        galois = {}
        for step in rot_steps:
            g = self._galois_elt(step)
            s_rot = self._automorphism_coeffs(sk_coeffs, g)
            s_rot_ext = self._eval_ext_from_coeffs(s_rot)
            steps[step] = self._make_ksk(s_rot_ext, sk, rng)
            galois[step] = g
        rotk = RotationKeys(steps, galois)
        return sk, pk, rlk, rotk

    def rows_at(self, level: int) -> np.ndarray:
        return np.arange(level)

    def ext_rows_at(self, level: int) -> np.ndarray:
        return np.array(list(range(level)) + [self._sp_row])

    def _uniform_eval(self, rng, rows) -> np.ndarray:
        out = np.empty((len(rows), self.n), dtype=U64)
        for i, r in enumerate(rows):
            out[i] = rng.integers(0, self.tables.primes[r], size=self.n, dtype=np.uint64)
        return out

    def _gauss_eval(self, rng, rows) -> np.ndarray:
        coeffs = np.rint(rng.normal(0.0, self.params.error_stddev, size=self.n)).astype(np.int64)
        return self.tables.forward(self.tables.reduce_signed(coeffs, rows), rows)

    def _eval_ext_from_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        rows = self.ext_rows_at(self.L)
        return self.tables.forward(self.tables.reduce_signed(coeffs, rows), rows)

    def _extend_eval_from_chain(self, chain_eval: np.ndarray, sk_coeffs, square: bool) -> np.ndarray:
        """Extended-basis eval form of s^2, recomputed from the secret coefficients."""
        rows = self.ext_rows_at(self.L)
        s_ext = self.tables.forward(self.tables.reduce_signed(sk_coeffs, rows), rows)
        return self.tables.mul(s_ext, s_ext, rows)

    def _make_ksk(self, target_ext_eval: np.ndarray, sk: SecretKey, rng) -> KeySwitchKey:
        """Digit j encrypts (P mod q_j) * target on row j (and nothing on others)."""
        rows = self.ext_rows_at(self.L)
        s_ext = self.tables.forward(self.tables.reduce_signed(sk.coeffs, rows), rows)
        b_mat = np.empty((self.L, self.L + 1, self.n), dtype=U64)
        a_mat = np.empty((self.L, self.L + 1, self.n), dtype=U64)
        for j in range(self.L):
            a = self._uniform_eval(rng, rows)
            e = self._gauss_eval(rng, rows)
            b = self.tables.add(
                self.tables.neg(self.tables.mul(a, s_ext, rows), rows), e, rows
            )
            lifted = self.tables.mul(
                target_ext_eval[j : j + 1],
                np.full((1, self.n), self._p_mod_q[j] % self.moduli[j], dtype=U64),
                np.array([j]),
            )
            b[j] = self.tables.add(b[j], lifted[0], np.array([j]))
            b_mat[j] = b
            a_mat[j] = a
        return KeySwitchKey(b_mat, a_mat)

    # ---------------- encryption ----------------

    def fresh_budget(self, level: int, scale: float) -> float:
        return self._mod_bits[level] - math.log2(scale) - NOISE_FRESH

    def _charges(self, ct: Ciphertext) -> float:
        """Accumulated noise charges implied by the stored budget."""
        return self._mod_bits[ct.level] - math.log2(ct.scale) - ct.noise_bits_estimate

    def _budget(self, level: int, scale: float, charges: float) -> float:
        return self._mod_bits[level] - math.log2(scale) - charges

    def encrypt(self, pt: Plaintext, pk: PublicKey, rng: np.random.Generator) -> Ciphertext:
        lev = pt.level
        rows = self.rows_at(lev)
        u = self.tables.forward(
            self.tables.reduce_signed(self._sparse_ternary(rng), rows), rows
        )
        e0 = self.tables.reduce_signed(
            np.rint(rng.normal(0, self.params.error_stddev, self.n)).astype(np.int64), rows
        )
        m_plus_e0 = self.tables.forward(
            self.tables.add(pt.poly.residues[:lev], e0, rows), rows
        )
        e1 = self._gauss_eval(rng, rows)
        c0 = self.tables.add(self.tables.mul(u, pk.b.residues[:lev], rows), m_plus_e0, rows)
        c1 = self.tables.add(self.tables.mul(u, pk.a.residues[:lev], rows), e1, rows)
        return Ciphertext(
            (
                RingPoly(self.ring_params, c0, EVAL, lev),
                RingPoly(self.ring_params, c1, EVAL, lev),
            ),
            pt.scale,
            lev,
            self.fresh_budget(lev, pt.scale),
        )

    def decrypt(self, ct: Ciphertext, sk: SecretKey) -> Plaintext:
        if len(ct.parts) != 2:
            raise CkksError("relinearize before decrypting a 3-part ciphertext")
        rows = self.rows_at(ct.level)
        m = self.tables.add(
            ct.parts[0].residues,
            self.tables.mul(ct.parts[1].residues, sk.s_eval.residues[: ct.level], rows),
            rows,
        )
        poly = RingPoly(self.ring_params, self.tables.inverse(m, rows), COEFF, ct.level)
        return Plaintext(poly, ct.scale, ct.level, self.slots)

    # ---------------- homomorphic ops ----------------

    def _check_add_compat(self, a: Ciphertext, b_scale: float, b_level: int):
        if a.level != b_level:
            raise CkksError(f"level mismatch: {a.level} vs {b_level}")
        if abs(a.scale - b_scale) > 2.0**-30 * max(a.scale, b_scale):
            raise ScaleMismatch(f"scale mismatch: {a.scale} vs {b_scale}")

    def he_add(self, a: Ciphertext, b: Ciphertext | Plaintext) -> Ciphertext:
        if isinstance(b, Plaintext):
            self._check_add_compat(a, b.scale, b.level)
            rows = self.rows_at(a.level)
            pt_eval = self.tables.forward(b.poly.residues[: a.level], rows)
            c0 = self.tables.add(a.parts[0].residues, pt_eval, rows)
            parts = (RingPoly(self.ring_params, c0, EVAL, a.level),) + a.parts[1:]
            return Ciphertext(parts, a.scale, a.level, a.noise_bits_estimate - NOISE_ADD)
        self._check_add_compat(a, b.scale, b.level)
        rows = self.rows_at(a.level)
        parts = tuple(
            RingPoly(self.ring_params, self.tables.add(x.residues, y.residues, rows), EVAL, a.level)
            for x, y in zip(a.parts, b.parts)
        )
        budget = min(a.noise_bits_estimate, b.noise_bits_estimate) - NOISE_ADD
        return Ciphertext(parts, a.scale, a.level, budget)

    def he_sub(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        return self.he_add(a, self.negate(b))

    def negate(self, a: Ciphertext) -> Ciphertext:
        rows = self.rows_at(a.level)
        parts = tuple(
            RingPoly(self.ring_params, self.tables.neg(x.residues, rows), EVAL, a.level)
            for x in a.parts
        )
        return Ciphertext(parts, a.scale, a.level, a.noise_bits_estimate)

    def he_mul(self, a: Ciphertext, b: Ciphertext | Plaintext, rlk: RelinKey | None = None) -> Ciphertext:
        if isinstance(b, Plaintext):
            return self.ptmul(a, b)
        if a.level != b.level:
            raise CkksError(f"level mismatch: {a.level} vs {b.level}")
        if a.level < 2:
            raise LevelExhausted("no level left for ciphertext multiplication")
        if rlk is None:
            raise CkksError("ciphertext-ciphertext multiply requires a relinearization key")
        rows = self.rows_at(a.level)
        a0, a1 = a.parts[0].residues, a.parts[1].residues
        b0, b1 = b.parts[0].residues, b.parts[1].residues
        d0 = self.tables.mul(a0, b0, rows)
        d1 = self.tables.add(self.tables.mul(a0, b1, rows), self.tables.mul(a1, b0, rows), rows)
        d2 = self.tables.mul(a1, b1, rows)
        k0, k1 = self._keyswitch(d2, rlk.ksk, a.level)
        c0 = self.tables.add(d0, k0, rows)
        c1 = self.tables.add(d1, k1, rows)
        charges = max(self._charges(a), self._charges(b)) + NOISE_KEYSWITCH
        ct = Ciphertext(
            (
                RingPoly(self.ring_params, c0, EVAL, a.level),
                RingPoly(self.ring_params, c1, EVAL, a.level),
            ),
            a.scale * b.scale,
            a.level,
            0.0,
        )
        ct = self.rescale(ct)
        ct.noise_bits_estimate = self._budget(ct.level, ct.scale, charges)
        return ct

    def ptmul(self, a: Ciphertext, pt: Plaintext, rescale: bool = True) -> Ciphertext:
        if a.level != pt.level:
            raise CkksError(f"level mismatch: {a.level} vs {pt.level}")
        if rescale and a.level < 2:
            raise LevelExhausted("no level left for plaintext multiplication")
        rows = self.rows_at(a.level)
        pt_eval = self.tables.forward(pt.poly.residues[: a.level], rows)
        parts = tuple(
            RingPoly(self.ring_params, self.tables.mul(x.residues, pt_eval, rows), EVAL, a.level)
            for x in a.parts
        )
        charges = self._charges(a) + NOISE_PTMUL
        ct = Ciphertext(parts, a.scale * pt.scale, a.level, 0.0)
        if rescale:
            ct = self.rescale(ct)
        ct.noise_bits_estimate = self._budget(ct.level, ct.scale, charges)
        return ct

    def ptmul_to(self, a: Ciphertext, values, target_scale: float) -> Ciphertext:
        """Multiply by a vector encoded so the rescaled result has target_scale."""
        q_top = self.moduli[a.level - 1]
        pt = self.encode(values, target_scale * q_top / a.scale, a.level)
        return self.ptmul(a, pt)

    def adjust_scale(self, a: Ciphertext, target_scale: float) -> Ciphertext:
        """Scale-correcting multiply by 1; consumes one level."""
        return self.ptmul_to(a, np.ones(self.slots), target_scale)

    def rescale(self, ct: Ciphertext) -> Ciphertext:
        if ct.level < 2:
            raise LevelExhausted("cannot rescale at level 1")
        lev = ct.level
        q_top = self.moduli[lev - 1]
        rows_new = self.rows_at(lev - 1)
        inv = self._q_inv[lev - 1]
        new_parts = []
        for part in ct.parts:
            top = self.tables.inverse(part.residues[lev - 1 : lev], np.array([lev - 1]))
            centered = self.tables.center(top, np.array([lev - 1]))[0]
            corr = self.tables.forward(self.tables.reduce_signed(centered, rows_new), rows_new)
            diff = self.tables.sub(part.residues[: lev - 1], corr, rows_new)
            scaled = self.tables.scalar_mul(diff, inv, rows_new)
            new_parts.append(RingPoly(self.ring_params, scaled, EVAL, lev - 1))
        return Ciphertext(tuple(new_parts), ct.scale / q_top, lev - 1, ct.noise_bits_estimate)

    def mod_switch(self, ct: Ciphertext) -> Ciphertext:
        """Drop the top modulus without dividing; scale is unchanged."""
        parts = tuple(
            RingPoly(self.ring_params, p.residues[:-1].copy(), EVAL, ct.level - 1)
            for p in ct.parts
        )
        if ct.level < 2:
            raise LevelExhausted("cannot drop below level 1")
        budget = ct.noise_bits_estimate - math.log2(self.moduli[ct.level - 1])
        return Ciphertext(parts, ct.scale, ct.level - 1, budget)

    def _keyswitch(self, d: np.ndarray, ksk: KeySwitchKey, level: int):
        """Switch eval-domain poly d (under s') to the key's base secret."""
        rows = self.rows_at(level)
        ext = self.ext_rows_at(level)
        n_ext = len(ext)
        dc = self.tables.inverse(d, rows)

        digit_stack = np.empty((level * n_ext, self.n), dtype=U64)
        row_stack = np.tile(ext, level)
        for j in range(level):
            centered = self.tables.center(dc[j : j + 1], np.array([j]))[0]
            digit_stack[j * n_ext : (j + 1) * n_ext] = self.tables.reduce_signed(centered, ext)
        digits_eval = self.tables.forward(digit_stack, row_stack).reshape(level, n_ext, self.n)

        sel = list(range(level)) + [self.L]
        acc0 = self._digit_accum(digits_eval, ksk.b[:level][:, sel], ext)
        acc1 = self._digit_accum(digits_eval, ksk.a[:level][:, sel], ext)
        return self._div_by_special(acc0, acc1, level)

    def _digit_accum(self, digits_eval, key_mat, ext):
        level, n_ext, n = digits_eval.shape
        flat_rows = np.tile(ext, level)
        prod = self.tables.mul(
            digits_eval.reshape(level * n_ext, n), key_mat.reshape(level * n_ext, n), flat_rows
        ).reshape(level, n_ext, n)
        total = prod.sum(axis=0, dtype=np.uint64)  # < level * p < 2^64
        p = self.tables.p[ext]
        return total % p

    def _div_by_special(self, acc0, acc1, level):
        rows = self.rows_at(level)
        sp = np.array([self._sp_row])
        out = []
        for acc in (acc0, acc1):
            top = self.tables.inverse(acc[-1:], sp)
            centered = self.tables.center(top, sp)[0]
            corr = self.tables.forward(self.tables.reduce_signed(centered, rows), rows)
            diff = self.tables.sub(acc[:-1], corr, rows)
            out.append(self.tables.scalar_mul(diff, self._p_inv_q[:level], rows))
        return out[0], out[1]

    # ---------------- rotations ----------------

    def _galois_elt(self, step: int) -> int:
        return pow(5, step, 2 * self.n)

    def _auto_perm(self, g: int) -> np.ndarray:
        if g not in self._auto_perm_cache:
            k = np.arange(self.n, dtype=np.int64)
            src_exp = ((2 * k + 1) * g) % (2 * self.n)
            self._auto_perm_cache[g] = (src_exp - 1) // 2
        return self._auto_perm_cache[g]

    def _automorphism_coeffs(self, coeffs: np.ndarray, g: int) -> np.ndarray:
        out = np.zeros_like(coeffs)
        idx = (np.arange(self.n, dtype=np.int64) * g) % (2 * self.n)
        wrap = idx >= self.n
        pos = np.where(wrap, idx - self.n, idx)
        np.add.at(out, pos, np.where(wrap, -coeffs, coeffs))
        return out

    def he_rotate(self, ct: Ciphertext, k: int, rotk: RotationKeys) -> Ciphertext:
        k = k % self.slots
        if k == 0:
            return Ciphertext(tuple(p.copy() for p in ct.parts), ct.scale, ct.level, ct.noise_bits_estimate)
        out = ct
        for step in sorted(rotk.steps, reverse=True):
            while k >= step:
                out = self._rotate_once(out, step, rotk)
                k -= step
        if k != 0:
            raise KeyError_(f"cannot decompose rotation into available steps (left over {k})")
        return out

    def _rotate_once(self, ct: Ciphertext, step: int, rotk: RotationKeys) -> Ciphertext:
        if step not in rotk.steps:
            raise KeyError_(f"missing rotation key for step {step}")
        g = rotk.galois[step]
        perm = self._auto_perm(g)
        rows = self.rows_at(ct.level)
        c0p = ct.parts[0].residues[:, perm]
        c1p = ct.parts[1].residues[:, perm]
        k0, k1 = self._keyswitch(c1p, rotk.steps[step], ct.level)
        c0 = self.tables.add(c0p, k0, rows)
        return Ciphertext(
            (
                RingPoly(self.ring_params, c0, EVAL, ct.level),
                RingPoly(self.ring_params, k1, EVAL, ct.level),
            ),
            ct.scale,
            ct.level,
            ct.noise_bits_estimate - NOISE_KEYSWITCH,
        )

    # ---------------- noise ----------------

    def noise_budget(self, ct: Ciphertext) -> float:
        return max(0.0, ct.noise_bits_estimate)
