"""Vectorized modular arithmetic and negacyclic NTTs over a stack of primes.

All residue data lives in numpy uint64 arrays of shape (rows, n), one row per
prime.  Multiplication uses Montgomery reduction built from 32-bit limb
products, so primes up to 62 bits are supported without arbitrary-precision
integers in the hot loops.
"""

from __future__ import annotations

import numpy as np

U64 = np.uint64
_MASK32 = U64(0xFFFFFFFF)
_S32 = U64(32)


def is_prime(p: int) -> bool:
    from sympy import isprime

    return bool(isprime(int(p)))


def find_ntt_primes(n: int, bits: int, count: int, skip: tuple[int, ...] = (),
                    above_only: bool = False) -> list[int]:
    """Find `count` distinct primes ~2**bits with p ≡ 1 (mod 2n).

    Candidates alternate above/below 2**bits so that products of the found
    primes stay close to 2**(bits*count); with above_only every candidate
    sits strictly above 2**bits (one extra bit of length).
    """
    if bits < (2 * n).bit_length():
        raise ValueError(f"cannot have p ≡ 1 mod {2*n} with only {bits} bits")
    step = 2 * n
    center = 1 << bits
    found: list[int] = []
    k = 1
    while len(found) < count:
        cands = (center + k * step + 1,) if above_only else (
            center + k * step + 1, center - k * step + 1)
        for cand in cands:
            if len(found) >= count:
                break
            if cand.bit_length() > 62 or cand <= step:
                continue
            if cand in skip or cand in found:
                continue
            if is_prime(cand):
                found.append(cand)
        k += 1
        if k > 100_000:
            raise RuntimeError(f"no NTT primes near 2^{bits} for n={n}")
    return found


def _mulhi(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """High 64 bits of the 128-bit product of uint64 arrays."""
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    t = a_lo * b_lo
    w = a_hi * b_lo + (t >> _S32)
    u = a_lo * b_hi + (w & _MASK32)
    return a_hi * b_hi + (w >> _S32) + (u >> _S32)


def _mont_mul_raw(a, b, p, ninv):
    """Montgomery product; p and ninv must broadcast against a*b."""
    lo = a * b
    hi = _mulhi(a, b)
    m = lo * ninv
    t = hi + _mulhi(m, p) + (lo != 0).astype(U64)
    return np.where(t >= p, t - p, t)


def _shoup_mul_lazy(x, w, w_shoup, p):
    """x*w mod p up to one extra p: result in [0, 2p). Any x < 2^64, w < p."""
    q = _mulhi(x, w_shoup)
    return x * w - q * p


def _bit_reverse_perm(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


class NttTables:
    """Precomputed roots, twiddles and Montgomery constants for a prime stack.

    Rows are selected with an integer index array so the same tables serve
    both the modulus chain and any appended key-switching primes.
    """

    def __init__(self, n: int, primes: list[int]):
        if n < 8 or n & (n - 1):
            raise ValueError("ring degree must be a power of two, n >= 8")
        for p in primes:
            if p % (2 * n) != 1:
                raise ValueError(f"prime {p} is not 1 mod 2n")
            if p.bit_length() > 62:
                raise ValueError(f"prime {p} exceeds 62 bits")
        if len(set(primes)) != len(primes):
            raise ValueError("primes must be pairwise distinct")
        self.n = n
        self.primes = list(primes)
        k = len(primes)

        self.p = np.array(primes, dtype=U64).reshape(k, 1)
        self.ninv = np.array(
            [(-pow(p, -1, 1 << 64)) % (1 << 64) for p in primes], dtype=U64
        ).reshape(k, 1)
        self.r2 = np.array([(1 << 128) % p for p in primes], dtype=U64).reshape(k, 1)

        self.psi = [self._find_psi(p, n) for p in primes]
        self._bitrev = _bit_reverse_perm(n)

        # Twist vectors psi^i (and psi^-i * n^-1 for the inverse), with Shoup
        # companions floor(w * 2^64 / p) for fast constant multiplication.
        psi_rows = []
        unpsi_rows = []
        for p, psi in zip(primes, self.psi):
            inv_psi = pow(psi, -1, p)
            n_inv = pow(n, -1, p)
            psi_rows.append([pow(psi, i, p) for i in range(n)])
            unpsi_rows.append([pow(inv_psi, i, p) * n_inv % p for i in range(n)])
        self._psi_pows = self._with_shoup(np.array(psi_rows, dtype=U64))
        self._unpsi_pows = self._with_shoup(np.array(unpsi_rows, dtype=U64))

        # Per-stage cyclic twiddles for omega = psi^2 (order n), DIT layout.
        logn = n.bit_length() - 1
        self._stage_tw = []
        self._stage_tw_inv = []
        for s in range(1, logn + 1):
            m = 1 << s
            half = m // 2
            tw = np.empty((k, half), dtype=U64)
            twi = np.empty((k, half), dtype=U64)
            for r, (p, psi) in enumerate(zip(primes, self.psi)):
                w = pow(psi, 2 * (n // m), p)
                w_inv = pow(w, -1, p)
                acc = 1
                acci = 1
                for j in range(half):
                    tw[r, j] = acc
                    twi[r, j] = acci
                    acc = acc * w % p
                    acci = acci * w_inv % p
            self._stage_tw.append(self._with_shoup(tw))
            self._stage_tw_inv.append(self._with_shoup(twi))

    def _with_shoup(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        shoup = np.empty_like(w)
        for r in range(w.shape[0]):
            p = self.primes[r]
            shoup[r] = np.array([(int(x) << 64) // p for x in w[r]], dtype=U64)
        return w, shoup

    @staticmethod
    def _find_psi(p: int, n: int) -> int:
        """Primitive 2n-th root of unity mod p."""
        order = p - 1
        for g in range(2, 10_000):
            psi = pow(g, order // (2 * n), p)
            if pow(psi, n, p) == p - 1:
                return psi
        raise RuntimeError(f"no 2n-th root of unity mod {p}")

    # -- elementwise modular ops; `rows` is an int array of prime indices --

    def mont_mul(self, a, b, rows) -> np.ndarray:
        return _mont_mul_raw(a, b, self.p[rows], self.ninv[rows])

    def mul(self, a, b, rows) -> np.ndarray:
        """Standard-form modular product a*b mod p."""
        t = self.mont_mul(a, b, rows)
        return _mont_mul_raw(t, np.broadcast_to(self.r2[rows], t.shape), self.p[rows], self.ninv[rows])

    def add(self, a, b, rows) -> np.ndarray:
        p = self.p[rows]
        t = a + b
        return np.where(t >= p, t - p, t)

    def sub(self, a, b, rows) -> np.ndarray:
        p = self.p[rows]
        t = a + (p - b)
        return np.where(t >= p, t - p, t)

    def neg(self, a, rows) -> np.ndarray:
        p = self.p[rows]
        return np.where(a == 0, a, p - a)

    def reduce_signed(self, vals: np.ndarray, rows) -> np.ndarray:
        """Map a signed int64 coefficient vector into residues, shape (len(rows), n)."""
        vals = np.atleast_2d(np.asarray(vals, dtype=np.int64))
        p = self.p[rows].astype(np.int64)
        return np.mod(vals, p).astype(U64)

    def scalar_mul(self, a, scalars: list[int], rows) -> np.ndarray:
        """Multiply row i by scalars[i] mod its prime."""
        rows = np.atleast_1d(rows)
        s = np.array(
            [scalars[i] % self.primes[r] for i, r in enumerate(rows)], dtype=U64
        ).reshape(-1, 1)
        return self.mul(a, np.broadcast_to(s, a.shape), rows)

    def center(self, a: np.ndarray, rows) -> np.ndarray:
        """Signed representatives in [-p/2, p/2] as int64 (primes < 2^62)."""
        p = self.p[rows]
        half = p >> U64(1)
        out = a.astype(np.int64)
        return np.where(a > half, out - p.astype(np.int64), out)

    # -- transforms: input/output shape (len(rows), n) --

    def forward(self, a: np.ndarray, rows) -> np.ndarray:
        """Negacyclic NTT: coefficients -> evaluations at psi^(2k+1), natural k."""
        rows = np.atleast_1d(rows)
        pw, psh = self._psi_pows
        p2 = self.p[rows]
        x = _shoup_mul_lazy(a, pw[rows], psh[rows], p2)
        x = x[:, self._bitrev]
        x = self._fft(x, rows, self._stage_tw)
        x = np.where(x >= (p2 << U64(1)), x - (p2 << U64(1)), x)
        return np.where(x >= p2, x - p2, x)

    def inverse(self, a: np.ndarray, rows) -> np.ndarray:
        rows = np.atleast_1d(rows)
        x = a[:, self._bitrev]
        x = self._fft(x, rows, self._stage_tw_inv)
        uw, ush = self._unpsi_pows
        p2 = self.p[rows]
        x = _shoup_mul_lazy(x, uw[rows], ush[rows], p2)
        return np.where(x >= p2, x - p2, x)

    def _fft(self, x: np.ndarray, rows, stage_tables) -> np.ndarray:
        """Lazy radix-2 DIT stages: values stay in [0, 4p) between stages."""
        n = self.n
        k = x.shape[0]
        p3 = self.p[rows].reshape(k, 1, 1)
        twop3 = p3 << U64(1)
        for s, (tw, tw_shoup) in enumerate(stage_tables, start=1):
            m = 1 << s
            half = m // 2
            x = x.reshape(k, n // m, m)
            u = x[:, :, :half]
            u = np.where(u >= twop3, u - twop3, u)
            v = _shoup_mul_lazy(x[:, :, half:], tw[rows][:, None, :], tw_shoup[rows][:, None, :], p3)
            x = np.concatenate((u + v, u + (twop3 - v)), axis=2)
        return x.reshape(k, n)
