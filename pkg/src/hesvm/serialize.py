"""Binary serialization for keys and ciphertexts.

Layout: magic "PPFT", format version u8, object kind u8, SHA-256 parameter
digest (32 bytes), then little-endian u64 lengths followed by residue data as
little-endian u64 words.  Scales are IEEE-754 doubles.
"""

from __future__ import annotations

import struct

import numpy as np

from .ckks import (
    Ciphertext,
    CkksEngine,
    KeySwitchKey,
    PublicKey,
    RelinKey,
    RotationKeys,
    SecretKey,
)
from .ring import EVAL, RingPoly

MAGIC = b"PPFT"
VERSION = 1

KIND_PK = 1
KIND_SK = 2
KIND_RLK = 3
KIND_ROTK = 4
KIND_CT = 5

_KIND_NAMES = {KIND_PK: "pk", KIND_SK: "sk", KIND_RLK: "rlk", KIND_ROTK: "rotk", KIND_CT: "ct"}


class SerializeError(ValueError):
    pass


class DigestMismatch(SerializeError):
    """Object was produced under different scheme parameters."""


def _u64(x: int) -> bytes:
    return struct.pack("<Q", x)


def _f64(x: float) -> bytes:
    return struct.pack("<d", x)


def _arr_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<u8").tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.data):
            raise SerializeError("truncated input")
        out = self.data[self.pos : self.pos + k]
        self.pos += k
        return out

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def arr(self, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape))
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<u8").reshape(shape).astype(np.uint64)

    def done(self):
        if self.pos != len(self.data):
            raise SerializeError("trailing bytes after object body")


def _header(kind: int, digest: bytes) -> bytes:
    return MAGIC + bytes([VERSION, kind]) + digest


def _check_header(r: _Reader, kind: int, digest: bytes):
    if r.take(4) != MAGIC:
        raise SerializeError("bad magic bytes")
    ver = r.take(1)[0]
    if ver != VERSION:
        raise SerializeError(f"unsupported format version {ver}")
    got_kind = r.take(1)[0]
    if got_kind != kind:
        raise SerializeError(
            f"object kind mismatch: expected {_KIND_NAMES.get(kind, kind)}, "
            f"got {_KIND_NAMES.get(got_kind, got_kind)}"
        )
    if r.take(32) != digest:
        raise DigestMismatch("parameter digest mismatch")


def _write_ksk(ksk: KeySwitchKey) -> bytes:
    d, e, n = ksk.b.shape
    return b"".join([_u64(d), _u64(e), _u64(n), _arr_bytes(ksk.b), _arr_bytes(ksk.a)])


def _read_ksk(r: _Reader) -> KeySwitchKey:
    d, e, n = r.u64(), r.u64(), r.u64()
    return KeySwitchKey(r.arr((d, e, n)), r.arr((d, e, n)))


def serialize_key(key, engine: CkksEngine) -> bytes:
    digest = engine.params.digest()
    if isinstance(key, PublicKey):
        body = _u64(key.b.level) + _arr_bytes(key.b.residues) + _arr_bytes(key.a.residues)
        return _header(KIND_PK, digest) + body
    if isinstance(key, SecretKey):
        signed = (key.coeffs.astype(np.int64).view(np.uint64))
        return _header(KIND_SK, digest) + _u64(len(key.coeffs)) + _arr_bytes(signed)
    if isinstance(key, RelinKey):
        return _header(KIND_RLK, digest) + _write_ksk(key.ksk)
    if isinstance(key, RotationKeys):
        body = [_u64(len(key.steps))]
        for step in sorted(key.steps):
            body += [_u64(step), _u64(key.galois[step]), _write_ksk(key.steps[step])]
        return _header(KIND_ROTK, digest) + b"".join(body)
    raise SerializeError(f"unsupported key type {type(key).__name__}")


def deserialize_key(data: bytes, engine: CkksEngine, kind: int):
    r = _Reader(data)
    _check_header(r, kind, engine.params.digest())
    if kind == KIND_PK:
        lev = r.u64()
        b = r.arr((lev, engine.n))
        a = r.arr((lev, engine.n))
        r.done()
        return PublicKey(
            RingPoly(engine.ring_params, b, EVAL, lev),
            RingPoly(engine.ring_params, a, EVAL, lev),
        )
    if kind == KIND_SK:
        n = r.u64()
        coeffs = r.arr((n,)).view(np.int64)
        r.done()
        from . import ring as ring_mod

        poly = ring_mod.from_signed_coeffs(engine.ring_params, coeffs, engine.tables)
        return SecretKey(coeffs, ring_mod.ntt_forward(poly, engine.tables))
    if kind == KIND_RLK:
        out = RelinKey(_read_ksk(r))
        r.done()
        return out
    if kind == KIND_ROTK:
        count = r.u64()
        steps, galois = {}, {}
        for _ in range(count):
            step, g = r.u64(), r.u64()
            steps[step] = _read_ksk(r)
            galois[step] = g
        r.done()
        return RotationKeys(steps, galois)
    raise SerializeError(f"unsupported key kind {kind}")


def serialize_ct(ct: Ciphertext, engine: CkksEngine) -> bytes:
    body = [_u64(len(ct.parts)), _u64(ct.level), _f64(ct.scale), _f64(ct.noise_bits_estimate)]
    for part in ct.parts:
        body.append(_arr_bytes(part.residues))
    return _header(KIND_CT, engine.params.digest()) + b"".join(body)


def deserialize_ct(data: bytes, engine: CkksEngine) -> Ciphertext:
    r = _Reader(data)
    _check_header(r, KIND_CT, engine.params.digest())
    num_parts = r.u64()
    lev = r.u64()
    scale = r.f64()
    noise = r.f64()
    parts = tuple(
        RingPoly(engine.ring_params, r.arr((lev, engine.n)), EVAL, lev)
        for _ in range(num_parts)
    )
    r.done()
    return Ciphertext(parts, scale, lev, noise)
