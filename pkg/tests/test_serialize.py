import numpy as np
import pytest

from hesvm import serialize as ser
from hesvm.ckks import CkksEngine, CkksParams, _profile_primes
from hesvm.ring import RingParams
from hesvm.serialize import DigestMismatch, SerializeError

DELTA = 2.0**20


def fresh_ct(engine, pk, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1, 1, engine.slots)
    return v, engine.encrypt(engine.encode(v, DELTA), pk, rng)


class TestCiphertext:
    def test_roundtrip_byte_exact(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        v, ct = fresh_ct(small_engine, pk)
        blob = ser.serialize_ct(ct, small_engine)
        back = ser.deserialize_ct(blob, small_engine)
        assert ser.serialize_ct(back, small_engine) == blob
        got = small_engine.decode(small_engine.decrypt(back, sk)).real
        assert np.max(np.abs(got - v)) <= 1e-3
        assert back.scale == ct.scale
        assert back.level == ct.level

    def test_corrupted_magic(self, small_engine, small_keys):
        _, pk, _, _ = small_keys
        _, ct = fresh_ct(small_engine, pk)
        blob = bytearray(ser.serialize_ct(ct, small_engine))
        blob[0] ^= 0xFF
        with pytest.raises(SerializeError):
            ser.deserialize_ct(bytes(blob), small_engine)

    def test_truncated(self, small_engine, small_keys):
        _, pk, _, _ = small_keys
        _, ct = fresh_ct(small_engine, pk)
        blob = ser.serialize_ct(ct, small_engine)
        with pytest.raises(SerializeError):
            ser.deserialize_ct(blob[: len(blob) // 2], small_engine)

    def test_digest_mismatch(self, small_engine, small_keys):
        _, pk, _, _ = small_keys
        _, ct = fresh_ct(small_engine, pk)
        blob = ser.serialize_ct(ct, small_engine)
        primes, special = _profile_primes(2048, (44, 21, 21, 21), 50)
        other = CkksEngine(CkksParams(RingParams(2048, primes), special, delta=2.0**19))
        with pytest.raises(DigestMismatch):
            ser.deserialize_ct(blob, other)


class TestKeys:
    def test_secret_key_roundtrip(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        blob = ser.serialize_key(sk, small_engine)
        back = ser.deserialize_key(blob, small_engine, ser.KIND_SK)
        assert np.array_equal(back.coeffs, sk.coeffs)
        v, ct = fresh_ct(small_engine, pk, seed=1)
        got = small_engine.decode(small_engine.decrypt(ct, back)).real
        assert np.max(np.abs(got - v)) <= 1e-3

    def test_public_key_roundtrip(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        blob = ser.serialize_key(pk, small_engine)
        back = ser.deserialize_key(blob, small_engine, ser.KIND_PK)
        assert ser.serialize_key(back, small_engine) == blob
        rng = np.random.default_rng(2)
        v = rng.uniform(-1, 1, small_engine.slots)
        ct = small_engine.encrypt(small_engine.encode(v, DELTA), back, rng)
        got = small_engine.decode(small_engine.decrypt(ct, sk)).real
        assert np.max(np.abs(got - v)) <= 1e-3

    def test_relin_key_roundtrip_works(self, small_engine, small_keys):
        sk, pk, rlk, _ = small_keys
        back = ser.deserialize_key(ser.serialize_key(rlk, small_engine),
                                   small_engine, ser.KIND_RLK)
        rng = np.random.default_rng(3)
        v = rng.uniform(-1, 1, small_engine.slots)
        ct = small_engine.encrypt(small_engine.encode(v, DELTA), pk, rng)
        out = small_engine.he_mul(ct, ct, back)
        got = small_engine.decode(small_engine.decrypt(out, sk)).real
        assert np.max(np.abs(got - v * v)) <= 1e-2

    def test_rotation_keys_roundtrip_works(self, small_engine, small_keys):
        sk, pk, _, rotk = small_keys
        back = ser.deserialize_key(ser.serialize_key(rotk, small_engine),
                                   small_engine, ser.KIND_ROTK)
        assert set(back.steps) == set(rotk.steps)
        assert back.galois == rotk.galois
        rng = np.random.default_rng(4)
        v = rng.uniform(-1, 1, small_engine.slots)
        ct = small_engine.encrypt(small_engine.encode(v, DELTA), pk, rng)
        got = small_engine.decode(small_engine.decrypt(
            small_engine.he_rotate(ct, 1, back), sk)).real
        assert np.max(np.abs(got - np.roll(v, -1))) <= 1e-3

    def test_wrong_kind_rejected(self, small_engine, small_keys):
        _, pk, _, _ = small_keys
        blob = ser.serialize_key(pk, small_engine)
        with pytest.raises(SerializeError):
            ser.deserialize_key(blob, small_engine, ser.KIND_SK)
