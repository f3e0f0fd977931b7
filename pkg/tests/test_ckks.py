import numpy as np
import pytest

from hesvm.ckks import (
    CkksEngine,
    CkksError,
    CkksParams,
    Ciphertext,
    KeyError_,
    LevelExhausted,
    ScaleMismatch,
    _profile_primes,
    desk_params,
)
from hesvm.ring import RingParams

DELTA = 2.0**20


def rand_vec(engine, rng):
    return rng.uniform(-1, 1, engine.slots)


def enc(engine, pk, rng, v, level=None):
    return engine.encrypt(engine.encode(v, DELTA, level), pk, rng)


def dec(engine, sk, ct):
    return engine.decode(engine.decrypt(ct, sk)).real


class TestParams:
    def test_delta_must_fit_below_moduli(self):
        primes, special = _profile_primes(2048, (44, 21, 21, 21), 50)
        with pytest.raises(CkksError):
            CkksParams(RingParams(2048, primes), special, delta=2.0**25)

    def test_special_must_differ(self):
        primes, special = _profile_primes(2048, (44, 21, 21, 21), 50)
        with pytest.raises(CkksError):
            CkksParams(RingParams(2048, primes), primes[0])

    def test_desk_profile_shape(self):
        p = desk_params()
        assert p.ring.n == 8192
        assert p.slots == 4096
        assert p.level_count == 4


class TestEncode:
    def test_zeros_roundtrip_exact(self, small_engine):
        pt = small_engine.encode(np.zeros(small_engine.slots), DELTA)
        assert np.all(pt.poly.residues == 0)
        assert np.allclose(small_engine.decode(pt).real, 0.0)

    def test_roundtrip(self, small_engine):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(50):
            v = rand_vec(small_engine, rng)
            got = small_engine.decode(small_engine.encode(v, DELTA)).real
            worst = max(worst, float(np.max(np.abs(got - v))))
        assert worst <= 2.0**-10

    def test_encode_additivity(self, small_engine):
        rng = np.random.default_rng(1)
        v, w = rand_vec(small_engine, rng), rand_vec(small_engine, rng)
        a = small_engine.encode(v, DELTA)
        b = small_engine.encode(w, DELTA)
        summed = a.poly.residues.astype(np.int64) + b.poly.residues.astype(np.int64)
        # compare decoded sum against the vector sum
        pt = small_engine.encode(np.zeros(small_engine.slots), DELTA)
        pt.poly.residues[:] = np.mod(summed, np.array(small_engine.moduli)[:, None])
        got = small_engine.decode(pt).real
        assert np.max(np.abs(got - (v + w))) <= 2.0**-10

    def test_too_many_values(self, small_engine):
        with pytest.raises(CkksError):
            small_engine.encode(np.zeros(small_engine.slots + 1), DELTA)

    def test_non_finite_rejected(self, small_engine):
        with pytest.raises(CkksError):
            small_engine.encode(np.array([np.nan]), DELTA)

    def test_short_vector_pads_with_zeros(self, small_engine):
        got = small_engine.decode(small_engine.encode(np.array([1.0, -1.0]), DELTA)).real
        assert abs(got[0] - 1.0) < 1e-3 and abs(got[1] + 1.0) < 1e-3
        assert np.max(np.abs(got[2:])) < 1e-3


class TestKeygenEncrypt:
    def test_roundtrip(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        rng = np.random.default_rng(2)
        v = rand_vec(small_engine, rng)
        assert np.max(np.abs(dec(small_engine, sk, enc(small_engine, pk, rng, v)) - v)) <= 1e-3

    def test_encrypt_randomized_same_decrypt(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        v = np.linspace(-1, 1, small_engine.slots)
        c1 = enc(small_engine, pk, np.random.default_rng(3), v)
        c2 = enc(small_engine, pk, np.random.default_rng(4), v)
        assert not np.array_equal(c1.parts[0].residues, c2.parts[0].residues)
        d1, d2 = dec(small_engine, sk, c1), dec(small_engine, sk, c2)
        assert np.max(np.abs(d1 - v)) <= 1e-3 and np.max(np.abs(d2 - v)) <= 1e-3

    def test_different_seeds_different_pk(self, small_engine):
        _, pk1, _, _ = small_engine.keygen(np.random.default_rng(5), rot_steps=())
        _, pk2, _, _ = small_engine.keygen(np.random.default_rng(6), rot_steps=())
        assert not np.array_equal(pk1.b.residues, pk2.b.residues)

    def test_pk_noise_bound(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        e = small_engine.tables.add(
            pk.b.residues,
            small_engine.tables.mul(pk.a.residues, sk.s_eval.residues,
                                    small_engine.rows_at(small_engine.L)),
            small_engine.rows_at(small_engine.L),
        )
        coeffs = small_engine.tables.center(
            small_engine.tables.inverse(e, small_engine.rows_at(small_engine.L)),
            small_engine.rows_at(small_engine.L),
        )
        bound = 6 * small_engine.params.error_stddev * np.sqrt(small_engine.n)
        assert np.max(np.abs(coeffs)) <= bound

    def test_decrypt_three_part_rejected(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        rng = np.random.default_rng(7)
        ct = enc(small_engine, pk, rng, rand_vec(small_engine, rng))
        three = Ciphertext(ct.parts + (ct.parts[0],), ct.scale, ct.level,
                           ct.noise_bits_estimate)
        with pytest.raises(CkksError):
            small_engine.decrypt(three, sk)


class TestHomomorphic:
    def test_add_oracle(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        rng = np.random.default_rng(8)
        for _ in range(10):
            v, w = rand_vec(small_engine, rng), rand_vec(small_engine, rng)
            got = dec(small_engine, sk,
                      small_engine.he_add(enc(small_engine, pk, rng, v),
                                          enc(small_engine, pk, rng, w)))
            assert np.max(np.abs(got - (v + w))) <= 1e-3

    def test_add_zero_identity(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        rng = np.random.default_rng(9)
        v = rand_vec(small_engine, rng)
        z = enc(small_engine, pk, rng, np.zeros(small_engine.slots))
        got = dec(small_engine, sk, small_engine.he_add(enc(small_engine, pk, rng, v), z))
        assert np.max(np.abs(got - v)) <= 1e-3

    def test_chained_sum(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        rng = np.random.default_rng(10)
        vs = [rand_vec(small_engine, rng) for _ in range(10)]
        total = enc(small_engine, pk, rng, vs[0])
        for v in vs[1:]:
            total = small_engine.he_add(total, enc(small_engine, pk, rng, v))
        assert np.max(np.abs(dec(small_engine, sk, total) - np.sum(vs, axis=0))) <= 1e-2

    def test_sub_and_negate(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        rng = np.random.default_rng(11)
        v, w = rand_vec(small_engine, rng), rand_vec(small_engine, rng)
        got = dec(small_engine, sk,
                  small_engine.he_sub(enc(small_engine, pk, rng, v),
                                      enc(small_engine, pk, rng, w)))
        assert np.max(np.abs(got - (v - w))) <= 1e-3
        gotn = dec(small_engine, sk, small_engine.negate(enc(small_engine, pk, rng, v)))
        assert np.max(np.abs(gotn + v)) <= 1e-3

    def test_scale_mismatch_rejected(self, small_engine, small_keys):
        _, pk, _, _ = small_keys
        rng = np.random.default_rng(12)
        a = small_engine.encrypt(small_engine.encode(np.ones(4), DELTA), pk, rng)
        b = small_engine.encrypt(small_engine.encode(np.ones(4), DELTA * 1.5), pk, rng)
        with pytest.raises(ScaleMismatch):
            small_engine.he_add(a, b)

    def test_level_mismatch_rejected(self, small_engine, small_keys):
        _, pk, _, _ = small_keys
        rng = np.random.default_rng(13)
        a = enc(small_engine, pk, rng, np.ones(4))
        b = enc(small_engine, pk, rng, np.ones(4), level=small_engine.L - 1)
        with pytest.raises(CkksError):
            small_engine.he_add(a, b)

    def test_mul_oracle(self, small_engine, small_keys):
        sk, pk, rlk, _ = small_keys
        rng = np.random.default_rng(14)
        for _ in range(5):
            v, w = rand_vec(small_engine, rng), rand_vec(small_engine, rng)
            ct = small_engine.he_mul(enc(small_engine, pk, rng, v),
                                     enc(small_engine, pk, rng, w), rlk)
            assert np.max(np.abs(dec(small_engine, sk, ct) - v * w)) <= 1e-2

    def test_mul_by_encoded_one(self, small_engine, small_keys):
        sk, pk, _, _ = small_keys
        rng = np.random.default_rng(15)
        v = rand_vec(small_engine, rng)
        ct = enc(small_engine, pk, rng, v)
        got = dec(small_engine, sk, small_engine.ptmul_to(ct, np.ones(small_engine.slots), DELTA))
        assert np.max(np.abs(got - v)) <= 1e-2

    def test_mul_scale_and_level_discipline(self, small_engine, small_keys):
        _, pk, rlk, _ = small_keys
        rng = np.random.default_rng(16)
        a = enc(small_engine, pk, rng, rand_vec(small_engine, rng))
        out = small_engine.he_mul(a, enc(small_engine, pk, rng, rand_vec(small_engine, rng)), rlk)
        assert out.level == a.level - 1
        # scale tracking is exact: the product scale divided by the dropped prime
        assert out.scale == DELTA * DELTA / small_engine.moduli[a.level - 1]

    def test_depth_three_chain(self, small_engine, small_keys):
        sk, pk, rlk, _ = small_keys
        rng = np.random.default_rng(17)
        v, w, u = (rand_vec(small_engine, rng) for _ in range(3))
        c = small_engine.he_mul(enc(small_engine, pk, rng, v),
                                enc(small_engine, pk, rng, w), rlk)
        cu = small_engine.encrypt(small_engine.encode(u, c.scale, c.level), pk, rng)
        c = small_engine.he_mul(c, cu, rlk)
        c = small_engine.ptmul_to(c, np.ones(small_engine.slots), DELTA)
        assert np.max(np.abs(dec(small_engine, sk, c) - v * w * u)) <= 5e-2

    def test_mul_requires_rlk(self, small_engine, small_keys):
        _, pk, _, _ = small_keys
        rng = np.random.default_rng(18)
        a = enc(small_engine, pk, rng, np.ones(4))
        with pytest.raises(CkksError):
            small_engine.he_mul(a, a)

    def test_level_exhaustion(self, small_engine, small_keys):
        _, pk, rlk, _ = small_keys
        rng = np.random.default_rng(19)
        ct = enc(small_engine, pk, rng, rand_vec(small_engine, rng))
        while ct.level > 1:
            ct = small_engine.mod_switch(ct)
        with pytest.raises(LevelExhausted):
            small_engine.he_mul(ct, ct, rlk)
        with pytest.raises(LevelExhausted):
            small_engine.rescale(ct)
        with pytest.raises(LevelExhausted):
            small_engine.mod_switch(ct)


class TestRotation:
    def test_rotate_oracle(self, small_engine, small_keys):
        sk, pk, _, rotk = small_keys
        rng = np.random.default_rng(20)
        v = rand_vec(small_engine, rng)
        for k in (1, 2, 3, 7, 100):
            got = dec(small_engine, sk,
                      small_engine.he_rotate(enc(small_engine, pk, rng, v), k, rotk))
            assert np.max(np.abs(got - np.roll(v, -k))) <= 1e-3

    def test_rotate_zero_and_full_cycle(self, small_engine, small_keys):
        sk, pk, _, rotk = small_keys
        rng = np.random.default_rng(21)
        v = rand_vec(small_engine, rng)
        ct = enc(small_engine, pk, rng, v)
        assert np.max(np.abs(dec(small_engine, sk, small_engine.he_rotate(ct, 0, rotk)) - v)) <= 1e-3
        got = dec(small_engine, sk, small_engine.he_rotate(ct, small_engine.slots, rotk))
        assert np.max(np.abs(got - v)) <= 1e-3

    def test_leading_pattern(self, small_engine, small_keys):
        sk, pk, _, rotk = small_keys
        rng = np.random.default_rng(22)
        v = np.zeros(small_engine.slots)
        v[:4] = [1, 2, 3, 4]
        got = dec(small_engine, sk,
                  small_engine.he_rotate(enc(small_engine, pk, rng, v), 1, rotk))
        assert np.max(np.abs(got[:3] - [2, 3, 4])) <= 1e-3
        assert abs(got[-1] - 1) <= 1e-3

    def test_missing_key(self, small_engine):
        sk, pk, rlk, rotk = small_engine.keygen(np.random.default_rng(23), rot_steps=(2,))
        rng = np.random.default_rng(24)
        ct = small_engine.encrypt(small_engine.encode(np.ones(4), DELTA), pk, rng)
        with pytest.raises(KeyError_):
            small_engine.he_rotate(ct, 1, rotk)


class TestBudget:
    def test_fresh_budget_positive(self, small_engine, small_keys):
        _, pk, _, _ = small_keys
        rng = np.random.default_rng(25)
        ct = enc(small_engine, pk, rng, rand_vec(small_engine, rng))
        assert ct.noise_bits_estimate > 0

    def test_mul_strictly_decreases_budget(self, small_engine, small_keys):
        _, pk, rlk, _ = small_keys
        rng = np.random.default_rng(26)
        a = enc(small_engine, pk, rng, rand_vec(small_engine, rng))
        b = enc(small_engine, pk, rng, rand_vec(small_engine, rng))
        out = small_engine.he_mul(a, b, rlk)
        assert out.noise_bits_estimate < min(a.noise_bits_estimate, b.noise_bits_estimate)

    def test_add_and_rotate_do_not_increase(self, small_engine, small_keys):
        _, pk, _, rotk = small_keys
        rng = np.random.default_rng(27)
        a = enc(small_engine, pk, rng, rand_vec(small_engine, rng))
        b = enc(small_engine, pk, rng, rand_vec(small_engine, rng))
        assert small_engine.he_add(a, b).noise_bits_estimate <= a.noise_bits_estimate
        assert small_engine.he_rotate(a, 1, rotk).noise_bits_estimate < a.noise_bits_estimate

    def test_noise_budget_clamped(self, small_engine, small_keys):
        _, pk, _, _ = small_keys
        rng = np.random.default_rng(28)
        ct = enc(small_engine, pk, rng, rand_vec(small_engine, rng))
        ct.noise_bits_estimate = -3.0
        assert small_engine.noise_budget(ct) == 0.0
