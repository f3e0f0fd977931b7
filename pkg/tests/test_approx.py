import numpy as np
import pytest

from hesvm import approx
from hesvm.approx import ApproxError, PolyApprox
from hesvm.ckks import LevelExhausted

DELTA = 2.0**20


class TestFit:
    def test_polynomial_target_reproduced(self):
        p = approx.fit_fn(lambda t: 1.0 - t, (0.0, 2.0), 2)
        assert abs(p.coeffs[0] - 1.0) < 1e-12
        assert abs(p.coeffs[1] + 1.0) < 1e-12
        assert abs(p.coeffs[2]) < 1e-12
        assert p.max_err < 1e-12

    def test_degenerate_interval_rejected(self):
        with pytest.raises(ApproxError):
            approx.fit_exp((0.0, 0.0), 1)

    def test_degree_limits(self):
        with pytest.raises(ApproxError):
            approx.fit_exp((0.0, 1.0), 9)
        with pytest.raises(ApproxError):
            approx.fit_exp((0.0, 1.0), 0)

    def test_degree4_on_0_4(self):
        p = approx.fit_exp((0.0, 4.0), 4)
        assert p.max_err <= 0.05
        assert abs(approx.eval_horner(p, 0.0) - 1.0) <= 0.05

    def test_max_err_monotone_in_degree(self):
        errs = [approx.fit_exp((0.0, 4.0), d).max_err for d in range(2, 7)]
        for lo, hi in zip(errs[1:], errs[:-1]):
            assert lo <= hi

    def test_max_err_matches_recomputation(self):
        p = approx.fit_exp((0.0, 3.0), 3)
        t = np.linspace(0, 3, approx.GRID_POINTS)
        err = np.max(np.abs(np.polynomial.polynomial.polyval(t, p.coeffs) - np.exp(-t)))
        assert abs(err - p.max_err) < 1e-12


class TestEval:
    def test_constant_poly(self):
        p = PolyApprox((1.0, 0.0, 0.0), (0.0, 1.0), 2, 0.0)
        assert approx.eval_horner(p, 0.7) == 1.0

    def test_power_tree_matches_monomial(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            deg = int(rng.integers(1, 9))
            coeffs = tuple(rng.normal(size=deg + 1))
            p = PolyApprox(coeffs, (0.0, 1.0), deg, 0.0)
            t = float(rng.uniform(0, 1))
            direct = sum(c * t**i for i, c in enumerate(coeffs))
            assert abs(approx.eval_power_tree(p, t) - direct) <= 1e-12 * max(1, abs(direct))

    def test_out_of_range_warns(self):
        p = approx.fit_exp((0.0, 1.0), 2)
        with pytest.warns(UserWarning):
            approx.eval_horner(p, 2.0)

    def test_encrypted_degree2(self, small_engine, small_keys):
        sk, pk, rlk, _ = small_keys
        p = approx.fit_exp((0.0, 4.0), 2)
        rng = np.random.default_rng(1)
        t = np.full(small_engine.slots, 0.5)
        ct = small_engine.encrypt(small_engine.encode(t, DELTA), pk, rng)
        out = approx.eval_encrypted(p, ct, small_engine, rlk)
        got = small_engine.decode(small_engine.decrypt(out, sk)).real[0]
        assert abs(got - np.exp(-0.5)) <= 0.1
        assert abs(got - 0.606531) <= 0.1

    def test_encrypted_matches_plaintext_eval(self, small_engine, small_keys):
        sk, pk, rlk, _ = small_keys
        p = approx.fit_exp((0.0, 4.0), 2)
        rng = np.random.default_rng(2)
        ts = rng.uniform(0, 4, small_engine.slots)
        ct = small_engine.encrypt(small_engine.encode(ts, DELTA), pk, rng)
        out = approx.eval_encrypted(p, ct, small_engine, rlk)
        got = small_engine.decode(small_engine.decrypt(out, sk)).real
        want = approx.eval_horner(p, ts)
        assert np.max(np.abs(got - want)) <= 0.05

    def test_encrypted_level_exhaustion(self, small_engine, small_keys):
        _, pk, rlk, _ = small_keys
        p = approx.fit_exp((0.0, 4.0), 4)  # needs 3 levels
        rng = np.random.default_rng(3)
        ct = small_engine.encrypt(
            small_engine.encode(np.ones(4), DELTA, level=2), pk, rng
        )
        with pytest.raises(LevelExhausted):
            approx.eval_encrypted(p, ct, small_engine, rlk)


class TestCalibrate:
    def test_hand_interval(self):
        from hesvm.svm import FeatureSelection, KernelConfig, ScalerParams, SvmModel

        model = SvmModel(
            support_vectors=np.array([[0.0, 0.0]]),
            dual_coeffs=np.array([1.0]), bias=0.0, C=1.0,
            kernel=KernelConfig(gamma=0.5),
            scaler=ScalerParams(np.zeros(2), np.ones(2)),
            selection=FeatureSelection([0, 1], np.ones(2), 0.0),
        )
        lo, hi = approx.calibrate_interval(model, np.array([[2.0, 0.0]]))
        assert lo == 0.0
        assert abs(hi - 2.1) < 1e-9

    def test_zero_distance_floor(self):
        from hesvm.svm import FeatureSelection, KernelConfig, ScalerParams, SvmModel

        model = SvmModel(
            support_vectors=np.array([[1.0]]), dual_coeffs=np.array([1.0]),
            bias=0.0, C=1.0, kernel=KernelConfig(gamma=0.5),
            scaler=ScalerParams(np.zeros(1), np.ones(1)),
            selection=FeatureSelection([0], np.ones(1), 0.0),
        )
        lo, hi = approx.calibrate_interval(model, np.array([[1.0]]))
        assert (lo, hi) == (0.0, 1e-6)

    def test_coverage(self):
        from hesvm.svm import KernelConfig, train

        rng = np.random.default_rng(4)
        X = rng.normal(size=(80, 2))
        y = np.where(X[:, 0] * X[:, 1] > 0, 1, -1)
        model = train(X, y, cfg=KernelConfig(gamma=0.3), seed=5)
        _, hi = approx.calibrate_interval(model, X)
        covered = 0
        for _ in range(100):
            Xr = X[rng.choice(len(X), size=40)]
            sq = ((Xr[:, None, :] - model.support_vectors[None]) ** 2).sum(-1)
            covered += float(np.max(model.kernel.gamma * sq)) <= hi
        assert covered >= 99

    def test_empty_rejected(self):
        from hesvm.svm import FeatureSelection, KernelConfig, ScalerParams, SvmModel

        model = SvmModel(
            support_vectors=np.array([[1.0]]), dual_coeffs=np.array([1.0]),
            bias=0.0, C=1.0, kernel=KernelConfig(gamma=0.5),
            scaler=ScalerParams(np.zeros(1), np.ones(1)),
            selection=FeatureSelection([0], np.ones(1), 0.0),
        )
        with pytest.raises(ApproxError):
            approx.calibrate_interval(model, np.empty((0, 1)))
