"""Polynomial approximation of exp(-t) for encrypted RBF evaluation.

Only polynomial operations survive under the encryption scheme, so the RBF
factor is replaced by a Chebyshev fit on the calibrated range of
t = gamma * ||x - sv||^2.  Encrypted evaluation uses a balanced power tree
(depth ceil(log2 degree) + 1) instead of Horner's sequential depth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C

GRID_POINTS = 10_000


class ApproxError(ValueError):
    pass


@dataclass(frozen=True)
class PolyApprox:
    coeffs: tuple[float, ...]        # monomial basis, ascending
    interval: tuple[float, float]
    degree: int
    max_err: float

    def __post_init__(self):
        a, b = self.interval
        if not (b > a >= 0):
            raise ApproxError("interval must satisfy b > a >= 0")
        if self.degree < 1:
            raise ApproxError("degree must be >= 1")


def _grid_err(coeffs, interval, target) -> float:
    t = np.linspace(interval[0], interval[1], GRID_POINTS)
    p = np.polynomial.polynomial.polyval(t, coeffs)
    return float(np.max(np.abs(p - target(t))))


def fit_fn(target, interval, degree: int) -> PolyApprox:
    """Chebyshev interpolation of `target` on `interval`, monomial coefficients."""
    a, b = interval
    if not (b > a >= 0):
        raise ApproxError(f"degenerate interval [{a}, {b}]")
    if degree > 8:
        raise ApproxError("degree must be <= 8")
    if degree < 1:
        raise ApproxError("degree must be >= 1")
    cheb = C.Chebyshev.interpolate(target, degree, domain=[a, b])
    mono = cheb.convert(kind=np.polynomial.polynomial.Polynomial)
    coeffs = np.zeros(degree + 1)
    coeffs[: len(mono.coef)] = mono.coef
    max_err = _grid_err(coeffs, (a, b), target)
    return PolyApprox(tuple(float(c) for c in coeffs), (float(a), float(b)),
                      degree, max_err)


def fit_exp(interval, degree: int) -> PolyApprox:
    return fit_fn(lambda t: np.exp(-t), interval, degree)


def _range_check(p: PolyApprox, t):
    a, b = p.interval
    slack = 0.1 * (b - a)
    t = np.atleast_1d(t)
    if np.any(t < a - slack) or np.any(t > b + slack):
        warnings.warn(
            f"evaluation point outside calibration range [{a}, {b}]", stacklevel=3
        )


def eval_horner(p: PolyApprox, t):
    _range_check(p, t)
    acc = np.zeros_like(np.asarray(t, dtype=float))
    for c in reversed(p.coeffs):
        acc = acc * t + c
    return float(acc) if np.isscalar(t) else acc


def eval_power_tree(p: PolyApprox, t: float) -> float:
    """Plaintext mirror of the encrypted balanced power-tree evaluation."""
    powers = {1: float(t)}
    for i in range(2, p.degree + 1):
        powers[i] = powers[(i + 1) // 2] * powers[i // 2]
    total = p.coeffs[0]
    for i in range(1, p.degree + 1):
        total += p.coeffs[i] * powers[i]
    return float(total)


def eval_encrypted(p: PolyApprox, ct_t, engine, rlk):
    """Evaluate P on an encrypted t; consumes ceil(log2 degree) + 1 levels."""
    from .ckks import LevelExhausted

    need = max(1, int(np.ceil(np.log2(p.degree)))) + 1 if p.degree > 1 else 1
    if ct_t.level - need < 1:
        raise LevelExhausted(
            f"degree-{p.degree} evaluation needs {need} levels, have {ct_t.level - 1}"
        )
    target_scale = engine.params.delta
    ones = np.ones(engine.slots)
    powers = {1: ct_t}
    for i in range(2, p.degree + 1):
        lo, hi = powers[i // 2], powers[(i + 1) // 2]
        while hi.level > lo.level:
            hi = engine.mod_switch(hi)
        while lo.level > hi.level:
            lo = engine.mod_switch(lo)
        if abs(lo.scale - hi.scale) > 2.0**-30 * lo.scale:
            lo = engine.adjust_scale(lo, hi.scale)
            hi = engine.mod_switch(hi)
        powers[i] = engine.he_mul(lo, hi, rlk)

    min_level = min(c.level for c in powers.values()) - 1
    total = None
    for i in range(1, p.degree + 1):
        term = engine.ptmul_to(powers[i], p.coeffs[i] * ones, target_scale)
        while term.level > min_level:
            term = engine.mod_switch(term)
        total = term if total is None else engine.he_add(total, term)
    const = engine.encode(p.coeffs[0] * ones, total.scale, total.level)
    return engine.he_add(total, const)


def calibrate_interval(model, X_train: np.ndarray) -> tuple[float, float]:
    """[0, 1.05 * max observed gamma * ||x - sv||^2] with a 1e-6 floor."""
    X_train = np.asarray(X_train, dtype=float)
    if X_train.size == 0:
        raise ApproxError("empty calibration data")
    sv = model.support_vectors
    sq = (
        (X_train**2).sum(axis=1)[:, None]
        + (sv**2).sum(axis=1)[None, :]
        - 2 * X_train @ sv.T
    )
    t_max = model.kernel.gamma * float(np.max(np.maximum(sq, 0.0)))
    return (0.0, max(1.05 * t_max, 1e-6))
