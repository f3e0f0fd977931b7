"""Encrypted inference: slot packing, SIMD dot products, encrypted hybrid
kernel evaluation, score accumulation, and adaptive-threshold classification.

Packing layout: every ciphertext carries one sample, features in the leading
slots.  For scoring, the sample is replicated homomorphically across one
power-of-two sized block per support vector, so a single plaintext multiply
plus rotate-and-sum yields every dot product at its block-start slot.  The
RBF factor is evaluated through the model's polynomial approximation in the
squared-distance variable, with the per-support-vector coefficients folded
into the final plaintext coefficient multiply so the whole pipeline fits in
three multiplicative levels (dot, kernel powering, coefficient multiply).
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ckks import (
    Ciphertext,
    CkksEngine,
    CkksError,
    NOISE_DECODE,
    PublicKey,
    RelinKey,
    RotationKeys,
    SecretKey,
)
from .svm import SvmModel


class InferenceError(ValueError):
    pass


def _next_pow2(x: int) -> int:
    return 1 << max(0, (x - 1).bit_length())


@dataclass(frozen=True)
class BatchLayout:
    n_f: int
    block: int      # power of two >= n_f
    sv_count: int
    sv_pad: int     # power of two >= sv_count
    slots: int

    def __post_init__(self):
        if self.block * self.sv_pad > self.slots:
            raise InferenceError(
                f"layout needs {self.block * self.sv_pad} slots, have {self.slots}"
            )


def make_layout(n_f: int, sv_count: int, slots: int) -> BatchLayout:
    if n_f < 1 or n_f > slots:
        raise InferenceError(f"feature count {n_f} out of range for {slots} slots")
    if sv_count < 1:
        raise InferenceError("at least one support vector required")
    return BatchLayout(n_f, _next_pow2(n_f), sv_count, _next_pow2(sv_count), slots)


def needed_rot_steps(layout: BatchLayout) -> tuple[int, ...]:
    steps = set()
    s = 1
    while s < layout.block:
        steps.add(s)
        s *= 2
    shift = layout.block
    while shift < layout.block * layout.sv_pad:
        steps.add(shift)                  # cross-block accumulation
        steps.add(layout.slots - shift)   # rightward replication
        shift *= 2
    return tuple(sorted(steps))


@dataclass
class EncryptedBatch:
    ciphertexts: list
    sample_count: int
    feature_count: int
    layout: BatchLayout
    encrypt_ms: float = 0.0


@dataclass
class EncryptedScore:
    ciphertext: Ciphertext
    sample_id: int


@dataclass
class ThresholdParams:
    lambda1: float = 0.5
    lambda2: float = 0.1
    sigma_floor: float = 1e-6

    def __post_init__(self):
        if self.sigma_floor <= 0:
            raise InferenceError("sigma_floor must be positive")


@dataclass
class InferenceReport:
    scores: list
    labels: list
    theta: float
    stage_ms: dict
    noise_bits: dict


@dataclass
class InferenceKeys:
    pk: PublicKey
    rlk: RelinKey
    rotk: RotationKeys


def encrypt_batch(samples: np.ndarray, pk: PublicKey, engine: CkksEngine,
                  rng: np.random.Generator, layout: BatchLayout) -> EncryptedBatch:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    m, n_f = samples.shape
    if n_f != layout.n_f:
        raise InferenceError(f"samples have {n_f} features, layout expects {layout.n_f}")
    if n_f > engine.slots:
        raise InferenceError(f"{n_f} features exceed {engine.slots} slots")
    t0 = time.perf_counter()
    cts = []
    for row in samples:
        pt = engine.encode(row, engine.params.delta)
        cts.append(engine.encrypt(pt, pk, rng))
    ms = (time.perf_counter() - t0) * 1000.0
    return EncryptedBatch(cts, m, n_f, layout, ms)


def _rotate_sum(ct: Ciphertext, steps, rotk: RotationKeys, engine: CkksEngine) -> Ciphertext:
    for s in steps:
        ct = engine.he_add(ct, engine.he_rotate(ct, s, rotk))
    return ct


def _inblock_steps(width: int):
    s = 1
    while s < width:
        yield s
        s *= 2


def replicate(ct: Ciphertext, layout: BatchLayout, rotk: RotationKeys,
              engine: CkksEngine) -> Ciphertext:
    """Copy the leading block into all sv_pad blocks (trailing slots are zero)."""
    shift = layout.block
    while shift < layout.block * layout.sv_pad:
        ct = engine.he_add(ct, engine.he_rotate(ct, layout.slots - shift, rotk))
        shift *= 2
    return ct


def enc_dot(ct_x: Ciphertext, sv_plain, rotk: RotationKeys, engine: CkksEngine) -> Ciphertext:
    """Dot product of a leading-slot sample with one encoded support vector.

    sv_plain must be encoded at the sample's level; consumes exactly 1 level.
    The result sits in slot 0 (replicated through the summed prefix).
    """
    width = _next_pow2(max(sv_plain.slot_count, 1))
    ct = engine.ptmul(ct_x, sv_plain)
    return _rotate_sum(ct, _inblock_steps(width), rotk, engine)


def enc_matmul(batch: EncryptedBatch, svs: np.ndarray, rotk: RotationKeys,
               engine: CkksEngine) -> list:
    """Per-sample ciphertexts with dot(sample, sv_j) at slot j*block."""
    svs = np.atleast_2d(np.asarray(svs, dtype=float))
    if svs.shape[0] == 0:
        raise InferenceError("at least one support vector required")
    if svs.shape[1] != batch.feature_count:
        raise InferenceError("support vector dimension mismatch")
    layout = batch.layout
    concat = _sv_concat(svs, layout)
    out = []
    for ct in batch.ciphertexts:
        rep = replicate(ct, layout, rotk, engine)
        prod = engine.ptmul_to(rep, concat, engine.params.delta)
        out.append(_rotate_sum(prod, _inblock_steps(layout.block), rotk, engine))
    return out


def _sv_concat(svs: np.ndarray, layout: BatchLayout) -> np.ndarray:
    vec = np.zeros(layout.slots)
    for j, sv in enumerate(svs):
        vec[j * layout.block : j * layout.block + layout.n_f] = sv
    return vec


def _block_starts_vec(values, layout: BatchLayout) -> np.ndarray:
    vec = np.zeros(layout.slots)
    vec[: len(values) * layout.block : layout.block] = values
    return vec


def decode_matmul(cts: list, layout: BatchLayout, sk: SecretKey,
                  engine: CkksEngine) -> np.ndarray:
    rows = []
    for ct in cts:
        slots = engine.decode(engine.decrypt(ct, sk)).real
        rows.append(slots[: layout.sv_count * layout.block : layout.block])
    return np.array(rows)


def enc_hybrid_kernel(ct_dot: Ciphertext, ct_dist_t: Ciphertext, cfg, apx,
                      rlk: RelinKey, engine: CkksEngine) -> Ciphertext:
    """lambda1*(dot + c)^degree + lambda2*P(t), all under encryption.

    ct_dist_t already holds t = gamma * ||x - sv||^2.  Output lands two
    levels below the inputs for degree 2 (one powering, one combination).
    """
    from .approx import PolyApprox, eval_encrypted

    if cfg.degree not in (1, 2):
        raise InferenceError("encrypted polynomial kernel supports degree 1 or 2")
    delta = engine.params.delta
    ones = np.ones(engine.slots)

    ct_pc = engine.he_add(ct_dot, engine.encode(cfg.coef * ones, ct_dot.scale, ct_dot.level))
    if cfg.degree == 2:
        sq = engine.he_mul(ct_pc, ct_pc, rlk)
        poly_term = engine.ptmul_to(sq, cfg.lambda1 * ones, delta)
    else:
        poly_term = engine.ptmul_to(ct_pc, cfg.lambda1 * ones, delta)

    if cfg.lambda2 > 0:
        scaled = PolyApprox(tuple(cfg.lambda2 * c for c in apx.coeffs),
                            apx.interval, apx.degree, apx.max_err)
        rbf_term = eval_encrypted(scaled, ct_dist_t, engine, rlk)
        while poly_term.level > rbf_term.level:
            poly_term = engine.mod_switch(poly_term)
        while rbf_term.level > poly_term.level:
            rbf_term = engine.mod_switch(rbf_term)
        return engine.he_add(poly_term, rbf_term)
    return poly_term


def _score_one(ct: Ciphertext, model: SvmModel, layout: BatchLayout,
               keys: InferenceKeys, engine: CkksEngine,
               coeff_cts: dict | None) -> tuple[Ciphertext, float, float]:
    """Full fused pipeline for one sample; returns (score ct, kernel ms, thresh ms)."""
    cfg = model.kernel
    delta = engine.params.delta
    start_level = ct.level

    t0 = time.perf_counter()
    rep = replicate(ct, layout, keys.rotk, engine)
    concat = _sv_concat(model.support_vectors, layout)
    s2 = rep.scale * rep.scale / engine.moduli[rep.level - 1]
    dots = engine.ptmul_to(rep, concat, s2)
    dots = _rotate_sum(dots, _inblock_steps(layout.block), keys.rotk, engine)

    use_rbf = cfg.lambda2 > 0
    powering = 1 if (cfg.degree == 2 or use_rbf) else 0
    if use_rbf:
        if model.rbf_approx is None:
            raise InferenceError("model has no exported rbf_approx")
        if model.rbf_approx.degree != 2:
            raise InferenceError("fused encrypted pipeline expects a degree-2 approximation")
        x2 = engine.he_mul(rep, rep, keys.rlk)
        x2 = _rotate_sum(x2, _inblock_steps(layout.block), keys.rotk, engine)
        ndots = engine.negate(dots)
        u = engine.he_add(engine.he_add(x2, ndots), ndots)
        sv_norms = (model.support_vectors**2).sum(axis=1)
        u = engine.he_add(
            u, engine.encode(_block_starts_vec(sv_norms, layout), u.scale, u.level)
        )
        u2 = engine.he_mul(u, u, keys.rlk)
        ud = engine.mod_switch(u)
    if cfg.degree == 2:
        dc = engine.he_add(dots, engine.encode(cfg.coef * np.ones(engine.slots),
                                               dots.scale, dots.level))
        kp = engine.he_mul(dc, dc, keys.rlk)
    elif cfg.degree == 1:
        kp = engine.mod_switch(dots) if use_rbf else dots
    else:
        raise InferenceError("encrypted polynomial kernel supports degree 1 or 2")
    kernel_ms = (time.perf_counter() - t0) * 1000.0
    kernel_budget = min(
        [kp.noise_bits_estimate]
        + ([u2.noise_bits_estimate, ud.noise_bits_estimate] if use_rbf else [])
    )

    # coefficient multiply: dual coefficients (and approx/gamma factors) folded
    # into per-block-start plaintext vectors, then one cross-block rotate-sum
    t0 = time.perf_counter()
    a = model.dual_coeffs
    gamma = cfg.gamma
    terms = []

    def coeff_term(src, weights, tag):
        vec = _block_starts_vec(weights, layout)
        if coeff_cts is not None:
            enc_vec = coeff_cts[tag]
            return engine.he_mul(src, enc_vec(src), keys.rlk)
        return engine.ptmul_to(src, vec, delta)

    terms.append(coeff_term(kp, a * cfg.lambda1, "poly"))
    const_total = float(model.bias)
    if cfg.degree == 1:
        # lambda1*(dot + c): the +c part is a constant after weighting
        const_total += cfg.lambda1 * cfg.coef * float(a.sum())
    if use_rbf:
        c0, c1, c2 = model.rbf_approx.coeffs[:3]
        terms.append(coeff_term(u2, a * cfg.lambda2 * c2 * gamma * gamma, "rbf2"))
        terms.append(coeff_term(ud, a * cfg.lambda2 * c1 * gamma, "rbf1"))
        const_total += cfg.lambda2 * c0 * float(a.sum())
    total = terms[0]
    for t in terms[1:]:
        total = engine.he_add(total, t)
    shift = layout.block
    while shift < layout.block * layout.sv_pad:
        total = engine.he_add(total, engine.he_rotate(total, shift, keys.rotk))
        shift *= 2
    total = engine.he_add(
        total, engine.encode(const_total * np.ones(engine.slots), total.scale, total.level)
    )
    thresh_ms = (time.perf_counter() - t0) * 1000.0

    consumed = start_level - total.level
    expected = 1 + powering + 1
    if consumed != expected:
        raise InferenceError(
            f"depth ledger mismatch: consumed {consumed} levels, expected {expected}"
        )
    return total, kernel_ms, thresh_ms, kernel_budget


def _make_coeff_cts(model: SvmModel, layout: BatchLayout, keys: InferenceKeys,
                    engine: CkksEngine, rng: np.random.Generator) -> dict:
    """Encrypted coefficient vectors for the encrypt-coeffs mode.

    Each entry is a closure encrypting the weights at the scale that makes the
    product rescale to delta at the operand's level.
    """
    cfg = model.kernel
    a = model.dual_coeffs
    gamma = cfg.gamma
    weights = {"poly": a * cfg.lambda1}
    if cfg.lambda2 > 0 and model.rbf_approx is not None:
        c0, c1, c2 = model.rbf_approx.coeffs[:3]
        weights["rbf2"] = a * cfg.lambda2 * c2 * gamma * gamma
        weights["rbf1"] = a * cfg.lambda2 * c1 * gamma

    def maker(w):
        vec = _block_starts_vec(w, layout)

        def enc_for(src: Ciphertext) -> Ciphertext:
            q_top = engine.moduli[src.level - 1]
            scale = engine.params.delta * q_top / src.scale
            pt = engine.encode(vec, scale, src.level)
            return engine.encrypt(pt, keys.pk, rng)

        return enc_for

    return {tag: maker(w) for tag, w in weights.items()}


def enc_decision_score(batch: EncryptedBatch, model: SvmModel, keys: InferenceKeys,
                       engine: CkksEngine, workers: int = 1,
                       encrypt_coeffs: bool = False,
                       rng: np.random.Generator | None = None):
    """Encrypted scores plus per-stage timing and noise traces."""
    if model.support_vectors.shape[0] != batch.layout.sv_count:
        raise InferenceError("batch layout was built for a different support vector count")
    coeff_cts = None
    if encrypt_coeffs:
        if rng is None:
            raise InferenceError("encrypt-coeffs mode needs a randomness source")
        coeff_cts = _make_coeff_cts(model, batch.layout, keys, engine, rng)

    def task(item):
        idx, ct = item
        score_ct, kernel_ms, thresh_ms, kernel_budget = _score_one(
            ct, model, batch.layout, keys, engine, coeff_cts
        )
        return idx, EncryptedScore(score_ct, idx), kernel_ms, thresh_ms, kernel_budget

    items = list(enumerate(batch.ciphertexts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, items))
    else:
        results = [task(it) for it in items]
    results.sort(key=lambda r: r[0])
    scores = [r[1] for r in results]
    kernel_ms = sum(r[2] for r in results)
    thresh_ms = sum(r[3] for r in results)
    kernel_budget = min(r[4] for r in results)
    return scores, kernel_ms, thresh_ms, kernel_budget


def decrypt_scores(scores: list, sk: SecretKey, engine: CkksEngine) -> np.ndarray:
    vals = []
    for s in scores:
        vals.append(float(engine.decode(engine.decrypt(s.ciphertext, sk)).real[0]))
    return np.array(vals)


def adaptive_threshold(scores, tp: ThresholdParams) -> float:
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise InferenceError("adaptive threshold needs at least one score")
    mu = float(scores.mean())
    sigma = float(scores.std())
    if scores.size == 1 or sigma < tp.sigma_floor:
        warnings.warn("degenerate score batch: stddev floored for thresholding")
        sigma = tp.sigma_floor
    return tp.lambda1 * mu + tp.lambda2 / sigma


def classify(scores, theta: float) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    return (scores > theta).astype(int)


def run_inference(batch: EncryptedBatch, model: SvmModel, keys: InferenceKeys,
                  sk: SecretKey, engine: CkksEngine, tp: ThresholdParams | None = None,
                  workers: int = 1, encrypt_coeffs: bool = False,
                  rng: np.random.Generator | None = None) -> InferenceReport:
    tp = tp or ThresholdParams()
    m = max(batch.sample_count, 1)
    enc_budget = min(ct.noise_bits_estimate for ct in batch.ciphertexts)

    scores_enc, kernel_ms, thresh_ms, kernel_budget = enc_decision_score(
        batch, model, keys, engine, workers=workers,
        encrypt_coeffs=encrypt_coeffs, rng=rng,
    )
    score_budget = min(s.ciphertext.noise_bits_estimate for s in scores_enc)

    t0 = time.perf_counter()
    score_vals = decrypt_scores(scores_enc, sk, engine)
    dec_ms = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    theta = adaptive_threshold(score_vals, tp)
    labels = classify(score_vals, theta)
    thresh_ms += (time.perf_counter() - t0) * 1000.0

    stage_ms = {
        "enc": batch.encrypt_ms / m,
        "kernel": kernel_ms / m,
        "thresh": thresh_ms / m,
        "dec": dec_ms / m,
    }
    noise_bits = {
        "enc": enc_budget,
        "kernel": kernel_budget,
        "thresh": score_budget,
        "dec": score_budget - NOISE_DECODE,
    }
    return InferenceReport(
        scores=score_vals.tolist(),
        labels=labels.tolist(),
        theta=float(theta),
        stage_ms=stage_ms,
        noise_bits=noise_bits,
    )
