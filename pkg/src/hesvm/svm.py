"""Soft-margin SVM with a hybrid polynomial + RBF kernel.

Training is pairwise dual coordinate ascent (SMO-style working pairs) with a
conservative scaling factor beta in {1, 0.1, 0.01}: a tentative pair update is
damped and retried whenever it would decrease the dual objective or leave the
box constraints.  Every candidate objective is logged so the damping rule is
auditable after the fact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .data import FeatureSelection, ScalerParams

BETAS = (1.0, 0.1, 0.01)
SV_EPS = 1e-8
KKT_TOL = 1e-3


class SvmError(ValueError):
    pass


@dataclass
class KernelConfig:
    lambda1: float = 0.7
    lambda2: float = 0.3
    degree: int = 2
    coef: float = 1.0
    gamma: float | None = None  # resolved at training time when None

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0 or self.lambda1 + self.lambda2 <= 0:
            raise SvmError("kernel weights must be nonnegative with positive sum")
        if self.degree < 1:
            raise SvmError("polynomial degree must be >= 1")
        if self.gamma is not None and self.gamma <= 0:
            raise SvmError("gamma must be positive")


def resolve_gamma(cfg: KernelConfig, X: np.ndarray) -> float:
    if cfg.gamma is not None:
        return cfg.gamma
    var = float(X.var())
    n_features = X.shape[1]
    if var <= 0:
        var = 1.0
    return 1.0 / (n_features * var)


def hybrid_kernel(x: np.ndarray, sv: np.ndarray, cfg: KernelConfig) -> float:
    if x.shape != sv.shape:
        raise SvmError(f"dimension mismatch: {x.shape} vs {sv.shape}")
    if cfg.gamma is None:
        raise SvmError("gamma must be resolved before kernel evaluation")
    d = x - sv
    poly = (float(np.dot(x, sv)) + cfg.coef) ** cfg.degree
    rbf = np.exp(-cfg.gamma * float(np.dot(d, d)))
    return cfg.lambda1 * poly + cfg.lambda2 * rbf


def gram(X: np.ndarray, Y: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    if cfg.gamma is None:
        raise SvmError("gamma must be resolved before kernel evaluation")
    dots = X @ Y.T
    sq = (X**2).sum(axis=1)[:, None] + (Y**2).sum(axis=1)[None, :] - 2 * dots
    return cfg.lambda1 * (dots + cfg.coef) ** cfg.degree + cfg.lambda2 * np.exp(
        -cfg.gamma * np.maximum(sq, 0.0)
    )


@dataclass
class PreparedSample:
    values: np.ndarray
    prepared: bool = True


@dataclass
class SvmModel:
    support_vectors: np.ndarray     # (k, n_f) standardized, selected space
    dual_coeffs: np.ndarray         # alpha_j * y_j
    bias: float
    C: float
    kernel: KernelConfig
    scaler: ScalerParams
    selection: FeatureSelection
    categorical_vocab: dict = field(default_factory=dict)
    split_seed: int = 0
    rbf_approx: "object | None" = None
    # training diagnostics, not serialized
    train_log: list = field(default_factory=list, repr=False, compare=False)
    final_kkt: float = field(default=0.0, repr=False, compare=False)
    converged: bool = field(default=True, repr=False, compare=False)

    def prepare(self, raw_row) -> PreparedSample:
        """Standardize and feature-select a raw feature row."""
        if isinstance(raw_row, PreparedSample):
            raise SvmError("sample already prepared; refusing to scale twice")
        x = np.asarray(raw_row, dtype=float)
        if x.shape != self.scaler.mu.shape:
            raise SvmError(
                f"raw row has {x.shape[0]} features, scaler expects {self.scaler.mu.shape[0]}"
            )
        z = (x - self.scaler.mu) / self.scaler.sigma
        return PreparedSample(z[self.selection.selected])


def decision_score(model: SvmModel, x) -> float:
    vals = x.values if isinstance(x, PreparedSample) else np.asarray(x, dtype=float)
    if vals.shape[0] != model.support_vectors.shape[1]:
        raise SvmError(
            f"sample has {vals.shape[0]} features, model expects {model.support_vectors.shape[1]}"
        )
    total = model.bias
    for coeff, sv in zip(model.dual_coeffs, model.support_vectors):
        total += coeff * hybrid_kernel(sv, vals, model.kernel)
    return float(total)


def predict(model: SvmModel, x) -> int:
    return 1 if decision_score(model, x) >= 0 else -1


def train(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    cfg: KernelConfig | None = None,
    max_epochs: int = 40,
    seed: int = 0,
    scaler: ScalerParams | None = None,
    selection: FeatureSelection | None = None,
    categorical_vocab: dict | None = None,
    split_seed: int = 0,
) -> SvmModel:
    """Solve the soft-margin dual on standardized, selected features."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if C <= 0:
        raise SvmError("C must be positive")
    if len(set(np.unique(y))) < 2:
        raise SvmError("training data must contain both classes")
    cfg = cfg or KernelConfig()
    if cfg.gamma is None:
        cfg = KernelConfig(cfg.lambda1, cfg.lambda2, cfg.degree, cfg.coef,
                           resolve_gamma(cfg, X))
    m = X.shape[0]
    K = gram(X, X, cfg)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(m)
    g = np.zeros(m)  # Q @ alpha, maintained incrementally
    b = 0.0
    rng = np.random.default_rng(seed)
    train_log: list[dict] = []

    def f_vals():
        return y * g  # F_i = sum_j alpha_j y_j K_ij

    def kkt_violation():
        E = f_vals() + b - y
        viol = np.zeros(m)
        lower = (alpha < C - SV_EPS) & (y * E < 0)
        upper = (alpha > SV_EPS) & (y * E > 0)
        viol[lower] = -(y * E)[lower]
        viol[upper] = (y * E)[upper]
        return float(viol.max(initial=0.0))

    final_kkt = kkt_violation()
    for _epoch in range(max_epochs):
        order = rng.permutation(m)
        changed = 0
        for i in order:
            E_i = y[i] * g[i] + b - y[i]
            if not (
                (alpha[i] < C - SV_EPS and y[i] * E_i < -KKT_TOL)
                or (alpha[i] > SV_EPS and y[i] * E_i > KKT_TOL)
            ):
                continue
            j = int(rng.integers(m - 1))
            if j >= i:
                j += 1
            eta = K[i, i] + K[j, j] - 2 * K[i, j]
            if eta <= 1e-12:
                continue
            E_j = y[j] * g[j] + b - y[j]
            # full clipped pair step in alpha_j, then alpha_i compensates
            if y[i] != y[j]:
                L = max(0.0, alpha[j] - alpha[i])
                H = min(C, C + alpha[j] - alpha[i])
            else:
                L = max(0.0, alpha[i] + alpha[j] - C)
                H = min(C, alpha[i] + alpha[j])
            if H - L < 1e-12:
                continue
            aj_new = np.clip(alpha[j] + y[j] * (E_i - E_j) / eta, L, H)
            dj_full = aj_new - alpha[j]
            if abs(dj_full) < 1e-12:
                continue
            di_full = -y[i] * y[j] * dj_full

            applied = None
            candidates = []
            for beta in BETAS:
                di, dj = beta * di_full, beta * dj_full
                in_box = (
                    -SV_EPS <= alpha[i] + di <= C + SV_EPS
                    and -SV_EPS <= alpha[j] + dj <= C + SV_EPS
                )
                delta_w = (
                    (di + dj)
                    - (di * g[i] + dj * g[j])
                    - 0.5 * (di * di * Q[i, i] + 2 * di * dj * Q[i, j] + dj * dj * Q[j, j])
                )
                candidates.append({"beta": beta, "delta_objective": delta_w, "in_box": in_box})
                if in_box and delta_w >= -1e-12:
                    applied = (beta, di, dj)
                    break
            train_log.append(
                {"pair": (int(i), int(j)), "candidates": candidates,
                 "applied_beta": applied[0] if applied else None}
            )
            if applied is None:
                continue
            _, di, dj = applied
            alpha[i] = min(max(alpha[i] + di, 0.0), C)
            alpha[j] = min(max(alpha[j] + dj, 0.0), C)
            g += Q[:, i] * di + Q[:, j] * dj
            # standard pairwise bias update from the applied deltas
            b1 = b - E_i - y[i] * di * K[i, i] - y[j] * dj * K[i, j]
            b2 = b - E_j - y[i] * di * K[i, j] - y[j] * dj * K[j, j]
            if SV_EPS < alpha[i] < C - SV_EPS:
                b = b1
            elif SV_EPS < alpha[j] < C - SV_EPS:
                b = b2
            else:
                b = 0.5 * (b1 + b2)
            changed += 1
        final_kkt = kkt_violation()
        if final_kkt < KKT_TOL or changed == 0:
            break

    # recompute the bias from margin support vectors for stability
    F = f_vals()
    on_margin = (alpha > SV_EPS) & (alpha < C - SV_EPS)
    if on_margin.any():
        b = float((y[on_margin] - F[on_margin]).mean())
    sv_mask = alpha > SV_EPS
    if not sv_mask.any():
        # degenerate but possible on trivial data; keep the largest alpha
        sv_mask[np.argmax(alpha)] = True

    model = SvmModel(
        support_vectors=X[sv_mask].copy(),
        dual_coeffs=(alpha * y)[sv_mask].copy(),
        bias=float(b),
        C=float(C),
        kernel=cfg,
        scaler=scaler if scaler is not None else ScalerParams(np.zeros(X.shape[1]), np.ones(X.shape[1])),
        selection=selection if selection is not None else FeatureSelection(list(range(X.shape[1])), np.ones(X.shape[1]), 0.0),
        categorical_vocab=dict(categorical_vocab or {}),
        split_seed=split_seed,
    )
    model.train_log = train_log
    model.final_kkt = final_kkt
    model.converged = final_kkt < KKT_TOL
    return model


def dual_objective(model_alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    ay = model_alpha * y
    return float(model_alpha.sum() - 0.5 * ay @ K @ ay)


# ---------------- model JSON io ----------------

def model_to_dict(model: SvmModel) -> dict:
    out = {
        "scaler": {"mu": model.scaler.mu.tolist(), "sigma": model.scaler.sigma.tolist()},
        "selection": {
            "indices": list(model.selection.selected),
            "scores": np.asarray(model.selection.scores).tolist(),
            "threshold": model.selection.threshold,
        },
        "kernel": {
            "lambda1": model.kernel.lambda1,
            "lambda2": model.kernel.lambda2,
            "degree": model.kernel.degree,
            "coef": model.kernel.coef,
            "gamma": model.kernel.gamma,
        },
        "support_vectors": model.support_vectors.tolist(),
        "dual_coeffs": model.dual_coeffs.tolist(),
        "bias": model.bias,
        "C": model.C,
        "categorical_vocab": model.categorical_vocab,
        "split_seed": model.split_seed,
    }
    if model.rbf_approx is not None:
        a = model.rbf_approx
        out["rbf_approx"] = {
            "coeffs": list(a.coeffs),
            "interval": [a.interval[0], a.interval[1]],
            "degree": a.degree,
            "max_err": a.max_err,
        }
    return out


def save_model(model: SvmModel, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)


def load_model(path) -> SvmModel:
    from .approx import PolyApprox

    with open(path) as fh:
        d = json.load(fh)
    approx = None
    if "rbf_approx" in d:
        a = d["rbf_approx"]
        approx = PolyApprox(tuple(a["coeffs"]), (a["interval"][0], a["interval"][1]),
                            a["degree"], a["max_err"])
    return SvmModel(
        support_vectors=np.array(d["support_vectors"], dtype=float),
        dual_coeffs=np.array(d["dual_coeffs"], dtype=float),
        bias=float(d["bias"]),
        C=float(d["C"]),
        kernel=KernelConfig(**d["kernel"]),
        scaler=ScalerParams(np.array(d["scaler"]["mu"]), np.array(d["scaler"]["sigma"])),
        selection=FeatureSelection(list(d["selection"]["indices"]),
                                   np.array(d["selection"]["scores"]),
                                   float(d["selection"]["threshold"])),
        categorical_vocab=d.get("categorical_vocab", {}),
        split_seed=int(d.get("split_seed", 0)),
        rbf_approx=approx,
    )
