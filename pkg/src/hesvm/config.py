"""Run configuration: a single JSON file with strict validation.

Unknown keys are rejected and every numeric field is range-checked before any
computation starts, so a bad config fails fast with a precise message.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


def _require_keys(d: dict, allowed: set, required: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


@dataclass
class RunConfig:
    dataset_path: str
    label_column: str = "label"
    label_mapping: dict = field(default_factory=lambda: {"+": 1, "-": -1})
    split_seed: int = 11
    test_ratio: float = 0.2
    ring_dim: int = 8192
    modulus_bits: tuple = (56, 20, 20, 20)
    special_bits: int = 60
    delta: float = 2.0**20
    rotation_steps: tuple | None = None
    kernel_lambda1: float = 0.7
    kernel_lambda2: float = 0.3
    kernel_degree: int = 2
    kernel_coef: float = 1.0
    kernel_gamma: float | None = None
    svm_c: float = 1.0
    svm_max_epochs: int = 40
    svm_seed: int = 3
    threshold_lambda1: float = 0.5
    threshold_lambda2: float = 0.1
    sigma_floor: float = 1e-6
    approx_degree: int = 2
    approx_interval: tuple | None = None
    out_dir: str = "artifacts"
    workers: int = 1
    bench_repeats: int = 1
    paper_params: bool = False


_TOP = {"dataset", "split", "ckks", "kernel", "svm", "threshold", "approx", "out_dir", "bench"}


def load_config(path, require_dataset: bool = True) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _require_keys(raw, _TOP, {"dataset", "out_dir"}, "config root")

    ds = raw["dataset"]
    _require_keys(ds, {"path", "label_column", "label_mapping"}, {"path"}, "dataset")
    cfg = RunConfig(dataset_path=ds["path"], out_dir=raw["out_dir"])
    cfg.label_column = ds.get("label_column", cfg.label_column)
    if "label_mapping" in ds:
        if not isinstance(ds["label_mapping"], dict) or not ds["label_mapping"]:
            raise ConfigError("dataset.label_mapping must be a nonempty object")
        cfg.label_mapping = {k: int(v) for k, v in ds["label_mapping"].items()}
        if set(cfg.label_mapping.values()) - {-1, 1}:
            raise ConfigError("label mapping values must be -1 or +1")
    if require_dataset and not os.path.exists(cfg.dataset_path):
        raise ConfigError(f"dataset path does not exist: {cfg.dataset_path}")

    sp = raw.get("split", {})
    _require_keys(sp, {"seed", "test_ratio"}, set(), "split")
    cfg.split_seed = int(sp.get("seed", cfg.split_seed))
    cfg.test_ratio = float(sp.get("test_ratio", cfg.test_ratio))
    if not 0 < cfg.test_ratio < 1:
        raise ConfigError(f"split.test_ratio must be in (0,1), got {cfg.test_ratio}")

    ck = raw.get("ckks", {})
    _require_keys(ck, {"ring_dim", "modulus_bits", "special_bits", "delta", "rotation_steps"},
                  set(), "ckks")
    cfg.ring_dim = int(ck.get("ring_dim", cfg.ring_dim))
    if cfg.ring_dim < 8 or cfg.ring_dim & (cfg.ring_dim - 1):
        raise ConfigError(f"ckks.ring_dim must be a power of two >= 8, got {cfg.ring_dim}")
    if "modulus_bits" in ck:
        cfg.modulus_bits = tuple(int(b) for b in ck["modulus_bits"])
        if len(cfg.modulus_bits) < 2 or any(not 14 <= b <= 62 for b in cfg.modulus_bits):
            raise ConfigError("ckks.modulus_bits needs >= 2 entries in [14, 62]")
    cfg.special_bits = int(ck.get("special_bits", cfg.special_bits))
    if not 14 <= cfg.special_bits <= 62:
        raise ConfigError("ckks.special_bits must be in [14, 62]")
    cfg.delta = float(ck.get("delta", cfg.delta))
    if cfg.delta < 2**10:
        raise ConfigError("ckks.delta must be at least 2^10")
    if ck.get("rotation_steps") is not None:
        cfg.rotation_steps = tuple(int(s) for s in ck["rotation_steps"])

    ke = raw.get("kernel", {})
    _require_keys(ke, {"lambda1", "lambda2", "degree", "coef", "gamma"}, set(), "kernel")
    cfg.kernel_lambda1 = float(ke.get("lambda1", cfg.kernel_lambda1))
    cfg.kernel_lambda2 = float(ke.get("lambda2", cfg.kernel_lambda2))
    if cfg.kernel_lambda1 < 0 or cfg.kernel_lambda2 < 0 or cfg.kernel_lambda1 + cfg.kernel_lambda2 <= 0:
        raise ConfigError("kernel weights must be nonnegative with positive sum")
    cfg.kernel_degree = int(ke.get("degree", cfg.kernel_degree))
    if cfg.kernel_degree < 1:
        raise ConfigError("kernel.degree must be >= 1")
    cfg.kernel_coef = float(ke.get("coef", cfg.kernel_coef))
    if "gamma" in ke and ke["gamma"] is not None:
        cfg.kernel_gamma = float(ke["gamma"])
        if cfg.kernel_gamma <= 0:
            raise ConfigError("kernel.gamma must be positive")

    sv = raw.get("svm", {})
    _require_keys(sv, {"C", "max_epochs", "seed"}, set(), "svm")
    cfg.svm_c = float(sv.get("C", cfg.svm_c))
    if cfg.svm_c <= 0:
        raise ConfigError("svm.C must be positive")
    cfg.svm_max_epochs = int(sv.get("max_epochs", cfg.svm_max_epochs))
    if cfg.svm_max_epochs < 1:
        raise ConfigError("svm.max_epochs must be >= 1")
    cfg.svm_seed = int(sv.get("seed", cfg.svm_seed))

    th = raw.get("threshold", {})
    _require_keys(th, {"lambda1", "lambda2", "sigma_floor"}, set(), "threshold")
    cfg.threshold_lambda1 = float(th.get("lambda1", cfg.threshold_lambda1))
    cfg.threshold_lambda2 = float(th.get("lambda2", cfg.threshold_lambda2))
    cfg.sigma_floor = float(th.get("sigma_floor", cfg.sigma_floor))
    if cfg.sigma_floor <= 0:
        raise ConfigError("threshold.sigma_floor must be positive")

    ap = raw.get("approx", {})
    _require_keys(ap, {"degree", "interval"}, set(), "approx")
    cfg.approx_degree = int(ap.get("degree", cfg.approx_degree))
    if not 1 <= cfg.approx_degree <= 8:
        raise ConfigError("approx.degree must be in [1, 8]")
    if ap.get("interval") is not None:
        iv = ap["interval"]
        if len(iv) != 2 or not (float(iv[1]) > float(iv[0]) >= 0):
            raise ConfigError("approx.interval must be [a, b] with b > a >= 0")
        cfg.approx_interval = (float(iv[0]), float(iv[1]))

    be = raw.get("bench", {})
    _require_keys(be, {"repeats"}, set(), "bench")
    cfg.bench_repeats = int(be.get("repeats", cfg.bench_repeats))
    if cfg.bench_repeats < 1:
        raise ConfigError("bench.repeats must be >= 1")
    return cfg


def default_config_dict(dataset_path: str, out_dir: str) -> dict:
    return {
        "dataset": {"path": dataset_path, "label_column": "label"},
        "split": {"seed": 11, "test_ratio": 0.2},
        "ckks": {"ring_dim": 8192, "modulus_bits": [56, 20, 20, 20],
                 "special_bits": 60, "delta": 2.0**20},
        "kernel": {"lambda1": 0.7, "lambda2": 0.3, "degree": 2, "coef": 1.0, "gamma": 0.1},
        "svm": {"C": 1.0, "max_epochs": 40, "seed": 3},
        "threshold": {"lambda1": 0.5, "lambda2": 0.1, "sigma_floor": 1e-6},
        "approx": {"degree": 2, "interval": None},
        "out_dir": out_dir,
    }
