"""Command-line pipeline: prepare | train | keygen | encrypt | infer | eval |
bench | gen-synth, driven by a JSON config file."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np
import pandas as pd

from . import approx, data, inference as inf, metrics, serialize as ser, svm, synth
from .ckks import CkksEngine, CkksParams, LevelExhausted, _profile_primes
from .config import ConfigError, RunConfig, load_config
from .ring import RingParams
from .serialize import DigestMismatch

EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_DIGEST = 4
EXIT_LEVELS = 5

BENCH_SIZES = (10, 25, 50, 100)


class MissingArtifact(FileNotFoundError):
    pass


def _need(path, hint):
    if not os.path.exists(path):
        raise MissingArtifact(f"missing artifact {path}; run `{hint}` first")
    return path


def engine_from_config(cfg: RunConfig, paper: bool = False) -> CkksEngine:
    if paper or cfg.paper_params:
        primes, special = _profile_primes(32768, (45, 45, 20, 20, 20), 60)
        return CkksEngine(CkksParams(RingParams(32768, primes), special, delta=cfg.delta))
    pattern = tuple(cfg.modulus_bits)
    primes, special = _profile_primes(cfg.ring_dim, pattern, cfg.special_bits)
    return CkksEngine(CkksParams(RingParams(cfg.ring_dim, primes), special, delta=cfg.delta))


def _out(cfg: RunConfig, *parts) -> str:
    return os.path.join(cfg.out_dir, *parts)


def _write_json(path, obj):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)


# ---------------- commands ----------------

def cmd_gen_synth(cfg: RunConfig, args):
    df = synth.gen_synth(n_rows=1000, seed=args.seed if args.seed is not None else 7)
    os.makedirs(os.path.dirname(os.path.abspath(cfg.dataset_path)), exist_ok=True)
    df.to_csv(cfg.dataset_path, index=False)
    print(f"wrote {len(df)} rows to {cfg.dataset_path}")


def cmd_prepare(cfg: RunConfig, args):
    ds = data.ingest_csv(cfg.dataset_path, cfg.label_column, cfg.label_mapping)
    ds = data.drop_constant_columns(ds)
    train_ds, test_ds = data.train_test_split(ds, cfg.split_seed, cfg.test_ratio)
    scaler = data.fit_scaler(train_ds)
    train_std = data.standardize(train_ds, scaler)
    test_std = data.standardize(test_ds, scaler)
    sel = data.select_features(train_std, 0.1)

    os.makedirs(_out(cfg, "prepared"), exist_ok=True)
    for name, d in (("train", train_std), ("test", test_std)):
        df = pd.DataFrame(d.features, columns=d.feature_names)
        df["label"] = d.labels
        df.to_csv(_out(cfg, "prepared", f"{name}.csv"), index=False)
    _write_json(_out(cfg, "prepared", "scaler.json"),
                {"mu": scaler.mu.tolist(), "sigma": scaler.sigma.tolist(),
                 "feature_names": train_std.feature_names})
    _write_json(_out(cfg, "prepared", "selection.json"),
                {"indices": sel.selected, "scores": sel.scores.tolist(),
                 "threshold": sel.threshold})
    _write_json(_out(cfg, "prepared", "meta.json"),
                {"categorical_vocab": ds.categorical_vocab,
                 "split_seed": cfg.split_seed, "test_ratio": cfg.test_ratio})
    print(f"prepared {train_ds.m} train / {test_ds.m} test rows, "
          f"{len(sel.selected)} selected features")


def _load_prepared(cfg: RunConfig):
    base = _out(cfg, "prepared")
    _need(os.path.join(base, "train.csv"), "prepare")
    train_df = pd.read_csv(os.path.join(base, "train.csv"))
    test_df = pd.read_csv(os.path.join(base, "test.csv"))
    with open(os.path.join(base, "scaler.json")) as fh:
        sc = json.load(fh)
    with open(os.path.join(base, "selection.json")) as fh:
        se = json.load(fh)
    with open(os.path.join(base, "meta.json")) as fh:
        meta = json.load(fh)
    scaler = data.ScalerParams(np.array(sc["mu"]), np.array(sc["sigma"]))
    sel = data.FeatureSelection(list(se["indices"]), np.array(se["scores"]),
                                float(se["threshold"]))
    return train_df, test_df, scaler, sel, meta


def _split_xy(df: pd.DataFrame, sel: data.FeatureSelection):
    y = df["label"].to_numpy()
    X = df.drop(columns=["label"]).to_numpy(dtype=float)
    return X[:, sel.selected], y


def cmd_train(cfg: RunConfig, args):
    train_df, _, scaler, sel, meta = _load_prepared(cfg)
    X, y = _split_xy(train_df, sel)
    kcfg = svm.KernelConfig(cfg.kernel_lambda1, cfg.kernel_lambda2, cfg.kernel_degree,
                            cfg.kernel_coef, cfg.kernel_gamma)
    model = svm.train(X, y, C=cfg.svm_c, cfg=kcfg, max_epochs=cfg.svm_max_epochs,
                      seed=cfg.svm_seed, scaler=scaler, selection=sel,
                      categorical_vocab=meta["categorical_vocab"],
                      split_seed=cfg.split_seed)
    interval = cfg.approx_interval or approx.calibrate_interval(model, X)
    model.rbf_approx = approx.fit_exp(interval, cfg.approx_degree)
    svm.save_model(model, _out(cfg, "model.json"))

    linear_cfg = svm.KernelConfig(1.0, 0.0, 1, 0.0, gamma=1.0)
    linear = svm.train(X, y, C=cfg.svm_c, cfg=linear_cfg, max_epochs=cfg.svm_max_epochs,
                       seed=cfg.svm_seed, scaler=scaler, selection=sel,
                       categorical_vocab=meta["categorical_vocab"],
                       split_seed=cfg.split_seed)
    svm.save_model(linear, _out(cfg, "model_linear.json"))
    print(f"trained hybrid model: {model.support_vectors.shape[0]} support vectors, "
          f"kkt={model.final_kkt:.2e}, approx max_err={model.rbf_approx.max_err:.4f}")


def _keygen_seed(cfg: RunConfig, args):
    return args.seed if args.seed is not None else cfg.svm_seed


def cmd_keygen(cfg: RunConfig, args):
    model = svm.load_model(_need(_out(cfg, "model.json"), "train"))
    engine = engine_from_config(cfg, args.paper_params)
    layout = inf.make_layout(model.support_vectors.shape[1],
                             model.support_vectors.shape[0], engine.slots)
    steps = cfg.rotation_steps or inf.needed_rot_steps(layout)
    rng = np.random.default_rng([_keygen_seed(cfg, args), 1])
    sk, pk, rlk, rotk = engine.keygen(rng, rot_steps=tuple(steps))
    os.makedirs(_out(cfg, "keys"), exist_ok=True)
    for name, key in (("pk", pk), ("sk", sk), ("rlk", rlk), ("rotk", rotk)):
        with open(_out(cfg, "keys", f"{name}.bin"), "wb") as fh:
            fh.write(ser.serialize_key(key, engine))
    _write_json(_out(cfg, "keys", "params.json"),
                {"paper_params": bool(args.paper_params or cfg.paper_params),
                 "digest": engine.params.digest().hex(),
                 "rotation_steps": list(steps)})
    print(f"wrote keys for n={engine.n} with {len(steps)} rotation steps")


def _load_engine_and_keys(cfg: RunConfig, args, want=("pk", "sk", "rlk", "rotk")):
    pj = _need(_out(cfg, "keys", "params.json"), "keygen")
    with open(pj) as fh:
        params_meta = json.load(fh)
    engine = engine_from_config(cfg, params_meta["paper_params"])
    if engine.params.digest().hex() != params_meta["digest"]:
        raise DigestMismatch("stored keys were generated under different parameters")
    kinds = {"pk": ser.KIND_PK, "sk": ser.KIND_SK, "rlk": ser.KIND_RLK, "rotk": ser.KIND_ROTK}
    keys = {}
    for name in want:
        path = _need(_out(cfg, "keys", f"{name}.bin"), "keygen")
        with open(path, "rb") as fh:
            keys[name] = ser.deserialize_key(fh.read(), engine, kinds[name])
    return engine, keys


def cmd_encrypt(cfg: RunConfig, args):
    model = svm.load_model(_need(_out(cfg, "model.json"), "train"))
    _, test_df, _, sel, _ = _load_prepared(cfg)
    engine, keys = _load_engine_and_keys(cfg, args, want=("pk",))
    X, _ = _split_xy(test_df, sel)
    layout = inf.make_layout(model.support_vectors.shape[1],
                             model.support_vectors.shape[0], engine.slots)
    rng = np.random.default_rng([_keygen_seed(cfg, args), 2])
    batch = inf.encrypt_batch(X, keys["pk"], engine, rng, layout)
    os.makedirs(_out(cfg, "enc"), exist_ok=True)
    for i, ct in enumerate(batch.ciphertexts):
        with open(_out(cfg, "enc", f"sample_{i:04d}.bin"), "wb") as fh:
            fh.write(ser.serialize_ct(ct, engine))
    _write_json(_out(cfg, "enc", "batch.json"),
                {"sample_count": batch.sample_count, "feature_count": batch.feature_count,
                 "encrypt_ms": batch.encrypt_ms})
    print(f"encrypted {batch.sample_count} samples")


def _plaintext_scores(model: svm.SvmModel, X: np.ndarray, exact_exp: bool) -> np.ndarray:
    cfg = model.kernel
    sv = model.support_vectors
    dots = X @ sv.T
    sq = np.maximum((X**2).sum(1)[:, None] + (sv**2).sum(1)[None, :] - 2 * dots, 0.0)
    t = cfg.gamma * sq
    kp = cfg.lambda1 * (dots + cfg.coef) ** cfg.degree
    if cfg.lambda2 > 0:
        if exact_exp:
            rb = np.exp(-t)
        else:
            rb = np.polynomial.polynomial.polyval(t, model.rbf_approx.coeffs)
        kv = kp + cfg.lambda2 * rb
    else:
        kv = kp
    return kv @ model.dual_coeffs + model.bias


def cmd_infer(cfg: RunConfig, args):
    model = svm.load_model(_need(_out(cfg, "model.json"), "train"))
    tp = inf.ThresholdParams(cfg.threshold_lambda1, cfg.threshold_lambda2, cfg.sigma_floor)
    if args.plaintext:
        _, test_df, _, sel, _ = _load_prepared(cfg)
        X, _ = _split_xy(test_df, sel)
        t0 = time.perf_counter()
        scores = _plaintext_scores(model, X, exact_exp=False)
        kernel_ms = (time.perf_counter() - t0) * 1000.0
        theta = inf.adaptive_threshold(scores, tp)
        labels = inf.classify(scores, theta)
        report = {
            "scores": scores.tolist(), "labels": labels.tolist(), "theta": float(theta),
            "stage_ms": {"enc": 0.0, "kernel": kernel_ms / max(len(X), 1),
                         "thresh": 0.0, "dec": 0.0},
            "noise_bits": {"enc": 0.0, "kernel": 0.0, "thresh": 0.0, "dec": 0.0},
        }
        _write_json(_out(cfg, "report_plain.json"), report)
        print(f"plaintext inference on {len(X)} samples, theta={theta:.4f}")
        return

    engine, keys = _load_engine_and_keys(cfg, args)
    meta_path = _need(_out(cfg, "enc", "batch.json"), "encrypt")
    with open(meta_path) as fh:
        meta = json.load(fh)
    layout = inf.make_layout(model.support_vectors.shape[1],
                             model.support_vectors.shape[0], engine.slots)
    cts = []
    for i in range(meta["sample_count"]):
        with open(_need(_out(cfg, "enc", f"sample_{i:04d}.bin"), "encrypt"), "rb") as fh:
            cts.append(ser.deserialize_ct(fh.read(), engine))
    batch = inf.EncryptedBatch(cts, meta["sample_count"], meta["feature_count"],
                               layout, meta.get("encrypt_ms", 0.0))
    bundle = inf.InferenceKeys(keys["pk"], keys["rlk"], keys["rotk"])
    rng = np.random.default_rng([_keygen_seed(cfg, args), 3])
    report = inf.run_inference(batch, model, bundle, keys["sk"], engine, tp=tp,
                               workers=args.workers or cfg.workers,
                               encrypt_coeffs=args.encrypt_coeffs, rng=rng)
    _write_json(_out(cfg, "report.json"), {
        "scores": report.scores, "labels": report.labels, "theta": report.theta,
        "stage_ms": report.stage_ms, "noise_bits": report.noise_bits,
    })
    print(f"encrypted inference on {batch.sample_count} samples, theta={report.theta:.4f}")


def _encrypted_rows(cfg, args, models, X, truth01, tp):
    """Run the encrypted pipeline in-process for the comparison table."""
    rows = []
    engine = engine_from_config(cfg, args.paper_params)
    for name, model in models:
        layout = inf.make_layout(model.support_vectors.shape[1],
                                 model.support_vectors.shape[0], engine.slots)
        rng = np.random.default_rng([cfg.svm_seed, 4])
        sk, pk, rlk, rotk = engine.keygen(rng, rot_steps=inf.needed_rot_steps(layout))
        batch = inf.encrypt_batch(X, pk, engine, rng, layout)
        t0 = time.perf_counter()
        report = inf.run_inference(batch, model, inf.InferenceKeys(pk, rlk, rotk),
                                   sk, engine, tp=tp,
                                   workers=args.workers or cfg.workers)
        total_ms = (time.perf_counter() - t0) * 1000.0 + batch.encrypt_ms
        mr = metrics.metrics(metrics.confusion(report.labels, truth01))
        rows.append({"Model": name, "Encrypted": "yes", "Acc": mr.accuracy,
                     "Pre": mr.precision, "Rec": mr.recall, "F1": mr.f1,
                     "Time_ms": total_ms / max(len(X), 1)})
    return rows


def cmd_eval(cfg: RunConfig, args):
    _, test_df, _, sel, _ = _load_prepared(cfg)
    model = svm.load_model(_need(_out(cfg, "model.json"), "train"))
    linear = svm.load_model(_need(_out(cfg, "model_linear.json"), "train"))
    X, y = _split_xy(test_df, sel)
    truth01 = (y == 1).astype(int)
    tp = inf.ThresholdParams(cfg.threshold_lambda1, cfg.threshold_lambda2, cfg.sigma_floor)

    rows = []
    for name, m in (("plain_linear", linear), ("plain_hybrid", model)):
        t0 = time.perf_counter()
        scores = _plaintext_scores(m, X, exact_exp=True)
        ms = (time.perf_counter() - t0) * 1000.0
        pred = (scores >= 0).astype(int)
        mr = metrics.metrics(metrics.confusion(pred, truth01))
        rows.append({"Model": name, "Encrypted": "no", "Acc": mr.accuracy,
                     "Pre": mr.precision, "Rec": mr.recall, "F1": mr.f1,
                     "Time_ms": ms / max(len(X), 1)})
    rows += _encrypted_rows(cfg, args, (("enc_linear", linear), ("enc_hybrid", model)),
                            X, truth01, tp)

    with open(_out(cfg, "report.csv"), "w") as fh:
        fh.write(metrics.comparison_csv(rows))
    with open(_out(cfg, "report.md"), "w") as fh:
        fh.write(metrics.comparison_markdown(rows))
    curve = metrics.roc(_plaintext_scores(model, X, exact_exp=True), truth01)
    with open(_out(cfg, "roc.csv"), "w") as fh:
        fh.write("fpr,tpr\n")
        for fpr, tpr in curve.points:
            fh.write(f"{fpr:.6f},{tpr:.6f}\n")
    print(metrics.comparison_markdown(rows))
    print(f"AUC (plain_hybrid): {curve.auc:.4f}")


def cmd_bench(cfg: RunConfig, args):
    _, test_df, _, sel, _ = _load_prepared(cfg)
    model = svm.load_model(_need(_out(cfg, "model.json"), "train"))
    X, _ = _split_xy(test_df, sel)
    if len(X) == 0:
        raise MissingArtifact("empty test split; regenerate data")
    tp = inf.ThresholdParams(cfg.threshold_lambda1, cfg.threshold_lambda2, cfg.sigma_floor)
    engine = engine_from_config(cfg, args.paper_params)
    layout = inf.make_layout(model.support_vectors.shape[1],
                             model.support_vectors.shape[0], engine.slots)
    rng = np.random.default_rng([cfg.svm_seed, 5])
    sk, pk, rlk, rotk = engine.keygen(rng, rot_steps=inf.needed_rot_steps(layout))
    bundle = inf.InferenceKeys(pk, rlk, rotk)

    scaling = []
    last_report = None
    for size in BENCH_SIZES:
        reps = np.resize(np.arange(len(X)), size)
        samples = X[reps]
        totals = []
        for _ in range(cfg.bench_repeats):
            t0 = time.perf_counter()
            batch = inf.encrypt_batch(samples, pk, engine, rng, layout)
            report = inf.run_inference(batch, model, bundle, sk, engine, tp=tp,
                                       workers=args.workers or cfg.workers)
            totals.append((time.perf_counter() - t0) * 1000.0)
        scaling.append((size, float(np.median(totals))))
        last_report = report
    with open(_out(cfg, "scaling.csv"), "w") as fh:
        fh.write(metrics.scaling_csv(scaling))
    with open(_out(cfg, "stages.csv"), "w") as fh:
        fh.write(metrics.stages_csv(last_report.stage_ms, last_report.noise_bits))
    slope, intercept, r2 = metrics.linear_fit_r2([s for s, _ in scaling],
                                                 [t for _, t in scaling])
    print(f"scaling: slope={slope:.1f} ms/sample, R^2={r2:.4f}")


COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "keygen": cmd_keygen,
    "encrypt": cmd_encrypt,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "gen-synth": cmd_gen_synth,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hesvm",
                                description="hybrid-kernel SVM with encrypted inference")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="path to the JSON run config")
    p.add_argument("--out", help="override the configured output directory")
    p.add_argument("--seed", type=int, help="override key/encryption randomness seed")
    p.add_argument("--paper-params", action="store_true",
                   help="use the large parameter profile (n=32768)")
    p.add_argument("--plaintext", action="store_true",
                   help="infer: run the plaintext mirror pipeline")
    p.add_argument("--encrypt-coeffs", action="store_true",
                   help="infer: encrypt the dual coefficients as well")
    p.add_argument("--workers", type=int, default=0,
                   help="worker threads for per-sample inference")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, require_dataset=args.command != "gen-synth")
        if args.out:
            cfg.out_dir = args.out
        if args.paper_params:
            cfg.paper_params = True
        os.makedirs(cfg.out_dir, exist_ok=True)
        COMMANDS[args.command](cfg, args)
        return 0
    except (ConfigError, data.DataError, svm.SvmError, approx.ApproxError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as e:
        print(f"missing artifact: {e}", file=sys.stderr)
        return EXIT_MISSING
    except DigestMismatch as e:
        print(f"parameter mismatch: {e}", file=sys.stderr)
        return EXIT_DIGEST
    except LevelExhausted as e:
        print(f"level exhaustion: {e}", file=sys.stderr)
        return EXIT_LEVELS


if __name__ == "__main__":
    sys.exit(main())
