"""Implementations behind the command-line interface.

Each runner takes a fully resolved configuration dict (see
:mod:`fvcoding.config`) and performs one pipeline stage.  All file listings
are sorted and all randomness is seeded, so a repeated invocation writes
byte-identical outputs.
"""

from __future__ import annotations

import os

import numpy as np

from .bench import bench_resolution, rows_to_csv
from .classify import (evaluate, load_linear, predict_batch, save_linear, train_linear)
from .config import REQUIRED, Key
from .dictionary import (learn_dictionary, learn_hybrid_dictionaries,
                         load_dictionary, load_hybrid_dictionaries,
                         save_dictionary, save_hybrid_dictionaries)
from .encoders import gmmfvc_signature, hscfvc_signature, scfvc_signature
from .errors import ArgumentError
from .gmm import fit_gmm, load_gmm, save_gmm
from .io import FeatureSet, read_feature_set, read_labels, write_feature_set, write_labels
from .pursuit import MpConfig
from .supervised import guidance_codes, load_sup_encoder, save_sup_encoder, train_sup_encoder
from .synth import make_classification_set_i, make_classification_set_ii

SCHEMAS = {
    "synth": {
        "model": Key("choice", choices=("gen1", "gen2"), default=REQUIRED),
        "d": Key("int", default=REQUIRED),
        "classes": Key("int", 3),
        "images_per_class": Key("int", 10),
        "features_per_image": Key("int", 50),
        "m": Key("int", 64),
        "laplace_scale": Key("float", 1.0),
        "noise_std": Key("float", 0.1),
        "sparsity": Key("int", 0),
        "m1": Key("int", 32),
        "m2": Key("int", 32),
        "residual_scale": Key("float", 1.0),
        "sparsity_scale": Key("float", 1.0),
        "fidelity_scale": Key("float", 0.05),
        "prior_sparsity": Key("int", 0),
        "mh_steps": Key("int", 200),
        "residual_sparsity": Key("int", 0),
        "seed": Key("int", 0),
        "out": Key("str", default=REQUIRED),
    },
    "train-dict": {
        "data": Key("str", default=REQUIRED),
        "m": Key("int", default=REQUIRED),
        "k": Key("int", 10),
        "iters": Key("int", 20),
        "ridge": Key("float", 1e-8),
        "seed": Key("int", 0),
        "out": Key("str", default=REQUIRED),
    },
    "train-hybrid-dict": {
        "data": Key("str", default=REQUIRED),
        "supcoder": Key("str", default=REQUIRED),
        "m1": Key("int", default=REQUIRED),
        "m2": Key("int", default=REQUIRED),
        "k1": Key("int", 10),
        "k2": Key("int", 10),
        "fidelity_weight": Key("float", 0.5),
        "iters": Key("int", 20),
        "ridge": Key("float", 1e-8),
        "seed": Key("int", 0),
        "out": Key("str", default=REQUIRED),
    },
    "train-gmm": {
        "data": Key("str", default=REQUIRED),
        "k": Key("int", default=REQUIRED),
        "max_iters": Key("int", 100),
        "tol": Key("float", 1e-6),
        "var_floor": Key("float", 1e-6),
        "seed": Key("int", 0),
        "out": Key("str", default=REQUIRED),
    },
    "train-supcoder": {
        "data": Key("str", default=REQUIRED),
        "m1": Key("int", default=REQUIRED),
        "epochs": Key("int", 30),
        "lr": Key("float", 0.05),
        "batch_size": Key("int", 16),
        "l2": Key("float", 1e-4),
        "alpha": Key("float", 0.5),
        "seed": Key("int", 0),
        "out": Key("str", default=REQUIRED),
    },
    "encode": {
        "data": Key("str", default=REQUIRED),
        "encoder": Key("choice", choices=("scfvc", "hscfvc", "gmmfvc"), default=REQUIRED),
        "model": Key("str", default=REQUIRED),
        "supcoder": Key("str", ""),
        "k": Key("int", 10),
        "k1": Key("int", 10),
        "k2": Key("int", 10),
        "fidelity_weight": Key("float", 0.5),
        "noise_var": Key("float", 1.0),
        "alpha": Key("float", 0.5),
        "include_variances": Key("bool", False),
        "format": Key("choice", choices=("binary", "csv"), default="binary"),
        "out": Key("str", default=REQUIRED),
    },
    "classify": {
        "data": Key("str", default=REQUIRED),
        "format": Key("choice", choices=("binary", "csv"), default="binary"),
        "l2": Key("float", 1e-4),
        "epochs": Key("int", 50),
        "lr": Key("float", 0.1),
        "batch_size": Key("int", 32),
        "seed": Key("int", 0),
        "out": Key("str", default=REQUIRED),
    },
    "evaluate": {
        "data": Key("str", default=REQUIRED),
        "model": Key("str", default=REQUIRED),
        "format": Key("choice", choices=("binary", "csv"), default="binary"),
        "out": Key("str", default=REQUIRED),
    },
    "bench-resolution": {
        "dims": Key("int_list", default=REQUIRED),
        "gmm_sizes": Key("int_list", default=REQUIRED),
        "dict_sizes": Key("int_list", default=REQUIRED),
        "n_train": Key("int", 10000),
        "n_test": Key("int", 500),
        "true_m": Key("int", 64),
        "true_sparsity": Key("int", 5),
        "laplace_scale": Key("float", 1.0),
        "noise_std": Key("float", 0.05),
        "mp_k": Key("int", 10),
        "em_iters": Key("int", 15),
        "em_tol": Key("float", 1e-5),
        "var_floor": Key("float", 1e-6),
        "dict_iters": Key("int", 8),
        "dict_k": Key("int", 10),
        "seed": Key("int", 0),
        "out": Key("str", default=REQUIRED),
    },
}


def _feature_files(directory: str) -> list[str]:
    names = sorted(n for n in os.listdir(directory) if n.endswith(".fvc1"))
    if not names:
        raise ArgumentError(f"no .fvc1 feature files in {directory}")
    return names


def _load_feature_matrix(data: str) -> np.ndarray:
    if os.path.isdir(data):
        parts = [
            read_feature_set(os.path.join(data, name)).features
            for name in _feature_files(data)
        ]
        return np.vstack(parts)
    return read_feature_set(data).features


def _load_labeled_sets(data: str, fmt: str = "binary") -> list[FeatureSet]:
    manifest = read_labels(os.path.join(data, "labels.csv"))
    sets = []
    for name, label in zip(manifest.names, manifest.labels):
        path = os.path.join(data, name)
        if not os.path.exists(path):
            raise ArgumentError(f"labels.csv names missing file {name!r} in {data}")
        sets.append(read_feature_set(path, fmt=fmt, image_id=name, label=label))
    return sets


def _load_labeled_vectors(data: str, fmt: str):
    sets = _load_labeled_sets(data, fmt=fmt)
    for fs in sets:
        if fs.t != 1:
            raise ArgumentError(
                f"{fs.image_id}: expected one signature row per file, got {fs.t}"
            )
    x = np.vstack([fs.features[0] for fs in sets])
    y = np.asarray([fs.label for fs in sets], dtype=int)
    return x, y


def run_synth(cfg: dict) -> None:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    if cfg["model"] == "gen1":
        sets = make_classification_set_i(
            d=cfg["d"], m=cfg["m"], n_classes=cfg["classes"],
            images_per_class=cfg["images_per_class"],
            features_per_image=cfg["features_per_image"],
            seed=cfg["seed"], laplace_scale=cfg["laplace_scale"],
            noise_std=cfg["noise_std"],
            sparsity=cfg["sparsity"] or None,
        )
    else:
        sets = make_classification_set_ii(
            d=cfg["d"], m_d=cfg["m1"], m_r=cfg["m2"], n_classes=cfg["classes"],
            images_per_class=cfg["images_per_class"],
            features_per_image=cfg["features_per_image"],
            seed=cfg["seed"],
            prior_sparsity=cfg["prior_sparsity"] or None,
            residual_scale=cfg["residual_scale"],
            sparsity_scale=cfg["sparsity_scale"],
            fidelity_scale=cfg["fidelity_scale"],
            noise_std=cfg["noise_std"],
            mh_steps=cfg["mh_steps"],
            residual_sparsity=cfg["residual_sparsity"] or None,
        )
    names = []
    for fs in sets:
        name = f"{fs.image_id}.fvc1"
        write_feature_set(os.path.join(out, name), fs)
        names.append(name)
    write_labels(os.path.join(out, "labels.csv"), names, [fs.label for fs in sets])
    print(f"wrote {len(sets)} feature files ({cfg['model']}, d={cfg['d']}) to {out}")


def run_train_dict(cfg: dict) -> None:
    x = _load_feature_matrix(cfg["data"])
    dictionary, trace = learn_dictionary(
        x, cfg["m"], cfg["k"], iters=cfg["iters"], seed=cfg["seed"], ridge=cfg["ridge"]
    )
    save_dictionary(cfg["out"], dictionary)
    final = format(trace[-1], ".6g") if trace.size else "n/a"
    print(
        f"learned {dictionary.d}x{dictionary.m} dictionary from {x.shape[0]} features; "
        f"final reconstruction error {final}"
    )


def run_train_hybrid_dict(cfg: dict) -> None:
    x = _load_feature_matrix(cfg["data"])
    coder = load_sup_encoder(cfg["supcoder"])
    if coder.m1 != cfg["m1"]:
        raise ArgumentError(
            f"coder produces {coder.m1}-dim codes but m1 is {cfg['m1']}"
        )
    config = MpConfig(k1=cfg["k1"], k2=cfg["k2"], fidelity_weight=cfg["fidelity_weight"])
    priors = guidance_codes(coder, x, cfg["k1"])
    b_d, b_r, trace = learn_hybrid_dictionaries(
        x, priors, cfg["m1"], cfg["m2"], config,
        iters=cfg["iters"], seed=cfg["seed"], ridge=cfg["ridge"],
    )
    save_hybrid_dictionaries(cfg["out"], b_d, b_r)
    final = format(trace[-1], ".6g") if trace.size else "n/a"
    print(
        f"learned hybrid pair {b_d.d}x{b_d.m} + {b_r.d}x{b_r.m} from "
        f"{x.shape[0]} features; final objective {final}"
    )


def run_train_gmm(cfg: dict) -> None:
    x = _load_feature_matrix(cfg["data"])
    model, trace = fit_gmm(
        x, cfg["k"], max_iters=cfg["max_iters"], tol=cfg["tol"],
        seed=cfg["seed"], var_floor=cfg["var_floor"],
    )
    save_gmm(cfg["out"], model)
    print(
        f"fit {model.k}-component mixture on {x.shape[0]} features in "
        f"{trace.size} iterations; final mean log-likelihood {format(trace[-1], '.6g')}"
    )


def run_train_supcoder(cfg: dict) -> None:
    sets = _load_labeled_sets(cfg["data"])
    encoder, losses = train_sup_encoder(
        sets, cfg["m1"], epochs=cfg["epochs"], lr=cfg["lr"],
        batch_size=cfg["batch_size"], l2=cfg["l2"], alpha=cfg["alpha"],
        seed=cfg["seed"],
    )
    save_sup_encoder(cfg["out"], encoder)
    print(
        f"trained supervised coder ({encoder.d} -> {encoder.m1}) on {len(sets)} images; "
        f"loss {format(losses[0], '.6g')} -> {format(losses[-1], '.6g')}"
    )


def _signature_fn(cfg: dict):
    kind = cfg["encoder"]
    if kind == "scfvc":
        dictionary = load_dictionary(cfg["model"])
        config = MpConfig(k=cfg["k"], noise_var=cfg["noise_var"])
        return lambda fs: scfvc_signature(dictionary, fs, config, cfg["alpha"])
    if kind == "hscfvc":
        if not cfg["supcoder"]:
            raise ArgumentError("encoder hscfvc requires the supcoder config key")
        b_d, b_r = load_hybrid_dictionaries(cfg["model"])
        coder = load_sup_encoder(cfg["supcoder"])
        if coder.m1 != b_d.m:
            raise ArgumentError(
                f"coder produces {coder.m1}-dim codes but the pair has m1 {b_d.m}"
            )
        config = MpConfig(
            k1=cfg["k1"], k2=cfg["k2"],
            fidelity_weight=cfg["fidelity_weight"], noise_var=cfg["noise_var"],
        )
        return lambda fs: hscfvc_signature(b_d, b_r, coder, fs, config, cfg["alpha"])
    model = load_gmm(cfg["model"])
    return lambda fs: gmmfvc_signature(
        model, fs, include_variances=cfg["include_variances"], alpha=cfg["alpha"]
    )


def _write_signature(path, vector: np.ndarray, fmt: str) -> None:
    write_feature_set(path, FeatureSet(features=vector[None, :]), fmt=fmt)


def run_encode(cfg: dict) -> None:
    signature = _signature_fn(cfg)
    data = cfg["data"]
    if os.path.isdir(data):
        os.makedirs(cfg["out"], exist_ok=True)
        names = _feature_files(data)
        out_names = []
        dim = None
        for name in names:
            fs = read_feature_set(os.path.join(data, name), image_id=name)
            vec = signature(fs)
            dim = vec.shape[0]
            out_name = f"{os.path.splitext(name)[0]}.sig"
            _write_signature(os.path.join(cfg["out"], out_name), vec, cfg["format"])
            out_names.append(out_name)
        manifest = os.path.join(data, "labels.csv")
        if os.path.exists(manifest):
            labels = read_labels(manifest)
            by_name = dict(zip(labels.names, labels.labels))
            mapped = []
            for name, out_name in zip(names, out_names):
                if name not in by_name:
                    raise ArgumentError(f"labels.csv has no entry for {name!r}")
                mapped.append((out_name, by_name[name]))
            write_labels(
                os.path.join(cfg["out"], "labels.csv"),
                [n for n, _ in mapped], [l for _, l in mapped],
            )
        print(f"encoded {len(names)} images ({cfg['encoder']}); signature dim {dim}")
    else:
        fs = read_feature_set(data)
        vec = signature(fs)
        _write_signature(cfg["out"], vec, cfg["format"])
        print(f"encoded 1 image ({cfg['encoder']}); signature dim {vec.shape[0]}")


def run_classify(cfg: dict) -> None:
    x, y = _load_labeled_vectors(cfg["data"], cfg["format"])
    model, losses = train_linear(
        x, y, l2=cfg["l2"], epochs=cfg["epochs"], lr=cfg["lr"],
        batch_size=cfg["batch_size"], seed=cfg["seed"],
    )
    save_linear(cfg["out"], model)
    ids, _ = predict_batch(model, x)
    print(
        f"trained classifier on {x.shape[0]} signatures, {model.n_classes} classes; "
        f"loss {format(losses[0], '.6g')} -> {format(losses[-1], '.6g')}; "
        f"training accuracy {format((ids == y).mean(), '.4f')}"
    )


def run_evaluate(cfg: dict) -> None:
    x, y = _load_labeled_vectors(cfg["data"], cfg["format"])
    model = load_linear(cfg["model"])
    metrics = evaluate(model, x, y)
    lines = ["metric,class,value"]
    lines.append(f"accuracy,,{format(metrics['accuracy'], '.17g')}")
    lines.append(f"mean_ap,,{format(metrics['mean_ap'], '.17g')}")
    for cid in model.class_ids:
        lines.append(f"precision,{cid},{format(metrics['precision'][cid], '.17g')}")
    for cid, value in metrics["ap"].items():
        lines.append(f"ap,{cid},{format(value, '.17g')}")
    with open(cfg["out"], "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{'metric':<12}{'class':>8}{'value':>12}")
    print(f"{'accuracy':<12}{'-':>8}{metrics['accuracy']:>12.4f}")
    print(f"{'mean_ap':<12}{'-':>8}{metrics['mean_ap']:>12.4f}")
    for cid in model.class_ids:
        print(f"{'precision':<12}{cid:>8}{metrics['precision'][cid]:>12.4f}")
    for cid, value in metrics["ap"].items():
        print(f"{'ap':<12}{cid:>8}{value:>12.4f}")


def run_bench_resolution(cfg: dict) -> None:
    rows = bench_resolution(
        dims=cfg["dims"], gmm_sizes=cfg["gmm_sizes"], dict_sizes=cfg["dict_sizes"],
        n_train=cfg["n_train"], n_test=cfg["n_test"], true_m=cfg["true_m"],
        true_sparsity=cfg["true_sparsity"], laplace_scale=cfg["laplace_scale"],
        noise_std=cfg["noise_std"], mp_k=cfg["mp_k"], em_iters=cfg["em_iters"],
        em_tol=cfg["em_tol"], var_floor=cfg["var_floor"],
        dict_iters=cfg["dict_iters"], dict_k=cfg["dict_k"], seed=cfg["seed"],
    )
    with open(cfg["out"], "w", encoding="ascii") as fh:
        fh.write(rows_to_csv(rows))
    print(f"wrote {len(rows)} benchmark rows to {cfg['out']}")


RUNNERS = {
    "synth": run_synth,
    "train-dict": run_train_dict,
    "train-hybrid-dict": run_train_hybrid_dict,
    "train-gmm": run_train_gmm,
    "train-supcoder": run_train_supcoder,
    "encode": run_encode,
    "classify": run_classify,
    "evaluate": run_evaluate,
    "bench-resolution": run_bench_resolution,
}
