"""Compositional Fisher vector coding of local features.

Sparse-coding and hybrid (supervision-guided) Fisher vector encoders with a
Gaussian-mixture baseline, plus the surrounding toolchain: matching-pursuit
inference, dictionary learning, a supervised coder, pooling and
normalization, synthetic generators with known ground truth, file formats,
and a small classification harness.

Submodules import lazily so the command line can pin thread counts before
any numeric code loads.
"""

from __future__ import annotations

__version__ = "0.1.0"

_EXPORTS = {
    # errors
    "FvcError": "errors",
    "ArgumentError": "errors",
    "FormatError": "errors",
    "NotFittedError": "errors",
    # io
    "FeatureSet": "io",
    "read_feature_set": "io",
    "write_feature_set": "io",
    "read_labels": "io",
    "write_labels": "io",
    # pca
    "PcaTransform": "pca",
    "fit_pca": "pca",
    "apply_pca": "pca",
    "save_pca": "pca",
    "load_pca": "pca",
    "PcaDecorrelator": "pca",
    # synth
    "GenModelI": "synth",
    "GenModelII": "synth",
    "random_unit_bases": "synth",
    "sample_laplace": "synth",
    "sample_feature_i": "synth",
    "sample_features_i": "synth",
    "sample_feature_ii": "synth",
    "sample_features_ii": "synth",
    "metropolis_code_samples": "synth",
    "make_classification_set_i": "synth",
    "make_classification_set_ii": "synth",
    # gmm
    "GmmModel": "gmm",
    "fit_gmm": "gmm",
    "log_likelihood": "gmm",
    "responsibilities": "gmm",
    "nearest_prototype_distance": "gmm",
    "save_gmm": "gmm",
    "load_gmm": "gmm",
    "DiagonalGaussianMixture": "gmm",
    # pursuit
    "MpConfig": "pursuit",
    "SparseCode": "pursuit",
    "HybridCode": "pursuit",
    "mp_encode": "pursuit",
    "mp_encode_batch": "pursuit",
    "hybrid_mp_encode": "pursuit",
    "hybrid_mp_encode_batch": "pursuit",
    "objective_i": "pursuit",
    "objective_ii": "pursuit",
    # dictionary
    "Dictionary": "dictionary",
    "learn_dictionary": "dictionary",
    "learn_hybrid_dictionaries": "dictionary",
    "save_dictionary": "dictionary",
    "load_dictionary": "dictionary",
    "save_hybrid_dictionaries": "dictionary",
    "load_hybrid_dictionaries": "dictionary",
    "DictionaryLearner": "dictionary",
    "HybridDictionaryLearner": "dictionary",
    # supervised
    "SupervisedEncoder": "supervised",
    "sup_encode": "supervised",
    "sparsify_top_k": "supervised",
    "guidance_codes": "supervised",
    "train_sup_encoder": "supervised",
    "save_sup_encoder": "supervised",
    "load_sup_encoder": "supervised",
    "SupervisedCoder": "supervised",
    # encoders
    "ImageSignature": "encoders",
    "fingerprint": "encoders",
    "scfvc_encode": "encoders",
    "hscfvc_encode": "encoders",
    "gmmfvc_encode": "encoders",
    "pool_sum": "encoders",
    "power_normalize": "encoders",
    "intra_normalize": "encoders",
    "l2_normalize": "encoders",
    "finalize_blocks": "encoders",
    "scfvc_signature": "encoders",
    "hscfvc_signature": "encoders",
    "gmmfvc_signature": "encoders",
    "encode_image": "encoders",
    "ScfvcImageEncoder": "encoders",
    "HscfvcImageEncoder": "encoders",
    "GmmFvcImageEncoder": "encoders",
    # classify
    "LinearModel": "classify",
    "train_linear": "classify",
    "predict": "classify",
    "predict_batch": "classify",
    "decision_scores": "classify",
    "average_precision": "classify",
    "evaluate": "classify",
    "save_linear": "classify",
    "load_linear": "classify",
    "LinearClassifier": "classify",
    # bench
    "BenchRow": "bench",
    "bench_resolution": "bench",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name: str):
    module_name = _EXPORTS.get(name)
    if module_name is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    import importlib

    module = importlib.import_module(f".{module_name}", __name__)
    value = getattr(module, name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
