"""Acceptance checks for the whole toolkit, one test per numbered criterion.

Each test prints a single ``criterion N (<label>): PASS`` or ``FAIL`` line
(visible under ``pytest -s``) and then asserts.  Tolerances and time budgets
are pinned inside the tests; the accuracy criteria tolerate one bad seed out
of five where noted.
"""

import hashlib
import subprocess
import sys
import time

import numpy as np

from fvcoding.bench import bench_resolution
from fvcoding.classify import evaluate, train_linear
from fvcoding.encoders import (
    GmmFvcImageEncoder,
    HscfvcImageEncoder,
    ScfvcImageEncoder,
    finalize_blocks,
    gmmfvc_encode,
    hscfvc_encode,
    intra_normalize,
    l2_normalize,
    power_normalize,
    scfvc_encode,
)
from fvcoding.gmm import GmmModel, fit_gmm, log_likelihood
from fvcoding.pursuit import (
    MpConfig,
    hybrid_mp_encode,
    mp_encode,
    objective_i,
    objective_ii,
)
from fvcoding.supervised import SupervisedCoder, sup_encode
from fvcoding.synth import (
    make_classification_set_i,
    make_classification_set_ii,
    random_unit_bases,
)


def _report(num, label, ok, detail=""):
    verdict = "PASS" if ok else "FAIL"
    print(f"criterion {num} ({label}): {verdict}")
    assert ok, f"criterion {num} ({label}) failed: {detail}"


def _fd_wrt_bases(objective, bases, h=1e-6):
    grad = np.zeros_like(bases)
    for i in range(bases.shape[0]):
        for j in range(bases.shape[1]):
            up = bases.copy()
            up[i, j] += h
            down = bases.copy()
            down[i, j] -= h
            grad[i, j] = (objective(up) - objective(down)) / (2.0 * h)
    return grad


def _max_scaled_err(analytic, fd):
    return float(np.max(np.abs(analytic - fd) / (np.abs(fd) + 1e-8)))


def _split(sets, per_class_train):
    train, test = [], []
    counts = {}
    for s in sets:
        c = counts.get(s.label, 0)
        counts[s.label] = c + 1
        (train if c < per_class_train else test).append(s)
    return train, test


def _linear_accuracy(z_train, y_train, z_test, y_test):
    model, _ = train_linear(z_train, y_train, epochs=50, lr=0.1,
                            batch_size=32, seed=0)
    return evaluate(model, z_test, y_test)["accuracy"]


def test_criterion_1_gradient_checks():
    # every Fisher block must match finite differences of its objective to
    # relative error 1e-5, over at least 20 random instances, within 10 s
    t0 = time.monotonic()
    errs = []

    for seed in range(8):
        rng = np.random.default_rng(seed)
        d, m = 4 + seed % 3, 6 + seed % 4
        bases = random_unit_bases(d, m, rng)
        x = rng.normal(size=d)
        config = MpConfig(k=3, noise_var=0.7 + 0.3 * (seed % 3))
        block = scfvc_encode(bases, x, config)
        values = mp_encode(bases, x, config.k).values

        def obj(b):
            return objective_i(b, x, values, l1_scale=0.3,
                               noise_var=config.noise_var)

        errs.append(_max_scaled_err(block, -0.5 * _fd_wrt_bases(obj, bases)))

    for seed in range(8):
        rng = np.random.default_rng(50 + seed)
        d, m1, m2 = 5 + seed % 2, 4 + seed % 3, 5 + seed % 2
        b_d = random_unit_bases(d, m1, rng)
        b_r = random_unit_bases(d, m2, rng)
        x = rng.normal(size=d)
        prior = np.abs(rng.normal(size=m1))
        config = MpConfig(k1=2, k2=2, fidelity_weight=0.4 + 0.2 * (seed % 3),
                          noise_var=1.0 + 0.25 * (seed % 2))
        block_d, block_r = hscfvc_encode(b_d, b_r, x, prior, config)
        code = hybrid_mp_encode(b_d, b_r, x, prior, config)

        def obj_d(b):
            return objective_ii(b, b_r, x, code.values_d, code.values_r,
                                prior, config.fidelity_weight, config.noise_var)

        def obj_r(b):
            return objective_ii(b_d, b, x, code.values_d, code.values_r,
                                prior, config.fidelity_weight, config.noise_var)

        errs.append(_max_scaled_err(block_d, -0.5 * _fd_wrt_bases(obj_d, b_d)))
        errs.append(_max_scaled_err(block_r, -0.5 * _fd_wrt_bases(obj_r, b_r)))

    for seed in range(4):
        rng = np.random.default_rng(200 + seed)
        k, d = 3, 4
        weights = rng.uniform(0.5, 1.5, size=k)
        model = GmmModel(weights=weights / weights.sum(),
                         means=rng.normal(size=(k, d)),
                         variances=rng.uniform(0.4, 2.0, size=(k, d)))
        x = rng.normal(size=d)
        mean_block, var_block = gmmfvc_encode(model, x, include_variances=True)
        sig = np.sqrt(model.variances)
        h = 1e-5
        fd_mean = np.zeros((d, k))
        fd_var = np.zeros((d, k))
        for kk in range(k):
            for dd in range(d):
                up = model.means.copy()
                up[kk, dd] += h
                down = model.means.copy()
                down[kk, dd] -= h
                diff = (log_likelihood(GmmModel(model.weights, up, model.variances), x[None])
                        - log_likelihood(GmmModel(model.weights, down, model.variances), x[None]))
                fd_mean[dd, kk] = diff / (2.0 * h) * sig[kk, dd]
                s_up = sig.copy()
                s_up[kk, dd] += h
                s_down = sig.copy()
                s_down[kk, dd] -= h
                diff = (log_likelihood(GmmModel(model.weights, model.means, s_up ** 2), x[None])
                        - log_likelihood(GmmModel(model.weights, model.means, s_down ** 2), x[None]))
                fd_var[dd, kk] = diff / (2.0 * h) * sig[kk, dd] / np.sqrt(2.0)
        errs.append(_max_scaled_err(mean_block, fd_mean))
        errs.append(_max_scaled_err(var_block, fd_var))

    elapsed = time.monotonic() - t0
    worst = max(errs)
    ok = len(errs) >= 20 and worst < 1e-5 and elapsed < 10.0
    _report(1, "analytic gradients match finite differences", ok,
            f"{len(errs)} checks, worst scaled error {worst:.3e}, {elapsed:.1f}s")


def test_criterion_2_per_step_inference_oracles():
    # every greedy step must match an exhaustive search over all single
    # coordinate updates, to 1e-9 in the objective, on at least 50 instances
    t0 = time.monotonic()
    worst_gap = 0.0
    instances = 0

    for seed in range(25):
        rng = np.random.default_rng(seed)
        d, m, k = 6 + seed % 4, 8 + seed % 5, 4
        bases = random_unit_bases(d, m, rng)
        x = rng.normal(size=d)
        for t in range(1, k + 1):
            prev = mp_encode(bases, x, t - 1)
            cur = mp_encode(bases, x, t)
            r = prev.residual
            best = min(
                float(np.dot(r - bases[:, j] * (bases[:, j] @ r) / (bases[:, j] @ bases[:, j]),
                             r - bases[:, j] * (bases[:, j] @ r) / (bases[:, j] @ bases[:, j])))
                for j in range(m)
            )
            achieved = float(cur.residual @ cur.residual)
            worst_gap = max(worst_gap, achieved - best)
        instances += 1

    for seed in range(25):
        rng = np.random.default_rng(1000 + seed)
        d, m1, m2 = 6 + seed % 3, 5 + seed % 3, 6 + seed % 2
        lam = (0.3, 0.7, 1.5)[seed % 3]
        b_d = random_unit_bases(d, m1, rng)
        b_r = random_unit_bases(d, m2, rng)
        x = rng.normal(size=d)
        prior = np.zeros(m1)
        prior[rng.choice(m1, size=2, replace=False)] = np.abs(rng.normal(size=2)) + 0.2
        k1, k2 = 3, 3

        def hybrid_obj(code):
            return objective_ii(b_d, b_r, x, code.values_d, code.values_r,
                                prior, lam, 1.0)

        for t in range(1, k1 + 1):
            prev = hybrid_mp_encode(b_d, b_r, x, prior,
                                    MpConfig(k1=t - 1, k2=0, fidelity_weight=lam))
            cur = hybrid_mp_encode(b_d, b_r, x, prior,
                                   MpConfig(k1=t, k2=0, fidelity_weight=lam))
            best = np.inf
            for j in range(m1):
                col = b_d[:, j]
                dev = prev.values_d[j] - prior[j]
                du = (col @ prev.residual - lam * dev) / (col @ col + lam)
                trial = prev.values_d.copy()
                trial[j] += du
                best = min(best, objective_ii(b_d, b_r, x, trial, prev.values_r,
                                              prior, lam, 1.0))
            # whether the coder stepped or its stop rule fired, its objective
            # may not exceed the best single-coordinate candidate
            worst_gap = max(worst_gap, hybrid_obj(cur) - best)

        for t in range(1, k2 + 1):
            prev = hybrid_mp_encode(b_d, b_r, x, prior,
                                    MpConfig(k1=k1, k2=t - 1, fidelity_weight=lam))
            cur = hybrid_mp_encode(b_d, b_r, x, prior,
                                   MpConfig(k1=k1, k2=t, fidelity_weight=lam))
            best = np.inf
            for j in range(m2):
                col = b_r[:, j]
                du = (col @ prev.residual) / (col @ col)
                trial = prev.values_r.copy()
                trial[j] += du
                best = min(best, objective_ii(b_d, b_r, x, prev.values_d, trial,
                                              prior, lam, 1.0))
            worst_gap = max(worst_gap, hybrid_obj(cur) - best)
        instances += 1

    elapsed = time.monotonic() - t0
    ok = instances >= 50 and worst_gap < 1e-9 and elapsed < 30.0
    _report(2, "greedy steps match exhaustive single-step search", ok,
            f"{instances} instances, worst objective gap {worst_gap:.3e}, {elapsed:.1f}s")


def test_criterion_3_exact_reductions():
    # a zero guided budget must reduce to plain pursuit bit for bit, and a
    # huge fidelity weight must pin the guided code to its prior
    bitwise_ok = True
    for seed in range(10):
        rng = np.random.default_rng(seed)
        b_d = random_unit_bases(7, 5, rng)
        b_r = random_unit_bases(7, 6, rng)
        x = rng.normal(size=7)
        prior = np.abs(rng.normal(size=5))

        hybrid = hybrid_mp_encode(b_d, b_r, x, prior,
                                  MpConfig(k1=0, k2=5, fidelity_weight=0.7))
        plain = mp_encode(b_r, x, 5)
        bitwise_ok = bitwise_ok and np.array_equal(hybrid.values_r, plain.values)
        bitwise_ok = bitwise_ok and np.array_equal(hybrid.residual, plain.residual)
        bitwise_ok = bitwise_ok and not hybrid.values_d.any()

        unweighted = hybrid_mp_encode(b_d, b_r, x, prior,
                                      MpConfig(k1=4, k2=0, fidelity_weight=0.0))
        direct = mp_encode(b_d, x, 4)
        bitwise_ok = bitwise_ok and np.array_equal(unweighted.values_d, direct.values)

    pin_err = 0.0
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        m1 = 5
        b_d = random_unit_bases(6, m1, rng)
        b_r = random_unit_bases(6, 4, rng)
        x = rng.normal(size=6)
        prior = np.abs(rng.normal(size=m1))
        code = hybrid_mp_encode(b_d, b_r, x, prior,
                                MpConfig(k1=3 * m1, k2=0, fidelity_weight=1e9))
        pin_err = max(pin_err, float(np.max(np.abs(code.values_d - prior))))

    ok = bitwise_ok and pin_err < 1e-6
    _report(3, "exact reduction cases", ok,
            f"bitwise reductions {'ok' if bitwise_ok else 'broken'}, "
            f"prior pin error {pin_err:.3e}")


def test_criterion_4_resolution_benchmark():
    # a 100-atom dictionary must resolve synthetic features better than
    # mixtures of 100 to 500 components at dimensions 200 to 1000, with the
    # mixture distance not degrading as components are added; all 5 seeds,
    # under 5 minutes
    t0 = time.monotonic()
    seeds_ok = 0
    detail = []
    for seed in range(5):
        rows = bench_resolution(
            dims=[200, 500, 1000], gmm_sizes=[100, 200, 500], dict_sizes=[100],
            n_train=800, n_test=150, true_m=64, true_sparsity=5,
            em_iters=8, dict_iters=5, dict_k=10, mp_k=10, seed=seed,
        )
        good = True
        for dim in (200, 500, 1000):
            gmm = [r.mean_distance for r in rows
                   if r.model == "gmm" and r.feature_dim == dim]
            sc = [r.mean_distance for r in rows
                  if r.model == "sc" and r.feature_dim == dim]
            good = good and all(s < g for s in sc for g in gmm)
            good = good and all(gmm[i + 1] <= 1.05 * gmm[i]
                                for i in range(len(gmm) - 1))
        seeds_ok += good
        detail.append(f"seed {seed} {'ok' if good else 'bad'}")
    elapsed = time.monotonic() - t0
    ok = seeds_ok == 5 and elapsed < 300.0
    _report(4, "resolution advantage over mixture baselines", ok,
            f"{seeds_ok}/5 seeds, {elapsed:.1f}s; " + ", ".join(detail))


def test_criterion_5_classification_vs_gmm():
    # on three-class synthetic images the sparse-coding signatures must reach
    # 90% accuracy and at least tie the mixture signatures, on 4 of 5 seeds,
    # under 5 minutes
    t0 = time.monotonic()
    passes = 0
    detail = []
    for seed in range(5):
        sets = make_classification_set_i(64, 32, 3, 18, 40, seed,
                                         noise_std=0.1, sparsity=4)
        train, test = _split(sets, 12)
        y_train = np.array([s.label for s in train])
        y_test = np.array([s.label for s in test])

        sc = ScfvcImageEncoder(m=48, k=10, iters=8, seed=0).fit(train)
        acc_sc = _linear_accuracy(sc.transform(train), y_train,
                                  sc.transform(test), y_test)

        gm = GmmFvcImageEncoder(n_components=48, max_iters=15, seed=0).fit(train)
        acc_gm = _linear_accuracy(gm.transform(train), y_train,
                                  gm.transform(test), y_test)

        passes += acc_sc >= 0.90 and acc_sc >= acc_gm
        detail.append(f"seed {seed}: sc {acc_sc:.2f} gmm {acc_gm:.2f}")
    elapsed = time.monotonic() - t0
    ok = passes >= 4 and elapsed < 300.0
    _report(5, "sparse signatures beat mixture signatures", ok,
            f"{passes}/5 seeds, {elapsed:.1f}s; " + ", ".join(detail))


def test_criterion_6_hybrid_vs_best_baseline():
    # on two-part synthetic images the hybrid signatures must come within two
    # points of the best of the plain sparse signatures and the supervised
    # coder's own pooled representation, on 4 of 5 seeds, under 5 minutes
    t0 = time.monotonic()
    passes = 0
    detail = []
    for seed in range(5):
        sets = make_classification_set_ii(40, 24, 24, 3, 18, 60, seed,
                                          prior_sparsity=3)
        train, test = _split(sets, 12)
        y_train = np.array([s.label for s in train])
        y_test = np.array([s.label for s in test])

        coder = SupervisedCoder(m1=24, epochs=30, seed=0).fit(train)
        encoder = coder.encoder_

        def pooled_rows(image_sets):
            rows = []
            for s in image_sets:
                pooled = sup_encode(encoder, s.features).sum(axis=0)
                rows.append(l2_normalize(power_normalize(pooled, 0.5)))
            return np.array(rows)

        acc_sup = _linear_accuracy(pooled_rows(train), y_train,
                                   pooled_rows(test), y_test)

        sc = ScfvcImageEncoder(m=48, k=10, iters=8, seed=0).fit(train)
        acc_sc = _linear_accuracy(sc.transform(train), y_train,
                                  sc.transform(test), y_test)

        hy = HscfvcImageEncoder(coder=encoder, m1=24, m2=24, k1=5, k2=5,
                                fidelity_weight=0.5, iters=8, seed=0).fit(train)
        acc_hy = _linear_accuracy(hy.transform(train), y_train,
                                  hy.transform(test), y_test)

        passes += acc_hy >= max(acc_sc, acc_sup) - 0.02
        detail.append(f"seed {seed}: hybrid {acc_hy:.2f} sc {acc_sc:.2f} "
                      f"sup {acc_sup:.2f}")
    elapsed = time.monotonic() - t0
    ok = passes >= 4 and elapsed < 300.0
    _report(6, "hybrid signatures match the best baseline", ok,
            f"{passes}/5 seeds, {elapsed:.1f}s; " + ", ".join(detail))


def test_criterion_7_monotonicity_and_normalization():
    # training traces and pursuit residuals must never get worse by more than
    # 1e-9, and the normalization chain must satisfy its defining identities
    ok = True
    detail = []

    for seed in range(3):
        rng = np.random.default_rng(seed)
        x = np.vstack([rng.normal(loc=3.0 * c, size=(60, 5)) for c in range(3)])
        _, trace = fit_gmm(x, k=3 + seed, max_iters=20, seed=seed)
        if not np.all(np.diff(trace) >= -1e-9):
            ok = False
            detail.append(f"gmm trace decreased (seed {seed})")

    for seed in range(5):
        rng = np.random.default_rng(10 + seed)
        bases = random_unit_bases(8, 12, rng)
        x = rng.normal(size=8)
        norms = [float(np.linalg.norm(mp_encode(bases, x, t).residual))
                 for t in range(7)]
        if not all(norms[t + 1] <= norms[t] + 1e-9 for t in range(6)):
            ok = False
            detail.append(f"pursuit residual grew (seed {seed})")

        b_d = random_unit_bases(8, 5, rng)
        prior = np.abs(rng.normal(size=5))
        objs_d = [
            objective_ii(b_d, bases, x, c.values_d, c.values_r, prior, 0.6, 1.0)
            for t in range(5)
            for c in [hybrid_mp_encode(b_d, bases, x, prior,
                                       MpConfig(k1=t, k2=0, fidelity_weight=0.6))]
        ]
        objs_r = [
            objective_ii(b_d, bases, x, c.values_d, c.values_r, prior, 0.6, 1.0)
            for t in range(5)
            for c in [hybrid_mp_encode(b_d, bases, x, prior,
                                       MpConfig(k1=3, k2=t, fidelity_weight=0.6))]
        ]
        for objs, name in ((objs_d, "guided"), (objs_r, "free")):
            if not all(objs[t + 1] <= objs[t] + 1e-9 for t in range(4)):
                ok = False
                detail.append(f"{name} objective grew (seed {seed})")

    rng = np.random.default_rng(99)
    blocks = [rng.normal(size=(6, 4)), rng.normal(size=(6, 3))]
    blocks[0][:, 1] = 0.0
    for block in blocks:
        z = power_normalize(block, 0.5)
        if not np.allclose(np.sign(z), np.sign(block)):
            ok = False
            detail.append("power step changed a sign")
        if not np.allclose(power_normalize(block, 1.0), block):
            ok = False
            detail.append("unit power is not the identity")
        col_norms = np.linalg.norm(intra_normalize(block), axis=0)
        if not np.all((np.abs(col_norms - 1.0) < 1e-9) | (col_norms == 0.0)):
            ok = False
            detail.append("column norms are not unit or zero")
    manual = np.concatenate([
        intra_normalize(power_normalize(b, 0.5)).flatten(order="F")
        for b in blocks
    ])
    if not np.allclose(finalize_blocks(blocks, 0.5), manual, atol=1e-9):
        ok = False
        detail.append("finalize differs from its stages")
    vec = rng.normal(size=9)
    if abs(np.linalg.norm(l2_normalize(vec)) - 1.0) > 1e-9:
        ok = False
        detail.append("l2 step is not unit norm")

    _report(7, "monotonicity and normalization invariants", ok,
            "; ".join(detail) or "all invariants held")


def test_criterion_8_cli_reproducibility(tmp_path):
    # the full command pipeline, run twice from the same seed, must produce
    # byte-identical outputs
    def run_pipeline(root):
        root.mkdir()
        data = root / "data"
        sigs = root / "sigs"

        def config(name, mapping):
            path = root / name
            path.write_text("".join(f"{k} = {v}\n" for k, v in mapping.items()))
            return path

        steps = [
            ("synth", config("synth.cfg", {
                "model": "gen1", "d": 10, "classes": 2, "images_per_class": 4,
                "features_per_image": 12, "m": 16, "noise_std": 0.05,
                "sparsity": 3, "seed": 0, "out": data,
            })),
            ("train-dict", config("dict.cfg", {
                "data": data, "m": 12, "k": 4, "iters": 6,
                "out": root / "dict.fvcm",
            })),
            ("encode", config("encode.cfg", {
                "data": data, "encoder": "scfvc", "model": root / "dict.fvcm",
                "k": 4, "out": sigs,
            })),
            ("classify", config("classify.cfg", {
                "data": sigs, "epochs": 25, "out": root / "clf.fvcm",
            })),
            ("evaluate", config("eval.cfg", {
                "data": sigs, "model": root / "clf.fvcm",
                "out": root / "metrics.csv",
            })),
        ]
        for command, cfg in steps:
            result = subprocess.run(
                [sys.executable, "-m", "fvcoding.cli", "--config", str(cfg), command],
                capture_output=True, text=True,
            )
            assert result.returncode == 0, (
                f"{command} failed: {result.stdout}{result.stderr}")

        digest = hashlib.sha256()
        outputs = [p for p in sorted(root.rglob("*"))
                   if p.is_file() and p.suffix != ".cfg"]
        for path in outputs:
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
        return digest.hexdigest(), len(outputs)

    first, n_first = run_pipeline(tmp_path / "run_a")
    second, n_second = run_pipeline(tmp_path / "run_b")
    ok = first == second and n_first == n_second and n_first > 10
    _report(8, "command pipeline is byte-reproducible", ok,
            f"{n_first} vs {n_second} files, digests "
            f"{'match' if first == second else 'differ'}")
