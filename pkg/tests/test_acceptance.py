"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`.
"""

import os
import subprocess
import sys
from contextlib import contextmanager
from itertools import product

import numpy as np

import reference as ref
from cavenet import cbam as cbam_mod
from cavenet import data as data_mod
from cavenet import fusion as fusion_mod
from cavenet import metrics as metrics_mod
from cavenet import synxrf as synxrf_mod
from cavenet import tensor as T
from cavenet.rng import Rng
from test_tensor import check_grad

TABLE1_TRAIN = {
    "Angioectasia": 1154, "Bleeding": 834, "Erosion": 2694, "Erythema": 691,
    "Foreign Body": 792, "Lymphangiectasia": 796, "Normal": 28663,
    "Polyp": 1162, "Ulcer": 663, "Worms": 158,
}
TABLE1_AFTER = {
    "Angioectasia": 7500, "Bleeding": 7500, "Erosion": 7500, "Erythema": 7500,
    "Foreign Body": 7500, "Lymphangiectasia": 7500, "Normal": 28663,
    "Polyp": 7500, "Ulcer": 7500, "Worms": 7500,
}
TABLE3_ROWS = [
    ("VGG19", 0.5255, 0.1445, 0.3349),
    ("Xception", 0.5341, 0.1313, 0.3327),
    ("ResNet50V2", 0.5422, 0.1773, 0.3597),
    ("MobileNetV2", 0.5485, 0.1140, 0.3312),
    ("InceptionV3", 0.5250, 0.1284, 0.3267),
    ("InceptionResNetV2", 0.5232, 0.1469, 0.33505),
    ("CAVE-Net", 0.7271482, 0.3359341, 0.5315),
]


@contextmanager
def criterion(num: int, slug: str):
    try:
        yield
    except BaseException:
        print(f"\n[acceptance] criterion {num} ({slug}): FAIL")
        raise
    print(f"\n[acceptance] criterion {num} ({slug}): PASS")


def _separated(rng: Rng, shape, min_gap=5e-3):
    """Random floats whose pairwise gaps exceed min_gap, so max/relu kinks
    stay clear of the finite-difference step."""
    n = int(np.prod(shape))
    vals = np.sort(rng.uniform(4 * n, -1.5, 1.5))
    picks = vals[:: 4][:n]
    if np.min(np.diff(picks)) <= min_gap:
        picks = np.linspace(-1.5, 1.5, n) + rng.uniform(n, -1e-3, 1e-3)
    out = picks[rng.permutation(n)].astype(np.float32)
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# criterion 1: gradient suite


def test_criterion_1_gradient_suite():
    import time
    start = time.time()
    with criterion(1, "gradient suite, 20 seeded instances per op"):
        root = Rng(0xACCE97)
        n_inst = 20

        for i in range(n_inst):
            r = root.fork(i)

            # matmul
            a = r.fork(1).normal((3, 4)).astype(np.float32)
            b = r.fork(2).normal((4, 2)).astype(np.float32)
            t = r.fork(3).normal((3, 2)).astype(np.float32)
            check_grad(lambda ts: T.mse_loss(T.matmul(ts[0], ts[1]), ts[2]),
                       lambda xs: ref.mse(xs[0] @ xs[1], xs[2]),
                       [a, b, t], seeds_grads_for=[0, 1])

            # conv2d (stride/padding rotate per instance)
            s, p = [(1, 0), (1, 1), (2, 1)][i % 3]
            x = r.fork(4).normal((1, 2, 4, 4)).astype(np.float32)
            k = r.fork(5).normal((2, 2, 2 + s, 2 + s), 0.0, 0.5).astype(np.float32)
            kh = 2 + s
            if (4 + 2 * p - kh) % s == 0:
                ho = (4 + 2 * p - kh) // s + 1
                t4 = r.fork(6).normal((1, 2, ho, ho)).astype(np.float32)
                check_grad(
                    lambda ts, s=s, p=p: T.mse_loss(T.conv2d(ts[0], ts[1], s, p), ts[2]),
                    lambda xs, s=s, p=p: ref.mse(ref.conv2d(xs[0], xs[1], s, p), xs[2]),
                    [x, k, t4], seeds_grads_for=[0, 1])

            # conv2d_transpose
            st, pt = [(1, 0), (2, 1), (2, 0)][i % 3]
            xt = r.fork(7).normal((1, 2, 3, 3)).astype(np.float32)
            kt = r.fork(8).normal((2, 2, 4, 4), 0.0, 0.5).astype(np.float32)
            ht = (3 - 1) * st + 4 - 2 * pt
            tt = r.fork(9).normal((1, 2, ht, ht)).astype(np.float32)
            check_grad(
                lambda ts, st=st, pt=pt: T.mse_loss(
                    T.conv2d_transpose(ts[0], ts[1], st, pt), ts[2]),
                lambda xs, st=st, pt=pt: ref.mse(
                    ref.conv2d_transpose(xs[0], xs[1], st, pt), xs[2]),
                [xt, kt, tt], seeds_grads_for=[0, 1])

            # avg + max pooling (separated values keep argmax stable)
            xp = _separated(r.fork(10), (1, 2, 4, 4))
            tp = r.fork(11).normal((1, 2, 2, 2)).astype(np.float32)
            check_grad(lambda ts: T.mse_loss(T.pool(ts[0], "avg", 2), ts[1]),
                       lambda xs: ref.mse(ref.avgpool(xs[0], 2, 2, 2, 2), xs[1]),
                       [xp, tp], seeds_grads_for=[0])
            check_grad(lambda ts: T.mse_loss(T.pool(ts[0], "max", 2), ts[1]),
                       lambda xs: ref.mse(ref.maxpool(xs[0], 2, 2, 2, 2), xs[1]),
                       [xp, tp], seeds_grads_for=[0])

            # global and channel pooling
            tg = r.fork(12).normal((1, 2, 1, 1)).astype(np.float32)
            check_grad(lambda ts: T.mse_loss(T.global_pool(ts[0], "avg"), ts[1]),
                       lambda xs: ref.mse(ref.global_avg_pool(xs[0]), xs[1]),
                       [xp, tg], seeds_grads_for=[0])
            tc = r.fork(13).normal((1, 1, 4, 4)).astype(np.float32)
            check_grad(lambda ts: T.mse_loss(T.channel_pool(ts[0], "avg"), ts[1]),
                       lambda xs: ref.mse(ref.channel_avg(xs[0]), xs[1]),
                       [xp, tc], seeds_grads_for=[0])
            check_grad(lambda ts: T.mse_loss(T.channel_pool(ts[0], "max"), ts[1]),
                       lambda xs: ref.mse(ref.channel_max(xs[0]), xs[1]),
                       [xp, tc], seeds_grads_for=[0])

            # activations
            xa = _separated(r.fork(14), (3, 5))
            ta = r.fork(15).normal((3, 5), 0.0, 0.4).astype(np.float32)
            check_grad(lambda ts: T.mse_loss(T.relu(ts[0]), ts[1]),
                       lambda xs: ref.mse(ref.relu(xs[0]), xs[1]),
                       [xa, ta], seeds_grads_for=[0])
            check_grad(lambda ts: T.mse_loss(T.sigmoid(ts[0]), ts[1]),
                       lambda xs: ref.mse(ref.sigmoid(xs[0]), xs[1]),
                       [xa, ta], seeds_grads_for=[0])
            check_grad(lambda ts: T.mse_loss(T.softmax(ts[0], 1), ts[1]),
                       lambda xs: ref.mse(ref.softmax(xs[0], 1), xs[1]),
                       [xa, ta], seeds_grads_for=[0])

            # losses
            pred = r.fork(16).normal((3, 4)).astype(np.float32)
            targ = r.fork(17).normal((3, 4)).astype(np.float32)
            check_grad(lambda ts: T.mse_loss(ts[0], ts[1]),
                       lambda xs: ref.mse(xs[0], xs[1]),
                       [pred, targ], seeds_grads_for=[0, 1])
            # keep probabilities >= ~0.1: the log's curvature otherwise
            # dominates the finite-difference estimate at step 1e-3
            raw = np.abs(r.fork(18).normal((4, 5), 0.0, 0.6)).astype(np.float32) + 0.6
            probs = (raw / raw.sum(axis=1, keepdims=True)).astype(np.float32)
            labels = np.array([0, 2, 4, 1])
            check_grad(lambda ts: T.cross_entropy(ts[0], labels),
                       lambda xs: ref.cross_entropy(xs[0], labels),
                       [probs], seeds_grads_for=[0])

            # dropout (fixed mask captured from the op itself)
            xd = r.fork(19).normal((6, 6)).astype(np.float32)
            td = r.fork(20).normal((6, 6), 0.0, 0.4).astype(np.float32)
            drop_rng_seed = 1000 + i
            probe = T.dropout(T.Tensor(xd), 0.4, True, Rng(drop_rng_seed))
            keep = (probe.data != 0).astype(np.float64) / 0.6
            check_grad(
                lambda ts: T.mse_loss(
                    T.dropout(ts[0], 0.4, True, Rng(drop_rng_seed)), ts[1]),
                lambda xs: ref.mse(xs[0] * keep, xs[1]),
                [xd, td], seeds_grads_for=[0])

            # composed CBAM refinement
            params = cbam_mod.init_cbam_params(2, 2, 3, r.fork(21))
            module = cbam_mod.Cbam(params)
            arrays = {k2: v.data.astype(np.float64) for k2, v in params.items()}
            f = r.fork(22).normal((1, 2, 4, 4)).astype(np.float32)
            tf = r.fork(23).normal((1, 2, 4, 4), 0.0, 0.3).astype(np.float32)
            check_grad(
                lambda ts: T.mse_loss(cbam_mod.cbam_refine(module, ts[0]), ts[1]),
                lambda xs: ref.mse(ref.cbam_refine(
                    xs[0], arrays["cbam/spatial_w"], arrays["cbam/spatial_b"],
                    arrays["cbam/channel_w1"], arrays["cbam/channel_b1"][0],
                    arrays["cbam/channel_w2"], arrays["cbam/channel_b2"][0]),
                    xs[1]),
                [f, tf], seeds_grads_for=[0])

        elapsed = time.time() - start
        assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s"
        print(f"\n[acceptance] gradient suite runtime: {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion 2: published class-count arithmetic


def test_criterion_2_balance_table_arithmetic():
    with criterion(2, "per-class floor 7500 reproduces the published counts"):
        rng = Rng(0x7AB1E1)
        records = []
        for cname, count in TABLE1_TRAIN.items():
            label = data_mod.class_index(cname)
            for i in range(count):
                pixels = rng.fork((label << 32) | i).uniform((3, 4, 4))
                records.append(data_mod.make_record(
                    pixels.astype(np.float32), label, "original",
                    f"{cname}/{i:05d}"))
        ds = data_mod.LabeledDataset(records)
        assert len(ds) == 37_607
        balanced = data_mod.balance_dataset(ds, 7500, Rng(0xF100D))
        counts = balanced.recount()
        for cname, expected in TABLE1_AFTER.items():
            got = int(counts[data_mod.class_index(cname)])
            assert got == expected, f"{cname}: {got} != {expected}"
        assert len(balanced) == 96_163
        originals = sum(1 for r in balanced.records if r.provenance == "original")
        assert originals == 37_607


# ---------------------------------------------------------------------------
# criterion 3: combined-metric arithmetic


def test_criterion_3_combined_metric_rows():
    with criterion(3, "combined metric reproduces all seven leaderboard rows"):
        for name, auc, bal, expected in TABLE3_ROWS:
            got = metrics_mod.combined_metric(auc, bal)
            assert abs(got - expected) <= 5e-4, f"{name}: {got} vs {expected}"


# ---------------------------------------------------------------------------
# criterion 4: oracle equivalence


def test_criterion_4_oracle_equivalence():
    with criterion(4, "knn / auc / forest match brute-force oracles"):
        # exact knn scan vs double-loop oracle, 100 queries, k in {1,3,7}
        rng = Rng(0x04AC1E)
        store = rng.normal((400, 10)).astype(np.float32)
        labels = rng.integers(4, 400)
        queries = rng.normal((100, 10)).astype(np.float32)
        for k in (1, 3, 7):
            model = synxrf_mod.knn_fit(store, labels, k=k)
            probs = synxrf_mod.knn_predict_proba(model, queries)
            for qi, q in enumerate(queries):
                scored = []
                for j, row in enumerate(store):
                    acc = 0.0
                    for av, bv in zip(row.tolist(), q.tolist()):
                        acc += (float(av) - float(bv)) ** 2
                    scored.append((acc, j))
                scored.sort()
                counts = np.bincount([labels[j] for _, j in scored[:k]],
                                     minlength=4)
                assert np.array_equal(probs[qi], counts / k), (k, qi)

        # midrank AUC vs all-pairs counting, 50 binary instances
        for i in range(50):
            r = rng.fork(9000 + i)
            n = 24
            y = (r.uniform(n) < 0.5).astype(np.int64)
            if y.min() == y.max():
                y[0] = 1 - y[0]
            scores = np.round(r.uniform(n), 1)  # quantised: ties are real
            probs2 = np.stack([1 - scores, scores], axis=1)
            ours = metrics_mod.one_vs_rest_aucs(probs2, y)[1]
            total = 0.0
            pos = scores[y == 1]
            neg = scores[y == 0]
            for sp in pos:
                for sn in neg:
                    total += 1.0 if sp > sn else (0.5 if sp == sn else 0.0)
            assert ours == total / (len(pos) * len(neg)), i

        # forest probabilities vs direct tree-vote enumeration
        X = rng.normal((60, 6)).astype(np.float32)
        yf = rng.integers(3, 60)
        forest = synxrf_mod.rf_fit(X, yf, n_trees=10, seed=77)
        probs3 = synxrf_mod.rf_predict_proba(forest, X)
        votes = np.stack([synxrf_mod.tree_predict(t, X) for t in forest.trees])
        oracle = np.stack([np.bincount(votes[:, i], minlength=3) / 10
                           for i in range(len(X))])
        assert np.array_equal(probs3, oracle)


# ---------------------------------------------------------------------------
# criterion 5: voting algebra on exhaustive grids


def test_criterion_5_voting_algebra():
    with criterion(5, "voting algebra on exhaustive 2-class grids"):
        grid = [k / 10 for k in range(11)]

        # four-member ensemble vote
        for ks in product(range(11), repeat=4):
            rows = [np.array([[k / 10, (10 - k) / 10]]) for k in ks]
            fused = synxrf_mod.soft_vote(rows)
            # permutation invariance
            assert np.allclose(synxrf_mod.soft_vote(rows[::-1]), fused,
                               atol=1e-12)
            # idempotence when members agree
            if len(set(ks)) == 1:
                assert np.allclose(fused, rows[0], atol=1e-15)
            # integer oracle for the decision incl. the tie rule
            total = sum(ks)
            expected = 0 if total >= 5 * 4 else 1
            assert synxrf_mod.vote_labels(fused)[0] == expected, ks

        # three-member fusion with weights
        for ks in product(range(11), repeat=3):
            member_rows = {
                name: np.array([[k / 10, (10 - k) / 10]])
                for name, k in zip(fusion_mod.MEMBER_NAMES, ks)
            }
            fused = fusion_mod.fuse_rows(member_rows)
            total = sum(ks)
            expected = 0 if total >= 5 * 3 else 1
            assert synxrf_mod.vote_labels(fused)[0] == expected, ks
            # positive rescaling of all weights keeps the decision
            for scale in (0.25, 8.0):
                scaled = fusion_mod.fuse_rows(member_rows,
                                              weights=(scale, scale, scale))
                assert np.allclose(scaled, fused, atol=1e-12)
        print("\n[acceptance] grids: 11^4 ensemble combos + 11^3 fusion combos")


# ---------------------------------------------------------------------------
# criterion 6: learning sanity at desk scale


def test_criterion_6_learning_sanity(trained_ae, trained_cbam, trained_dnn,
                                     trained_synxrf, train_ds, val_latents,
                                     val_labels):
    with criterion(6, "desk-scale learning thresholds"):
        from cavenet.autoencoder import _dataset_loss

        images = train_ds.pixel_batch()
        ae_mse = _dataset_loss(trained_ae, images, 64)
        baseline = float(((images - images.mean(axis=0)) ** 2).mean())
        assert ae_mse * 2.0 <= baseline, \
            f"autoencoder {ae_mse:.4f} vs baseline {baseline:.4f}"

        best_acc = max(h[2] for h in trained_cbam.history)
        assert len(trained_cbam.history) <= 30
        assert best_acc > 0.80, f"cbam best val accuracy {best_acc}"

        latents, _ = val_latents
        labels = val_labels
        floor = 0.25 + 0.30
        accs = {"dnn": float((trained_dnn.predict_proba(latents).argmax(1)
                              == labels).mean())}
        members = synxrf_mod.member_probas(trained_synxrf, latents)
        for name, probs in members.items():
            accs[name] = float((probs.argmax(1) == labels).mean())
        print(f"\n[acceptance] member val accuracies: "
              f"{ {k: round(v, 3) for k, v in accs.items()} }")
        for name, acc in accs.items():
            assert acc >= floor, f"{name} accuracy {acc:.3f} below {floor}"


# ---------------------------------------------------------------------------
# criterion 7: determinism


PIPELINE_FLAGS = [
    "--seed", "42", "--side", "16", "--classes", "3", "--per_class", "24",
    "--val_per_class", "9", "--floor", "30", "--ae_widths", "6,12",
    "--ae_latent_dim", "16", "--ae_epochs", "3", "--dnn_hidden", "32,16,8",
    "--dnn_epochs", "6", "--dnn_folds", "3", "--svm_epochs", "60",
    "--rf_trees", "12", "--gbt_rounds", "6", "--cbam_widths", "6,12",
    "--cbam_blocks", "1", "--cbam_epochs", "4",
]
PIPELINE_STAGES = ["gen-data", "balance", "train-ae", "extract", "train-dnn",
                   "train-synxrf", "train-cbam", "fuse", "report"]


def _run_pipeline(out_dir: str) -> None:
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(
        [str(p) for p in sys.path if p])
    for stage in PIPELINE_STAGES:
        proc = subprocess.run(
            [sys.executable, "-m", "cavenet.cli", stage, "--out", out_dir]
            + PIPELINE_FLAGS,
            capture_output=True, text=True, env=env)
        assert proc.returncode == 0, f"{stage} failed: {proc.stderr}"


def test_criterion_7_pipeline_determinism(tmp_path, trained_cbam, trained_dnn,
                                          trained_synxrf, trained_ae, val_ds):
    with criterion(7, "bitwise-identical reruns and parallel fusion"):
        run_a = str(tmp_path / "runA")
        run_b = str(tmp_path / "runB")
        _run_pipeline(run_a)
        _run_pipeline(run_b)
        compared = 0
        for root, _dirs, files in os.walk(run_a):
            for name in files:
                path_a = os.path.join(root, name)
                path_b = os.path.join(run_b, os.path.relpath(path_a, run_a))
                with open(path_a, "rb") as fa, open(path_b, "rb") as fb:
                    assert fa.read() == fb.read(), path_a
                compared += 1
        assert compared > 20
        print(f"\n[acceptance] compared {compared} artifact files bit-exactly")

        net = fusion_mod.CaveNet(trained_cbam, trained_dnn, trained_synxrf,
                                 trained_ae)
        batch = val_ds.pixel_batch()[:50]
        seq = fusion_mod.member_probas(net, batch, parallel=False)
        par = fusion_mod.member_probas(net, batch, parallel=True)
        for name in fusion_mod.MEMBER_NAMES:
            assert np.array_equal(seq[name], par[name]), name
        assert np.array_equal(fusion_mod.fuse_rows(seq), fusion_mod.fuse_rows(par))


# ---------------------------------------------------------------------------
# criterion 8: attention composition order


def test_criterion_8_attention_order():
    with criterion(8, "spatial-before-channel composition is observable"):
        params = cbam_mod.init_cbam_params(3, 3, 3, Rng(0x0815))
        module = cbam_mod.Cbam(params)
        f = T.Tensor(Rng(99).normal((3, 5, 5), 0.0, 2.0).astype(np.float32))
        spatial_first = module.channel.refine(module.spatial.refine(f)).data
        channel_first = module.spatial.refine(module.channel.refine(f)).data
        assert not np.allclose(spatial_first, channel_first, atol=1e-6), \
            "crafted input failed to distinguish the orders"
        out = cbam_mod.cbam_refine(module, f).data
        assert np.array_equal(out, spatial_first)
        assert not np.array_equal(out, channel_first)
